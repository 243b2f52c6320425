import sys

from Cli.Commands import main

if __name__ == "__main__":
    sys.exit(main())
