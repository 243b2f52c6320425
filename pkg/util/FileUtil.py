import os


def ensure_parent_dir(path: str) -> str:
    """
    Create the directory a file is about to be written into.

    Returns:
        str: The path, unchanged.
    """
    dir_path = os.path.dirname(path)
    if dir_path:
        os.makedirs(dir_path, exist_ok=True)
    return path
