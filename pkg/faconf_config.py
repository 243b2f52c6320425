# Process-wide names and defaults shared by the CLI and the logging setup.
LOG_ENV_VAR = "FACONF_LOG"
DEFAULT_LOG_LEVEL = "info"

# Acquisition rate of the recorded EEG-EMG trials and the rate the model runs at
ACQUISITION_FS_HZ = 2500.0
MODEL_FS_HZ = 250.0
