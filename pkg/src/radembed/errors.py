class ConfigError(ValueError):
    """Invalid shapes, hyperparameters or command-line options."""


class DataFormatError(ValueError):
    """Malformed input file; message carries the path and line number."""


class TrainingDiverged(FloatingPointError):
    """A non-finite loss showed up during SGD."""
