"""Exception types shared across the pipeline.

The CLI maps ValidationError (and subclasses) to exit code 1 and
I/O-level failures (OSError, ModelIOError) to exit code 2.
"""


class XlmatchError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(XlmatchError):
    """Input data or arguments violate a documented contract."""


class ParseError(ValidationError):
    """A data file is malformed; the message names the file and line."""


class DataFormatError(ParseError):
    """An embedding or auxiliary data file violates its format."""


class ConfigError(ValidationError):
    """A model or pipeline configuration is inconsistent."""


class AlignmentError(ValidationError):
    """Prediction files do not cover the same pair ids."""


class CalibrationError(ValidationError):
    """Probability calibration cannot be fit on the given pairs."""


class ModelIOError(XlmatchError):
    """A model weights file is unreadable, truncated, or corrupt."""


class UsageError(ValidationError):
    """Bad command line; the message carries the usage text."""
