"""Exception hierarchy shared by every stage of the pipeline."""


class DupCNNError(Exception):
    """Base class; `code` is the short machine-readable tag the CLI prints."""

    code = "error"


class FormatError(DupCNNError):
    code = "format"


class ConsistencyError(DupCNNError):
    code = "consistency"


class ConfigurationError(DupCNNError):
    code = "config"


class ShapeError(DupCNNError):
    code = "shape"


class NumericalError(DupCNNError):
    """Raised when a NaN/Inf shows up in values, gradients or the loss."""

    code = "numerical"


class VersionError(DupCNNError):
    code = "version"
