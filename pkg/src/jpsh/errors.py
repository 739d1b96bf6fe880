"""Exception hierarchy shared by all jpsh modules."""


class JpshError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(JpshError):
    """A file does not conform to its declared on-disk format."""


class DataError(JpshError):
    """Parsed data violates a content invariant (non-finite values, ragged rows, ...)."""


class SplitError(JpshError):
    """A train/test split cannot be produced as requested."""


class ParamError(JpshError):
    """A parameter is outside its admissible range."""


class ShapeError(JpshError):
    """Array shapes are inconsistent across arguments."""


class SolverError(JpshError):
    """A linear system could not be solved to the required accuracy."""


class DivergenceError(JpshError):
    """The training objective became non-finite."""


class EmptyIndexError(JpshError):
    """A search was issued against an index holding no codes."""


class LabelError(JpshError):
    """Label information is required but missing or malformed."""


class ConfigError(JpshError):
    """An experiment configuration is invalid."""
