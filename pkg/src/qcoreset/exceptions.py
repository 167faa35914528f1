"""Exception hierarchy shared by every stage of the pipeline."""


class QcoresetError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(QcoresetError, ValueError):
    """A CSV or JSON input could not be parsed.

    ``row`` is the 1-based line number in the source file (the header is
    line 1), or ``None`` when the error is not tied to a row.
    """

    def __init__(self, message, row=None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class MissingFileError(ParseError, FileNotFoundError):
    pass


class RaggedRowError(ParseError):
    pass


class NonNumericFeatureError(ParseError):
    pass


class NonIntegerLabelError(ParseError):
    pass


class InsufficientDataError(QcoresetError, ValueError):
    pass


class DimensionError(QcoresetError, ValueError):
    pass


class ClassLookupError(QcoresetError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class SingleClassError(QcoresetError, ValueError):
    pass


class CoresetSizeError(QcoresetError, ValueError):
    pass


class NotSPDError(QcoresetError, ValueError):
    pass


class ConvergenceError(QcoresetError, RuntimeError):
    """An iterative solver stopped before meeting its tolerance.

    ``residual`` holds the final gradient norm (Newton) or the final KKT
    violation (SMO).
    """

    def __init__(self, message, residual):
        self.residual = float(residual)
        super().__init__(f"{message} (final residual {self.residual:.3e})")


class ProblemTooLargeError(QcoresetError, ValueError):
    pass


class StageError(QcoresetError):
    """Wraps a failure inside :func:`qcoreset.evalrep.run_experiment`."""

    def __init__(self, pair, stage, cause):
        self.pair = tuple(pair)
        self.stage = stage
        self.cause = cause
        super().__init__(f"pair {self.pair}, stage '{stage}': {cause}")
