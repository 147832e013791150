from typing import Optional


class FlatNormError(Exception):
    """Base class for every error raised by the toolkit"""


class InvalidArgumentError(FlatNormError, ValueError):
    """An argument violates an operation's precondition"""


class ParseError(FlatNormError):
    """Malformed input file; ``offset`` is the byte offset of the problem"""

    def __init__(self, message: str, offset: int, path: Optional[str] = None):
        self.offset = offset
        self.path = path
        where = f"{path}: " if path else ""
        super().__init__(f"{where}{message} (at byte {offset})")


class SolverResourceError(FlatNormError):
    """A solver or enumeration exceeded its resource cap"""

    def __init__(self, message: str, best_bound: Optional[float] = None, iterations: int = 0):
        self.best_bound = best_bound
        self.iterations = iterations
        if best_bound is not None:
            message = f"{message}; best bound {best_bound:.12g}"
        super().__init__(message)


class OutputError(FlatNormError):
    """Writing an output file failed"""

    def __init__(self, message: str, path: str):
        self.path = path
        super().__init__(f"{path}: {message}")
