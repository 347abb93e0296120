"""Exception hierarchy.

Every error carries an ``exit_code`` so the command line front end can map
failures to distinct process exit statuses.
"""


class DpcpError(Exception):
    exit_code = 1


class ParseError(DpcpError, ValueError):
    """Malformed input file. ``line`` is 1-based when known."""

    exit_code = 2

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f" line {line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)


class ValidationError(DpcpError, ValueError):
    """Inputs parse but violate a contract (shapes, graph, config)."""

    exit_code = 3


class GraphGenerationError(DpcpError):
    exit_code = 3


class ProtocolError(DpcpError):
    """A node did not receive exactly the messages its neighborhood implies."""

    exit_code = 3


class NotConvergedError(DpcpError):
    exit_code = 4


class NumericalError(DpcpError, ArithmeticError):
    exit_code = 5


class DivergedError(NumericalError):
    """Raised by the network simulator; ``trace`` holds the rounds run so far."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace if trace is not None else []
