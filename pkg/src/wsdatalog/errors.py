"""Exception hierarchy shared by every stage of the engine."""


class WsDatalogError(Exception):
    """Base class for all engine errors."""


class ParseError(WsDatalogError):
    """Malformed program, query, or CSV text."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            where = f"line {line}" if column is None else f"line {line}, column {column}"
            message = f"{where}: {message}"
        super().__init__(message)


class SemanticError(WsDatalogError):
    """Well-formed input that violates a structural invariant (safety, arity)."""


class PreconditionViolated(WsDatalogError):
    """An algorithm was called on a program outside its syntactic class."""


class NotWeaklySticky(PreconditionViolated):
    pass


class NotSticky(PreconditionViolated):
    pass


class CapExceeded(WsDatalogError):
    """A configured safety cap was hit."""


class RuleCapExceeded(CapExceeded):
    pass


class DisjunctCapExceeded(CapExceeded):
    pass


class UnknownPredicate(WsDatalogError):
    pass
