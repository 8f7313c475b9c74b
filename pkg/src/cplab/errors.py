class ValidationError(ValueError):
    """A precondition on an input was violated."""


class InfeasibleError(RuntimeError):
    """The request is well formed but exceeds a configured enumeration limit."""
