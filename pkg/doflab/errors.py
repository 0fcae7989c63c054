class DofLabError(Exception):
    """Base class for every error raised by doflab."""


class ParameterError(DofLabError, ValueError):
    """An argument is outside the range the operation accepts."""


class DimensionError(DofLabError):
    """A point or constraint refers to variables the region does not have."""


class EmptyRegionError(DofLabError):
    """The constraints leave no feasible point."""


class CapabilityError(DofLabError):
    """The request exceeds what the exact algorithms are allowed to attempt."""


class UnboundedError(DofLabError):
    """The linear program has no finite optimum (cannot happen with box constraints)."""


class UnknownSchemeError(DofLabError):
    """No built-in scheme has the requested name."""


class SchemeSyntaxError(DofLabError):
    """Scheme text does not follow the grammar."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class SchemeStructureError(SchemeSyntaxError):
    """Scheme text parses but declares something structurally impossible."""


class CausalityError(DofLabError):
    """A stream refers to an observation that does not exist yet."""


class InfeasiblePrecoderError(DofLabError):
    """A zero-forcing set leaves an empty null space."""


class NumericError(DofLabError):
    """Non-finite values reached a floating-point computation."""
