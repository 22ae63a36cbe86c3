"""Exception hierarchy shared by all modules."""


class LiqSurfError(ValueError):
    """Base class for data and validation errors raised by this package."""


class ParseError(LiqSurfError):
    """A record in an input file could not be parsed."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(LiqSurfError):
    """Input violates a documented invariant."""


class OrderingError(ValidationError):
    """Block numbers are not strictly increasing."""


class InsufficientJumpsError(LiqSurfError):
    """Too few liquidity jumps on one side of the current tick."""


class LogDomainError(LiqSurfError):
    """Zero or negative liquidity at a retained tick."""

    def __init__(self, block, x):
        self.block = block
        self.x = x
        super().__init__(f"non-positive liquidity at block {block}, x={x:.6f}")


class GapError(LiqSurfError):
    """A snapshot required by the block grid is missing."""

    def __init__(self, block):
        self.block = block
        super().__init__(f"no snapshot at required block {block}")


class ConditioningError(LiqSurfError):
    """Normal-equation matrix is singular or too ill-conditioned."""


class UndefinedVarianceError(LiqSurfError):
    """Spectrum or series has zero total variance."""


class SweepError(LiqSurfError):
    """Every fit in a model sweep failed."""
