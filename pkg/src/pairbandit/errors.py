"""Exception types shared across the package."""


class NotSPD(ValueError):
    """A matrix expected to be symmetric positive definite failed factorization."""


class DimensionMismatch(ValueError):
    pass


class InfeasibleRegion(ValueError):
    """No point satisfies the box and halfspace constraints."""


class FeatureDimOverflow(OverflowError):
    pass


class EmptyCube(ValueError):
    """A cube has no feasible candidate point."""


class BudgetExhausted(RuntimeError):
    """An oracle call asked for more periods than the clock has left."""

    def __init__(self, requested: int, remaining: int):
        super().__init__(f"requested {requested} periods, only {remaining} remain")
        self.requested = requested
        self.remaining = remaining


class ConfigError(ValueError):
    """Invalid experiment configuration; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
