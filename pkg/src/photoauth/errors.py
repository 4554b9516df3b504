"""Exception hierarchy shared by all photoauth modules."""


class PhotoAuthError(Exception):
    """Base class for every error raised by this package."""


class DomainError(PhotoAuthError, ValueError):
    """An argument lies outside the domain where the model is defined."""


class DriftError(DomainError):
    """Alice's per-round success is not above 1/2, so her walk cannot be steered to S+."""


class DegenerateDesignError(DomainError):
    """Stopping thresholds cannot be derived (e.g. a single spot gives Eve no negative drift)."""


class SizeError(DomainError):
    """Input too large for an exhaustive computation."""


class InsufficientSpotsError(DomainError):
    def __init__(self, needed: int, n_high: int, n_low: int):
        self.needed = needed
        self.n_high = n_high
        self.n_low = n_low
        super().__init__(
            f"need at least {needed} spots per class, have {n_high} high and {n_low} low"
        )


class ParseError(PhotoAuthError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


class InvariantError(PhotoAuthError, ValueError):
    """A loaded object violates a data invariant."""


class NonAbsorptionError(PhotoAuthError, RuntimeError):
    """A session did not reach either barrier within the round cap."""


class ScriptExhaustedError(PhotoAuthError, RuntimeError):
    """A scripted subject ran out of responses before the session ended."""
