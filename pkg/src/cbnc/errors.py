"""Exception types shared across the package."""


class CbncError(Exception):
    """Base class for all package errors."""


class ZeroInverse(CbncError, ZeroDivisionError):
    pass


class EmptyFile(CbncError, ValueError):
    pass


class DimensionMismatch(CbncError, ValueError):
    pass


class GenerationMismatch(CbncError, ValueError):
    pass


class EmptyInput(CbncError, ValueError):
    pass


class RankDeficient(CbncError):
    pass


class NotAuthorized(CbncError):
    pass


class NoPolluterFound(CbncError):
    pass


class NothingToServe(CbncError):
    pass


class SenderBusy(CbncError):
    pass


class ConfigInvalid(CbncError, ValueError):
    """Scenario configuration rejected; ``errors`` maps field name to message."""

    def __init__(self, errors: dict[str, str]):
        self.errors = dict(errors)
        detail = "; ".join(f"{k}: {v}" for k, v in sorted(self.errors.items()))
        super().__init__(f"invalid scenario config: {detail}")


class InsufficientSeeds(CbncError):
    pass


class RunError(CbncError):
    """A single simulation run inside an experiment failed."""

    def __init__(self, topology: str, strategy: str, seed: int, cause: BaseException):
        self.topology, self.strategy, self.seed, self.cause = topology, strategy, seed, cause
        super().__init__(f"run failed (topology={topology}, strategy={strategy}, seed={seed}): {cause}")
