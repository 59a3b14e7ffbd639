"""Exception hierarchy shared by all stages."""


class FictitiousControlError(Exception):
    """Base class for every error raised by the package."""


class DimensionMismatch(FictitiousControlError, ValueError):
    pass


class ConfigError(FictitiousControlError, ValueError):
    """Raised with the full list of violations found in a configuration."""

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


# algebra
class NoProlongationExists(FictitiousControlError):
    pass


class LimitExceeded(FictitiousControlError):
    pass


class InvalidMatching(FictitiousControlError):
    pass


class NoSquareCandidate(FictitiousControlError):
    """No square candidate inside the overdetermined block; increase p."""


class NotSolvableAtP(FictitiousControlError):
    pass


# carleman
class OutOfRange(FictitiousControlError, ValueError):
    pass


class ConstructionFailed(FictitiousControlError):
    pass


class DegenerateRegion(FictitiousControlError, ValueError):
    pass


# pde / hum / compose
class IllConditionedStep(FictitiousControlError):
    pass


class Diverged(FictitiousControlError):
    pass


class NotConverged(FictitiousControlError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class GridTooCoarse(FictitiousControlError):
    pass
