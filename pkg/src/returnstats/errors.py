"""Exception types shared across the package."""


class ReturnStatsError(Exception):
    """Base class for all package errors."""


class UnknownMap(ReturnStatsError):
    """Requested builtin map name does not exist."""


class InvalidParameter(ReturnStatsError):
    """Map or operation parameter outside its valid range."""


class PointOnSingularSet(ReturnStatsError):
    """Evaluation requested at a point where the map is undefined."""

    def __init__(self, x, msg=None):
        self.x = x
        super().__init__(msg or f"map undefined at x={x!r}")


class OrbitHitsSingularSet(ReturnStatsError):
    """An orbit landed exactly on a point with no defined image."""

    def __init__(self, step, x):
        self.step = step
        self.x = x
        super().__init__(f"orbit hit singular point x={x!r} at step {step}")


class Censored(ReturnStatsError):
    """No return/hit observed within the iteration cutoff."""

    def __init__(self, n_max):
        self.n_max = n_max
        super().__init__(f"no return within n_max={n_max} steps")


class TooManyCensored(ReturnStatsError):
    """Censored fraction of a sample run exceeded the allowed limit."""


class TooFewEntries(ReturnStatsError):
    """Orbit entered the target set fewer times than requested."""


class AllCensored(ReturnStatsError):
    """Every sample in a batch was censored; no distribution to report."""


class ResolutionExceeded(ReturnStatsError):
    """Branch endpoints could not be separated at the requested tolerance."""


class NoVisit(ReturnStatsError):
    """Orbit never visited the target interval within the step budget."""


class PullbackDegenerate(ReturnStatsError):
    """Monotone pullback collapsed below machine resolution or left its branch."""


class NoConvergence(ReturnStatsError):
    """Power iteration did not converge within the iteration budget."""

    def __init__(self, max_iters, residual):
        self.max_iters = max_iters
        self.residual = residual
        super().__init__(f"no convergence after {max_iters} iterations "
                         f"(residual {residual:.3e})")


class InsufficientDecay(ReturnStatsError):
    """Too few correlation points above the noise floor to fit a rate."""


class ConfigError(ReturnStatsError):
    """Experiment configuration file is malformed or inconsistent."""
