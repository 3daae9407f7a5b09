"""Exception hierarchy shared by all pipeline stages."""


class PlapsymError(Exception):
    """Base class; ``exit_code`` is what the CLI returns for it."""

    exit_code = 1


class ConfigError(PlapsymError, ValueError):
    exit_code = 2


class CurveSimplicityError(ConfigError):
    def __init__(self, reason):
        super().__init__(f"curve simplicity check failed: {reason}")
        self.reason = reason


class AssumptionError(ConfigError):
    """The nonlinearity violates the structural assumptions for the chosen p."""


class MeshError(PlapsymError):
    exit_code = 3


class SolverError(PlapsymError):
    exit_code = 3


class ConvergenceError(SolverError):
    def __init__(self, message, last_iterate=None, history=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.history = list(history or [])


class PositivityError(SolverError):
    pass


class PostProcessingError(PlapsymError):
    exit_code = 4


class OptimizationError(PostProcessingError):
    def __init__(self, message, best_x=None, best_value=None):
        super().__init__(message)
        self.best_x = best_x
        self.best_value = best_value


class LevelSetError(PostProcessingError):
    pass
