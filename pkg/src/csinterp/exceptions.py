"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument is outside the mathematical domain of an operation."""


class ShapeError(ValueError):
    """Array arguments have incompatible shapes."""


class EvaluationError(ArithmeticError):
    """A coefficient or intermediate value is non-finite where it must be finite."""


class SingularCoefficientError(ArithmeticError):
    """A schedule coefficient ratio is singular at the requested time."""


class InsufficientSupportError(RuntimeError):
    """A kernel-smoothed estimate has negligible effective weight at the probe."""


class TrainingDivergedError(RuntimeError):
    """Training produced a non-finite loss."""

    def __init__(self, step: int, loss: float):
        self.step = step
        self.loss = loss
        super().__init__(f"non-finite loss {loss!r} at step {step}")


class IntegrationBlowUpError(RuntimeError):
    """An integrator state became non-finite."""

    def __init__(self, trajectory: int, step: int):
        self.trajectory = trajectory
        self.step = step
        super().__init__(f"non-finite state in trajectory {trajectory} at step {step}")


class ConfigError(ValueError):
    """An experiment configuration is invalid; names the offending field."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")
