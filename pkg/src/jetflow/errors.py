"""Exception types raised by the solver modules."""


class JetflowError(Exception):
    """Base class for all solver errors."""


class DomainError(JetflowError):
    """An argument lies outside the mathematical domain of an operation."""


class SonicBranchError(DomainError):
    """Momentum at or beyond the sonic value; the untruncated inversion is
    undefined there and the caller must use the truncated density instead."""


class FluxWindowError(JetflowError):
    """Requested mass flux lies outside the admissible window (Q_*, Q^*)."""

    def __init__(self, Q, Q_star, Q_upper):
        self.Q = Q
        self.Q_star = Q_star
        self.Q_upper = Q_upper
        super().__init__(
            f"flux Q={Q:.6g} outside admissible window "
            f"({Q_star:.6g}, {Q_upper:.6g})"
        )


class GeometryError(JetflowError):
    """Nozzle geometry cannot support the requested truncated domain."""


class ParameterError(JetflowError):
    """A derived boundary-data parameter violates its constraint."""


class ShootingError(JetflowError):
    """The free-boundary fit could not bracket a sign change in the fit gap."""

    def __init__(self, message, trials=None):
        self.trials = trials or []
        super().__init__(message)


class ConsistencyError(JetflowError):
    """A converged field violates a structural property it must satisfy
    (e.g. row monotonicity needed for the free-boundary graph)."""


class ConvergenceError(JetflowError):
    """Iteration failed to reach the requested tolerance."""


class ConfigError(JetflowError):
    """Run configuration is missing or invalid."""
