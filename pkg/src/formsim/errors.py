"""Exception types shared across the simulator."""


class FormsimError(Exception):
    """Base class for all simulator errors."""


class AssumptionViolated(FormsimError):
    """A vessel-parameter or scenario assumption does not hold."""


class NonFinite(FormsimError):
    """A computed quantity is NaN or infinite."""


class OutOfRange(FormsimError):
    """A path query lies outside the valid parameter range."""


class DegenerateGeometry(FormsimError):
    """Geometric construction is ill-posed (e.g. coincident vessels)."""


class DegenerateReference(FormsimError):
    """A reference signal is undefined (e.g. zero desired speed)."""


class InsufficientDecay(FormsimError):
    """No usable decay window found when fitting a convergence rate."""


class ScenarioError(FormsimError):
    """Scenario file is syntactically valid but semantically wrong."""
