"""Exception types shared across the laboratory modules."""


class KinlabError(Exception):
    """Base class for laboratory-specific failures."""


class ConfinementError(KinlabError):
    """Equilibrium mass integral diverges or truncation is untrustworthy."""


class ConditionError(KinlabError):
    """A named structural condition failed in strict mode."""

    def __init__(self, name: str, message: str = ""):
        self.condition = name
        super().__init__(message or f"structural condition {name} failed")


class DegenerateWeightError(KinlabError):
    """Weight construction hit a vanishing density."""


class StructureError(KinlabError):
    """A discrete operator violates a structural property it must have."""


class KernelConsistencyError(KinlabError):
    """Scattering kernel cannot be corrected to annihilate the Maxwellian."""


class MeasureDomainError(KinlabError):
    """Field support escapes the support of the equilibrium measure."""


class CertificateError(KinlabError):
    """No positive coercivity constant could be certified."""


class IntegrationDivergedError(KinlabError):
    """Time integration produced non-finite values."""

    def __init__(self, t: float, last_state=None):
        self.t = t
        self.last_state = last_state
        super().__init__(f"integration diverged at t = {t:.6g}")


class StructureViolationError(KinlabError):
    """Modified entropy increased beyond tolerance along a trajectory."""


class FitError(KinlabError):
    """Decay-rate fit is ill-posed on the requested window."""
