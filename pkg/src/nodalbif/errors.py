"""Exception hierarchy shared by all nodalbif modules."""


class NodalBifError(Exception):
    """Base class for every error raised by the package."""


class AllBelowThreshold(NodalBifError):
    """Every sample of a function is below the relative amplitude floor."""


class GridMismatch(NodalBifError):
    pass


class BlowUp(NodalBifError):
    """Shooting trajectory exceeded the amplitude guard before r=1."""


class BracketingFailed(NodalBifError):
    pass


class WeightDegenerate(NodalBifError):
    pass


class InvariantViolated(NodalBifError):
    """A structural property that must hold for the discrete problem failed.

    ``invariant`` names the check so callers (and the verify report) can say
    which one broke.
    """

    def __init__(self, invariant: str, detail: str = ""):
        self.invariant = invariant
        self.detail = detail
        super().__init__(f"{invariant}: {detail}" if detail else invariant)


class PoleAtMinusOne(NodalBifError):
    pass


class SingularJacobian(NodalBifError):
    pass


class NoConvergence(NodalBifError):
    pass


class AtBifurcation(NodalBifError):
    pass


class SwitchFailed(NodalBifError):
    pass


class SignatureBroken(NodalBifError):
    pass


class CorrectorStalled(NodalBifError):
    pass


class SchemaError(NodalBifError):
    pass
