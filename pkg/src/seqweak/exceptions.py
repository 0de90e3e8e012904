"""Exception types raised by seqweak."""


class SeqweakError(Exception):
    """Base class for physics-level failures (exit status 1 from the CLI)."""


class WireError(ValueError):
    """Operator/register dimension or wire-index mismatch."""


class InvalidDistributionError(ValueError):
    """Probability vector that is negative, non-finite or not normalized."""


class OrthogonalSelectionError(SeqweakError):
    """<Phi|psi> vanishes, so weak values are undefined."""


class ForbiddenSelectionError(SeqweakError):
    """Every outcome of a measurement scheme has zero amplitude for this pre/post pair."""


class DegenerateBranchError(SeqweakError):
    """A post-selected branch has (numerically) zero probability."""
