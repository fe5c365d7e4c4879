"""Exception hierarchy.

Numerical failures (degeneracies, refinement limits, non-convergence) derive
from :class:`NumericalError`; the CLI maps them to exit code 3. Input
problems (bad grid files, off-grid sampling, size mismatches) derive from
:class:`InputError` and map to exit code 2.
"""


class NumericalError(RuntimeError):
    pass


class InputError(ValueError):
    pass


class Defective(NumericalError):
    """Matrix is (numerically) at a degeneracy: eigenvalues coincide or the
    eigenvector matrix is too ill-conditioned to invert."""


class DegenerateOnPath(NumericalError):
    def __init__(self, msg, index=None, k=None):
        super().__init__(msg)
        self.index = index
        self.k = k


class RefinementExhausted(NumericalError):
    pass


class ProjectionDegenerate(NumericalError):
    pass


class WindingAlongLoop(NumericalError):
    pass


class NonTransversal(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass


class ProbeDegenerate(NumericalError):
    pass


class SeamInconsistent(NumericalError):
    pass


class RoundingResidue(NumericalError):
    pass


class GridFormatError(InputError):
    def __init__(self, msg, offset):
        super().__init__(f"{msg} (byte offset {offset})")
        self.offset = offset


class OffGridError(InputError):
    """A grid-sampled model was asked for a momentum that is not a stored node."""


class SizeMismatch(InputError):
    pass
