"""Exception types shared across the package."""


class PwalyapError(Exception):
    """Base class for all package-specific errors."""


class LpNumericalFailure(PwalyapError):
    """The simplex solver lost numerical consistency (e.g. cycling)."""


class IterationCapExceeded(LpNumericalFailure):
    """An iterative solver hit its iteration cap without converging."""


class UnboundedError(PwalyapError):
    """An LP objective or a polytope direction is unbounded."""


class EmptyPolytopeError(PwalyapError):
    """An operation requiring a nonempty polytope received an empty one."""


class DimensionCapExceeded(PwalyapError):
    """Face enumeration requested beyond the configured dimension cap."""


class OutOfDomain(PwalyapError):
    """A state fell outside the union of the plant's mode regions."""

    def __init__(self, x, msg="state outside plant domain"):
        super().__init__(f"{msg}: {x}")
        self.x = x


class DegenerateOrigin(PwalyapError):
    """A pre-activation is exactly zero at the origin with an ambiguous
    sign in every neighborhood, so no single linear map holds locally."""


class ZeroCut(PwalyapError):
    """The separating-hyperplane matrix vanished (f_cl(x) = +-x degeneracy);
    the caller should resample the counterexample."""


class NumericalFailure(PwalyapError):
    """A numeric routine could not restore a required invariant."""


class DomainGap(PwalyapError):
    """The region of interest or its successor set leaves the plant domain,
    violating the certificate's standing hypothesis."""


class EmptyProjectionSet(PwalyapError):
    """The state-dependent projection polytope is empty at the query state."""


class UnstableLinearization(PwalyapError):
    """The closed-loop linearization at the origin has spectral radius >= 1,
    so no certificate of asymptotic stability can exist."""

    def __init__(self, eigenvalues):
        super().__init__(
            f"origin linearization is not Schur stable; eigenvalues {eigenvalues}"
        )
        self.eigenvalues = eigenvalues


class NoFeasibleGamma(PwalyapError):
    """Bisection found no scaling of the reference region that certifies."""


class DimensionUnsupported(PwalyapError):
    """Contour export only supports two-dimensional state spaces."""


class DomainError(PwalyapError):
    """A barrier/potential evaluation was requested outside its domain."""
