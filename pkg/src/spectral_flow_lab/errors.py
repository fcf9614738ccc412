"""Exception and warning classes shared across the package."""


class SpectralFlowError(Exception):
    """Base class for all errors raised by this package."""


class InputError(SpectralFlowError, ValueError):
    """Malformed numerical input (non-finite entries, wrong shapes)."""


class ConfigurationError(SpectralFlowError, ValueError):
    """Inconsistent run parameters or experiment configuration."""


class DomainError(SpectralFlowError, ValueError):
    """Spectral parameter outside the domain where a quantity is defined."""


class BandEdgeError(DomainError):
    """Spectral parameter too close to (or beyond) an edge of the band [-2, 2]."""


class ResonanceError(DomainError):
    """``1 + r T_0(lambda + i0) J`` is (numerically) singular.

    Carries the offending spectral parameter and coupling.
    """

    def __init__(self, lam, r, cond=None):
        self.lam = lam
        self.r = r
        self.cond = cond
        msg = f"resonance at lambda={lam!r}, r={r!r}"
        if cond is not None:
            msg += f" (condition number {cond:.3g})"
        super().__init__(msg)


class EvaluationError(SpectralFlowError, ValueError):
    """A user supplied function returned non-finite values."""


class BandEdgeWarning(UserWarning):
    """A bound state or trajectory lies within tolerance of a band edge."""


class TieWarning(UserWarning):
    """A query point coincides (within tolerance) with an eigenvalue."""


class AmbiguityWarning(UserWarning):
    """Eigenvalue matching could not be resolved by grid refinement."""


class QuadratureWarning(UserWarning):
    """Quadrature error estimate exceeds the requested tolerance."""
