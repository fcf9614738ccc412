"""Spectral flow, scattering matrices and the spectral shift function on a 1D lattice.

The model is the discrete Schroedinger operator ``H0 + V`` on ``l^2(Z)`` with
a finitely supported potential. Scattering matrices are computed both from
stationary formulas and as chronological exponentials of the infinitesimal
scattering matrix along piecewise-linear operator paths; the spectral shift
function is split into its absolutely continuous part (inside the band) and
its singular part (bound-state counting outside the band).
"""
from .errors import (
    AmbiguityWarning,
    BandEdgeError,
    BandEdgeWarning,
    ConfigurationError,
    DomainError,
    EvaluationError,
    InputError,
    QuadratureWarning,
    ResonanceError,
    SpectralFlowError,
    TieWarning,
)
from .kernels import BACKEND
from .lattice import (
    BoundaryPoint,
    FactoredPerturbation,
    LatticePotential,
    above,
    bound_states,
    channel_map,
    factor_potential,
    free_resolvent_kernel,
    perturbation_kernel,
    sandwiched_resolvent,
    truncate,
)
from .linalg import EigenSystem, eigh, fredholm_det, matrix_function
from .scattering import (
    OperatorPath,
    det_scattering,
    eigenphase_track,
    infinitesimal_sm,
    mu_invariant,
    path_scattering_matrix,
    scattering_matrix,
    scattering_via_texp,
    t_matrix_at,
)
from .spectral_shift import (
    birman_solomyak_xi,
    bump,
    infinitesimal_flow,
    krein_check,
    singular_steps,
    ssf_profile,
    xi_ac,
    xi_finite,
    xi_singular,
)
from .texp import MatrixPath, texp, texp_series

__version__ = "0.1.0"
