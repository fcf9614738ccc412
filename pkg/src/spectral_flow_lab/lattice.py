r"""The discrete Schroedinger operator on the integer lattice.

``H0`` is the adjacency operator ``(H0 psi)(n) = psi(n+1) + psi(n-1)`` with
absolutely continuous spectrum ``[-2, 2]`` (``lambda = 2 cos k``,
``k in (0, pi)``). Perturbations are finitely supported real potentials
``V = G^* J G`` with ``G = sqrt|V|`` and ``J = sgn V`` restricted to the
support.

Resolvents follow ``R_z(H) = (H - z)^{-1}``, so that
``Im <delta_n, R_{lambda+i0} delta_n> > 0`` inside the band.
"""
import warnings
from dataclasses import dataclass
from typing import Union

import numpy as np
import scipy.linalg
import scipy.optimize

from .errors import BandEdgeError, BandEdgeWarning, ConfigurationError, DomainError, InputError
from .linalg import as_hermitian

DEFAULT_EDGE_MARGIN = 1e-3


@dataclass(frozen=True)
class BoundaryPoint:
    """The boundary value ``lambda + i0`` approached from the upper half plane."""

    lam: float

    @property
    def k(self):
        return float(np.arccos(self.lam / 2.0))


def above(lam):
    """Shorthand for :class:`BoundaryPoint`."""
    return BoundaryPoint(float(lam))


Spectral = Union[complex, float, BoundaryPoint]


@dataclass(frozen=True)
class LatticePotential:
    """Finitely supported real potential ``{site: coupling}``.

    Sites are stored sorted; zero couplings are rejected.
    """

    support: tuple
    values: tuple

    def __post_init__(self):
        sites = [int(s) for s in self.support]
        vals = [float(v) for v in self.values]
        if len(sites) != len(vals):
            raise InputError("support and values differ in length")
        if len(set(sites)) != len(sites):
            raise InputError("support sites must be distinct")
        if not all(np.isfinite(vals)):
            raise InputError("couplings must be finite")
        if any(v == 0.0 for v in vals):
            raise InputError("couplings must be nonzero; omit the site instead")
        order = np.argsort(sites, kind="stable")
        object.__setattr__(self, "support", tuple(sites[i] for i in order))
        object.__setattr__(self, "values", tuple(vals[i] for i in order))

    @classmethod
    def from_mapping(cls, mapping):
        """Build from ``{site: coupling}``; string keys (as in JSON) are accepted."""
        items = [(int(k), float(v)) for k, v in dict(mapping).items()]
        items = [(k, v) for k, v in items if v != 0.0]
        return cls(tuple(k for k, _ in items), tuple(v for _, v in items))

    def as_dict(self):
        return dict(zip(self.support, self.values))

    def __len__(self):
        return len(self.support)

    def __bool__(self):
        return len(self.support) > 0

    def on(self, sites):
        """Coupling values on an arbitrary site list (zero off the support)."""
        d = self.as_dict()
        return np.array([d.get(int(s), 0.0) for s in sites])

    def norm(self):
        return max((abs(v) for v in self.values), default=0.0)

    def __add__(self, other):
        d = self.as_dict()
        for s, v in other.as_dict().items():
            d[s] = d.get(s, 0.0) + v
        return LatticePotential.from_mapping(d)

    def __sub__(self, other):
        return self + other.scaled(-1.0)

    def scaled(self, r):
        return LatticePotential.from_mapping({s: r * v for s, v in self.as_dict().items()})


@dataclass(frozen=True)
class FactoredPerturbation:
    """``V = G^* J G`` on the channel-source space ``K = C^m``."""

    sites: np.ndarray
    g: np.ndarray
    J: np.ndarray

    @property
    def m(self):
        return len(self.sites)

    @property
    def j_diag(self):
        return np.diag(self.J).real

    @property
    def couplings(self):
        return self.j_diag * self.g**2

    def potential(self):
        return LatticePotential(tuple(int(s) for s in self.sites), tuple(self.couplings))


@dataclass(frozen=True)
class BoundaryT:
    """Sandwiched resolvent ``T(z) = G R_z G^*`` with imaginary part ``B``."""

    z: Spectral
    matrix: np.ndarray

    @property
    def B(self):
        t = self.matrix
        return (t - t.conj().T) / 2j


@dataclass(frozen=True)
class ChannelMap:
    """``Z(lambda; G)``: ``K -> C^2``, rows are the channels ``+k`` and ``-k``."""

    lam: float
    matrix: np.ndarray


def check_band(lam, edge_margin=DEFAULT_EDGE_MARGIN):
    lam = float(lam)
    if not abs(lam) < 2.0 - edge_margin:
        raise BandEdgeError(f"lambda={lam} is not inside the band minus margin {edge_margin}")
    return lam


def zeta(z):
    """Root of ``zeta^2 - z zeta + 1 = 0`` relevant for ``R_z(H0)``.

    For ``z`` off ``[-2, 2]`` this is the root with ``|zeta| < 1``. For a
    :class:`BoundaryPoint` it is ``exp(-ik)``: the branch continuous from the
    upper half plane, equivalently the one with ``Im r0(lambda + i0; n, n) > 0``.
    """
    if isinstance(z, BoundaryPoint):
        if not abs(z.lam) < 2.0:
            raise BandEdgeError(f"boundary value requested at lambda={z.lam} outside the open band")
        return np.exp(-1j * z.k)
    z = complex(z)
    if not np.isfinite(z):
        raise InputError("non-finite spectral parameter")
    if z.imag == 0.0 and abs(z.real) <= 2.0:
        raise DomainError(f"z={z.real} lies on the spectrum [-2, 2]; pass above(lambda) instead")
    root = np.sqrt(z * z - 4.0 + 0j)
    z1 = 0.5 * (z - root)
    z2 = 0.5 * (z + root)
    zt = z1 if abs(z1) < abs(z2) else z2
    if z.imag == 0.0:
        zt = complex(zt.real, 0.0)
    return zt


def free_resolvent_kernel(z, n, m):
    """``r0(z; n, m) = <delta_n, (H0 - z)^{-1} delta_m> = zeta^{|n-m|} / (zeta - 1/zeta)``.

    ``n`` and ``m`` may be integer arrays (broadcast).
    """
    zt = zeta(z)
    dist = np.abs(np.asarray(n) - np.asarray(m))
    val = zt**dist / (zt - 1.0 / zt)
    if np.ndim(val) == 0:
        return complex(val)
    return val


def free_resolvent_derivative(z, n, m):
    """``d/dz r0(z; n, m)``; equals the kernel of ``(H0 - z)^{-2}``."""
    zt = zeta(z)
    dist = np.abs(np.asarray(n) - np.asarray(m))
    s = zt - 1.0 / zt
    dzeta = zt / s
    dr = (dist * zt ** (dist - 1) / s - zt**dist * (1.0 + zt**-2) / s**2) * dzeta
    if np.ndim(dr) == 0:
        return complex(dr)
    return dr


def resolvent_matrix(z, sites):
    """Free resolvent kernel on a site list: ``[r0(z; n_i, n_j)]``."""
    s = np.asarray(sites)
    return free_resolvent_kernel(z, s[:, None], s[None, :]).reshape(len(s), len(s))


def factor_potential(v):
    """``G = sqrt|V|``, ``J = sgn V`` on the support of ``v``."""
    if not isinstance(v, LatticePotential):
        v = LatticePotential.from_mapping(v)
    if not v:
        raise InputError("cannot factor an empty potential")
    c = np.array(v.values)
    return FactoredPerturbation(np.array(v.support), np.sqrt(np.abs(c)), np.diag(np.sign(c)))


def sandwiched_resolvent(f, z):
    """``T0(z) = G R_z(H0) G^*`` for a factored perturbation."""
    r0 = resolvent_matrix(z, f.sites)
    return BoundaryT(z, f.g[:, None] * r0 * f.g[None, :])


def plane_waves(lam, sites, edge_margin=DEFAULT_EDGE_MARGIN):
    """Bare channel map on a site list: ``rho(k) [exp(-ikn); exp(+ikn)]``.

    ``rho(k)^2 = 1 / (4 pi sin k)`` is forced by ``pi Z^* Z = Im T0``.
    """
    lam = check_band(lam, edge_margin)
    k = np.arccos(lam / 2.0)
    rho = 1.0 / np.sqrt(4.0 * np.pi * np.sin(k))
    n = np.asarray(sites, dtype=float)
    return rho * np.vstack([np.exp(-1j * k * n), np.exp(1j * k * n)])


def channel_map(f, lam, edge_margin=DEFAULT_EDGE_MARGIN):
    """``Z0(lambda) = Z(lambda; G)`` for the free operator."""
    return ChannelMap(float(lam), plane_waves(lam, f.sites, edge_margin) * f.g[None, :])


def perturbation_kernel(f, lam, lam2, edge_margin=DEFAULT_EDGE_MARGIN):
    """``v(lambda, lambda') = Z0(lambda) J Z0(lambda')^*`` (2x2)."""
    z1 = channel_map(f, lam, edge_margin).matrix
    z2 = channel_map(f, lam2, edge_margin).matrix
    return z1 @ f.J @ z2.conj().T


# ---------------------------------------------------------------------------
# Bound states


def _real_resolvent(e, sites):
    return resolvent_matrix(e, sites).real


def count_bound_states(couplings, sites, e):
    """Number of eigenvalues of ``H0 + V`` above ``e`` (``e > 2``) or below ``e`` (``e < -2``).

    Uses the inertia of the small matrix ``D^{-1} + R0(e)`` on the support
    (a Birman-Schwinger count), so no root finding is involved. Couplings
    must be nonzero.
    """
    d = np.asarray(couplings, dtype=float)
    if np.any(d == 0):
        raise InputError("inertia count needs nonzero couplings")
    if abs(e) <= 2.0:
        raise DomainError("counting point must lie outside the band")
    w = np.linalg.eigvalsh(np.diag(1.0 / d) + _real_resolvent(e, sites))
    if e > 2.0:
        return int(np.sum(w < 0) - np.sum(d < 0))
    return int(np.sum(w > 0) - np.sum(d > 0))


def _bs_det(couplings, sites, e):
    """``det(1 + D R0(E))``; real for ``|E| > 2``."""
    d = np.asarray(couplings, dtype=float)
    return float(np.linalg.det(np.eye(len(d)) + d[:, None] * _real_resolvent(e, sites)))


def _roots_on_side(couplings, sites, sign, kappa_max, edge_tol, grid):
    # E = sign * 2 cosh(kappa): uniform kappa grid resolves near-edge states
    kap = np.linspace(0.0, kappa_max, grid + 1)[1:]
    f = np.array([_bs_det(couplings, sites, sign * 2 * np.cosh(q)) for q in kap])
    roots = []
    for i in np.where(np.sign(f[:-1]) * np.sign(f[1:]) <= 0)[0]:
        lo, hi = kap[i], kap[i + 1]
        if f[i] == 0.0:
            q = lo
        else:
            q = scipy.optimize.brentq(
                lambda x: _bs_det(couplings, sites, sign * 2 * np.cosh(x)), lo, hi, xtol=1e-15, rtol=1e-15
            )
        roots.append(sign * 2 * np.cosh(q))
    # a root in (0, kap[0]) is flagged as too close to the edge to resolve
    return roots, f[0]


def bound_states_of(couplings, sites, edge_tol=1e-10):
    """All eigenvalues of ``H0 + sum_i c_i delta_{n_i}`` outside ``[-2, 2]``.

    Roots of ``det(1 + D R0(E))`` are bracketed on a grid in
    ``kappa = arccosh(|E|/2)`` up to ``|E| = 2 + max|c|`` and refined to
    machine precision. The bracketing is cross-checked against the inertia
    count and refined until the two agree.
    """
    c = np.asarray(couplings, dtype=float)
    s = np.asarray(sites)
    keep = c != 0
    c, s = c[keep], s[keep]
    if len(c) == 0:
        return []
    e_max = 2.0 + float(np.sum(np.abs(c))) + 1e-9
    kappa_max = float(np.arccosh(e_max / 2.0))
    energies = []
    for sign in (1.0, -1.0):
        expected = count_bound_states(c, s, sign * (2.0 + edge_tol))
        grid = 64
        while True:
            roots, _ = _roots_on_side(c, s, sign, kappa_max, edge_tol, grid)
            if len(roots) >= expected or grid > 2**16:
                break
            grid *= 4
        if len(roots) != expected:
            warnings.warn(
                f"found {len(roots)} bound states but the inertia count is {expected}; "
                "a state is within tolerance of the band edge",
                BandEdgeWarning,
                stacklevel=2,
            )
        for e in roots:
            if abs(e) - 2.0 < 1e-8:
                warnings.warn(f"bound state {e!r} within 1e-8 of the band edge", BandEdgeWarning, stacklevel=2)
        energies.extend(roots)
    return sorted(float(e) for e in energies)


def bound_states(f, r):
    """Eigenvalues of ``H0 + r V`` outside ``[-2, 2]`` for a factored ``V``."""
    if not np.isfinite(r):
        raise InputError("coupling r must be finite")
    if r == 0:
        return []
    return bound_states_of(r * f.couplings, f.sites)


def bound_state_vector(couplings, sites, e):
    """Normalised bound state at energy ``e`` restricted to ``sites``, and its squared norm factor.

    With ``u`` the values of the eigenfunction on the support,
    ``psi = -R0(e) D u`` and ``||psi||^2 = u^* D R0(e)^2 D u``; the returned
    ``u`` is scaled so that ``||psi|| = 1``.
    """
    d = np.asarray(couplings, dtype=float)
    s = np.asarray(sites)
    m = np.eye(len(d)) + _real_resolvent(e, s) * d[None, :]
    _, _, vh = np.linalg.svd(m)
    u = vh[-1].conj()
    r2 = free_resolvent_derivative(e, s[:, None], s[None, :]).reshape(len(s), len(s)).real
    du = d * u
    norm2 = float(np.real(du.conj() @ r2 @ du))
    return u / np.sqrt(norm2)


def bound_state_weight(couplings, sites, e, direction):
    """``<psi, W psi>`` for the normalised bound state at ``e`` and a potential ``W`` on ``sites``."""
    u = bound_state_vector(couplings, sites, e)
    return float(np.real(np.sum(np.asarray(direction) * np.abs(u) ** 2)))


# ---------------------------------------------------------------------------
# Finite truncations (oracles)


def truncate(potential, n):
    """``H0 + V`` on ``N`` sites centred at 0 with Dirichlet ends."""
    if not isinstance(potential, LatticePotential):
        potential = LatticePotential.from_mapping(potential)
    if n < 3 or n % 2 == 0:
        raise ConfigurationError("truncation size must be an odd integer >= 3")
    half = (n - 1) // 2
    if any(abs(s) > half for s in potential.support):
        raise ConfigurationError(f"potential support exceeds the window [-{half}, {half}]")
    h = np.diag(np.ones(n - 1), 1) + np.diag(np.ones(n - 1), -1)
    for s, v in potential.as_dict().items():
        h[s + half, s + half] += v
    return as_hermitian(h)


def truncated_resolvent_entry(potential, n, z, i, j):
    """``<delta_i, (H_N - z)^{-1} delta_j>`` on an ``N``-site truncation (banded solve)."""
    if not isinstance(potential, LatticePotential):
        potential = LatticePotential.from_mapping(potential)
    half = (n - 1) // 2
    diag = np.zeros(n, dtype=complex)
    for s, v in potential.as_dict().items():
        diag[s + half] += v
    diag -= z
    ab = np.zeros((3, n), dtype=complex)
    ab[0, 1:] = 1.0
    ab[1] = diag
    ab[2, :-1] = 1.0
    rhs = np.zeros(n, dtype=complex)
    rhs[j + half] = 1.0
    return complex(scipy.linalg.solve_banded((1, 1), ab, rhs)[i + half])
