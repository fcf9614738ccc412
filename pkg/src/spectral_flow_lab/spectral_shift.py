"""Spectral shift functions: absolutely continuous and singular parts, and
finite-matrix oracles (eigenvalue counting, Birman-Solomyak, Krein trace formula).
"""
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigurationError, DomainError, InputError, QuadratureWarning, TieWarning
from .lattice import DEFAULT_EDGE_MARGIN, bound_state_weight, bound_states_of, count_bound_states
from .linalg import as_hermitian, eigh, eigvalsh, matrix_function
from .quadrature import adaptive_gauss_legendre, gl_nodes
from .scattering import SiteFrame, as_path, infinitesimal_sm

XI_AC_TOL = 1e-10
XI_AC_FLAG = 1e-8
TIE_TOL = 1e-12


@dataclass(frozen=True)
class TestFunction:
    """Compactly supported test function with its derivative."""

    __test__ = False  # not a pytest class

    evaluate: Callable
    derivative: Callable
    support: tuple

    def __call__(self, x):
        return self.evaluate(x)


def bump(center=0.0, halfwidth=1.0, power=3):
    """``(1 - u^2)^power`` for ``|u| < 1``, ``u = (x - center)/halfwidth``; C^(power-1)."""

    def f(x):
        u = (np.asarray(x, dtype=float) - center) / halfwidth
        return np.where(np.abs(u) < 1, np.clip(1 - u * u, 0, None) ** power, 0.0)

    def df(x):
        u = (np.asarray(x, dtype=float) - center) / halfwidth
        inner = np.clip(1 - u * u, 0, None)
        return np.where(np.abs(u) < 1, -2 * power * u * inner ** (power - 1) / halfwidth, 0.0)

    return TestFunction(f, df, (center - halfwidth, center + halfwidth))


@dataclass(frozen=True)
class SSFProfile:
    band_grid: np.ndarray
    xi_ac: np.ndarray
    quad_error: np.ndarray
    singular_steps: list = field(default_factory=list)
    flagged: np.ndarray = None


@dataclass(frozen=True)
class FlowDensity:
    lam: float
    r: float
    ac_density: float
    singular_atoms: list


# ---------------------------------------------------------------------------
# Infinite lattice model


def xi_ac_detail(path, lam, nodes=32, tol=XI_AC_TOL, flag_tol=XI_AC_FLAG, edge_margin=DEFAULT_EDGE_MARGIN):
    """Like :func:`xi_ac` but returns ``(value, quad_error, flagged)`` instead of warning."""
    path = as_path(path)
    frame = SiteFrame(lam, path.sites(), edge_margin)
    if frame.K == 0:
        return 0.0, 0.0, False
    starts, diffs = path.segment_arrays(frame.sites)
    value = 0.0
    error = 0.0
    converged = True
    for start, diff in zip(starts, diffs):
        if not np.any(diff):
            continue

        def density(r, start=start, diff=diff):
            return frame.flow_density(start[None, :] + r[:, None] * diff[None, :], diff, r)

        v, e, ok = adaptive_gauss_legendre(density, 0.0, 1.0, n=nodes, tol=tol)
        value += v
        error += e
        converged &= ok
    return value, error, bool(error > flag_tol or not converged)


def xi_ac(path, lam, nodes=32, tol=XI_AC_TOL, flag_tol=XI_AC_FLAG, edge_margin=DEFAULT_EDGE_MARGIN):
    """Absolutely continuous spectral shift ``xi^(a)(lambda)`` along a piecewise-linear path.

    Sums ``int_0^1 (1/pi) Tr(D_W Im X_{H_r}(lambda + i0)) dr`` over segments
    with adaptive composite Gauss-Legendre (``nodes`` per panel, panels
    bisected until a panel and its two halves agree to ``tol``).

    Returns
    -------
    (value, quad_error)
    """
    value, error, flagged = xi_ac_detail(path, lam, nodes, tol, flag_tol, edge_margin)
    if flagged:
        warnings.warn(f"xi_ac quadrature error {error:.2e} at lambda={lam}", QuadratureWarning, stacklevel=2)
    return value, error


def flow_density(path, lam, r, segment=0, edge_margin=DEFAULT_EDGE_MARGIN):
    """Absolutely continuous density and singular atoms of the flow at ``H(r)`` on one segment.

    ``ac_density`` is ``Tr Pi_{H_r}(W)(lambda)``; each atom is
    ``(E_k(r), <psi_k, W psi_k>)`` for the bound states of ``H_r``.
    """
    path = as_path(path)
    start, end = path.segments[segment]
    w = end - start
    h = start + w.scaled(r)
    sites = np.array(sorted(set(h.support) | set(w.support)), dtype=int)
    if not w:
        return FlowDensity(float(lam), float(r), 0.0, [])
    if h:
        ac = infinitesimal_sm(h, lam, 1.0, direction=w, edge_margin=edge_margin).trace
    else:
        ac = infinitesimal_sm(w, lam, 0.0, edge_margin=edge_margin).trace
    atoms = []
    c = h.on(sites)
    nz = c != 0
    for e in bound_states_of(c[nz], sites[nz]):
        atoms.append((float(e), bound_state_weight(c[nz], sites[nz], e, w.on(sites[nz]))))
    return FlowDensity(float(lam), float(r), float(ac), atoms)


def _count_outside(couplings, sites, lam):
    nz = couplings != 0
    if not np.any(nz):
        return 0
    return count_bound_states(couplings[nz], sites[nz], lam)


def xi_singular(path, lam, points_per_segment=64):
    """Singular spectral shift ``xi^(s)(lambda)`` for ``|lambda| > 2``.

    Signed count of bound-state crossings of the level ``lambda`` along the
    path (upward crossings count +1), accumulated over an ``r`` grid on
    each segment. Between grid points the number of crossings is the change
    in the number of bound states beyond ``lambda``, obtained exactly from
    an inertia count, so the result does not depend on the grid.
    """
    lam = float(lam)
    if not abs(lam) >= 2.0 + 1e-6:
        raise DomainError(f"xi_singular needs |lambda| >= 2 + 1e-6, got {lam}")
    path = as_path(path)
    sites = path.sites()
    if len(sites) == 0:
        return 0
    t = np.linspace(0.0, 1.0, path.n_segments * points_per_segment + 1)
    d, _ = path.couplings_at(t, sites)
    counts = np.array([_count_outside(row, sites, lam) for row in d])
    steps = np.diff(counts)
    # above the band: more states beyond lambda means an upward crossing
    return int(np.sum(steps) if lam > 0 else -np.sum(steps))


def singular_steps(path):
    """Piecewise-constant ``xi^(s)`` on ``R \\ [-2, 2]`` as ``[((lo, hi), value), ...]``.

    Jumps can only occur at bound-state energies of the end points; infinite
    ends are reported as ``+-inf``.
    """
    path = as_path(path)
    sites = path.sites()
    energies = set()
    for v in (path.start, path.end):
        c = v.on(sites)
        nz = c != 0
        if np.any(nz):
            energies.update(bound_states_of(c[nz], sites[nz]))
    out = []
    for sign in (-1.0, 1.0):
        cuts = sorted(abs(e) for e in energies if np.sign(e) == sign)
        edges = [2.0] + cuts + [np.inf]
        for lo, hi in zip(edges[:-1], edges[1:]):
            if hi - lo <= 0:
                continue
            probe = lo + 1.0 if np.isinf(hi) else 0.5 * (lo + hi)
            val = xi_singular(path, sign * probe)
            interval = (lo, hi) if sign > 0 else (-hi, -lo)
            out.append((interval, val))
    out.sort(key=lambda item: item[0][0])
    return out


def ssf_profile(path, band_grid, nodes=32, edge_margin=DEFAULT_EDGE_MARGIN):
    band_grid = np.asarray(band_grid, dtype=float)
    vals, errs, flags = [], [], []
    for lam in band_grid:
        v, e, flagged = xi_ac_detail(path, lam, nodes=nodes, edge_margin=edge_margin)
        vals.append(v)
        errs.append(e)
        flags.append(flagged)
    return SSFProfile(band_grid, np.array(vals), np.array(errs), singular_steps(path), np.array(flags))


def xi_ac_integral(path, f, nodes=32, panels=64, edge_margin=DEFAULT_EDGE_MARGIN):
    """``int f'(lambda) xi^(a)(lambda) d lambda`` over the support of ``f`` (must lie in the band)."""
    lo, hi = f.support
    if not (-2 + edge_margin < lo and hi < 2 - edge_margin):
        raise ConfigurationError("test function support must lie inside the band")
    edges = np.linspace(lo, hi, panels + 1)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        x, w = gl_nodes(a, b, nodes)
        xi = np.array([xi_ac(path, lam, edge_margin=edge_margin)[0] for lam in x])
        total += float(np.dot(w, f.derivative(x) * xi))
    return total


# ---------------------------------------------------------------------------
# Finite matrices


def _spectrum(h):
    if hasattr(h, "eigenvalues"):
        return h.eigenvalues
    return eigvalsh(h)


def xi_finite(h0, h1, lam):
    """``N0(lambda) - N1(lambda)`` with ``N`` the closed eigenvalue counting function.

    With this sign ``Tr(f(H1) - f(H0)) = int f' xi``. ``h0``/``h1`` may be
    matrices or precomputed :class:`~spectral_flow_lab.linalg.EigenSystem`.
    """
    w0, w1 = _spectrum(h0), _spectrum(h1)
    if len(w0) != len(w1):
        raise InputError("matrices must have the same dimension")
    lam_arr = np.asarray(lam, dtype=float)
    for w in (w0, w1):
        if np.any(np.abs(w[None, :] - np.atleast_1d(lam_arr)[:, None]) < TIE_TOL):
            warnings.warn("lambda coincides with an eigenvalue; closed convention applied", TieWarning, stacklevel=2)
            break
    out = np.searchsorted(w0, lam_arr, side="right") - np.searchsorted(w1, lam_arr, side="right")
    return int(out) if out.ndim == 0 else out


def infinitesimal_flow(h, v, phi):
    """``Tr(V phi(H))``."""
    h = as_hermitian(h)
    v = as_hermitian(v)
    if h.shape != v.shape:
        raise InputError("dimension mismatch")
    fn = phi.evaluate if isinstance(phi, TestFunction) else phi
    return float(np.real(np.trace(v @ matrix_function(h, fn))))


def birman_solomyak_xi(h0, v, lam_grid, r_nodes=32, panels=1):
    """``F(lambda) = int_0^1 Tr(V E_(-inf, lambda]^{H0 + rV}) dr`` by composite Gauss-Legendre in ``r``.

    ``F`` is the running integral of the spectral shift function: its
    distributional derivative is ``xi``.
    """
    if r_nodes < 8:
        raise ConfigurationError("r_nodes must be >= 8")
    h0 = as_hermitian(h0)
    v = as_hermitian(v)
    lam_grid = np.asarray(lam_grid, dtype=float)
    out = np.zeros(lam_grid.shape)
    tie = False
    edges = np.linspace(0.0, 1.0, panels + 1)
    for a, b in zip(edges[:-1], edges[1:]):
        rs, ws = gl_nodes(a, b, r_nodes)
        for r, w in zip(rs, ws):
            es = eigh(h0 + r * v)
            u = es.eigenvectors
            weights = np.real(np.sum(u.conj() * (v @ u), axis=0))
            cum = np.concatenate([[0.0], np.cumsum(weights)])
            out += w * cum[es.count(lam_grid)]
            tie |= bool(np.any(np.abs(es.eigenvalues[None, :] - lam_grid.reshape(-1, 1)) < TIE_TOL))
    if tie:
        warnings.warn("a grid point coincides with an eigenvalue of some H_r", TieWarning, stacklevel=2)
    return out


def krein_check(h0, h1, f, lam_quad=8):
    """Both sides of the Krein trace formula for finite matrices.

    ``lhs = Tr(f(H1) - f(H0))``; ``rhs = int f'(lambda) xi(lambda) d lambda``
    with ``xi = N0 - N1`` piecewise constant between the merged eigenvalues
    and ``lam_quad``-point Gauss-Legendre on each constant piece.
    """
    w0 = eigvalsh(h0)
    w1 = eigvalsh(h1)
    if len(w0) != len(w1):
        raise InputError("matrices must have the same dimension")
    lhs = float(np.sum(f.evaluate(w1)) - np.sum(f.evaluate(w0)))
    lo, hi = f.support
    cuts = np.concatenate([[lo, hi], w0, w1])
    cuts = np.unique(cuts[(cuts >= lo) & (cuts <= hi)])
    a, b = cuts[:-1], cuts[1:]
    # pieces between (numerically) coincident eigenvalues carry no weight
    keep = (b - a) > 1e-13 * max(1.0, hi - lo)
    a, b = a[keep], b[keep]
    mids = 0.5 * (a + b)
    xi = np.searchsorted(w0, mids, side="right") - np.searchsorted(w1, mids, side="right")
    x, w = np.polynomial.legendre.leggauss(lam_quad)
    nodes = 0.5 * (a + b)[:, None] + 0.5 * (b - a)[:, None] * x[None, :]
    piece = 0.5 * (b - a) * np.sum(w[None, :] * f.derivative(nodes), axis=1)
    rhs = float(np.sum(xi * piece))
    return lhs, rhs
