r"""Stationary scattering for finitely supported lattice potentials.

All operators ``H0 + V`` along a path are handled on one channel-source space:
the union ``K`` of all support sites, with ``V = P^* D P`` for a real diagonal
``D`` on ``K``. On ``K``

* the full sandwiched resolvent is ``X_D = R0 (1 + D R0)^{-1}``,
* the scattered-wave (``+``) channel map of ``H0 + V`` is
  ``Z_D = Z0 (1 + D R0)^{-1}``, so that ``pi Z_D^* Z_D = Im X_D``,
* ``S(lambda; H0 + V, H0) = 1 - 2 pi i Z0 (1 + D R0)^{-1} D Z0^*``,
* the infinitesimal scattering matrix of ``H`` in direction ``W`` is
  ``Pi_H(W) = Z_D D_W Z_D^*``.

With this gauge ``dS(H_r, H0)/dr = -2 pi i Pi_{H_r}(W) S(H_r, H0)`` along any
straight segment, so the wave-matrix conjugation in the chronological
exponential is the identity.
"""
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .errors import AmbiguityWarning, ConfigurationError, ResonanceError
from .lattice import (
    DEFAULT_EDGE_MARGIN,
    BoundaryT,
    ChannelMap,
    FactoredPerturbation,
    LatticePotential,
    above,
    channel_map,
    check_band,
    plane_waves,
    resolvent_matrix,
    sandwiched_resolvent,
)
from .linalg import unitarity_residual
from .texp import MatrixPath, texp

RESONANCE_COND = 1e12


# ---------------------------------------------------------------------------
# Data types


@dataclass(frozen=True)
class ScatteringSample:
    lam: float
    r: float
    S: np.ndarray
    det: complex
    eigenphases: np.ndarray

    @classmethod
    def from_matrix(cls, lam, r, s):
        ev = np.linalg.eigvals(s)
        return cls(float(lam), float(r), s, complex(np.linalg.det(s)), np.sort(np.angle(ev)))

    @property
    def unitarity_residual(self):
        return unitarity_residual(self.S)


@dataclass(frozen=True)
class InfinitesimalSM:
    lam: float
    r: float
    Pi: np.ndarray
    trace: float


@dataclass(frozen=True)
class EigenphasePath:
    lam: float
    r_grid: np.ndarray
    theta: np.ndarray  # (2, len(r_grid))
    ambiguous: bool = False

    @property
    def final(self):
        return self.theta[:, -1]


@dataclass(frozen=True)
class OperatorPath:
    """Piecewise-linear path ``H0 + V(t)`` through the given potentials.

    ``vertices[0]`` is the start potential, ``vertices[-1]`` the end; segment
    ``i`` joins ``vertices[i]`` and ``vertices[i+1]``. The global parameter
    ``t in [0, 1]`` runs through segment ``i`` on ``[i/n, (i+1)/n]``.
    """

    vertices: tuple

    def __post_init__(self):
        verts = tuple(
            v if isinstance(v, LatticePotential) else LatticePotential.from_mapping(v) for v in self.vertices
        )
        if len(verts) < 2:
            raise ConfigurationError("a path needs at least two vertices")
        object.__setattr__(self, "vertices", verts)

    @classmethod
    def straight(cls, end, start=None):
        start = LatticePotential((), ()) if start is None else start
        return cls((start, end))

    @classmethod
    def from_segments(cls, segments):
        """Build from ``[(start, end), ...]``; consecutive segments must join."""
        segs = [
            tuple(p if isinstance(p, LatticePotential) else LatticePotential.from_mapping(p) for p in seg)
            for seg in segments
        ]
        if not segs:
            raise ConfigurationError("no segments")
        for (_, end), (start, _) in zip(segs[:-1], segs[1:]):
            if end.as_dict() != start.as_dict():
                raise ConfigurationError("path segments are not continuous at a joint")
        return cls(tuple([segs[0][0]] + [end for _, end in segs]))

    @property
    def segments(self):
        return list(zip(self.vertices[:-1], self.vertices[1:]))

    @property
    def n_segments(self):
        return len(self.vertices) - 1

    @property
    def start(self):
        return self.vertices[0]

    @property
    def end(self):
        return self.vertices[-1]

    @property
    def joints(self):
        n = self.n_segments
        return tuple(i / n for i in range(1, n))

    def sites(self):
        s = set()
        for v in self.vertices:
            s.update(v.support)
        return np.array(sorted(s), dtype=int)

    def reversed(self):
        return OperatorPath(tuple(reversed(self.vertices)))

    def segment_arrays(self, sites):
        """Start and difference couplings of each segment on ``sites``."""
        starts = np.array([a.on(sites) for a, _ in self.segments]).reshape(self.n_segments, len(sites))
        diffs = np.array([b.on(sites) - a.on(sites) for a, b in self.segments]).reshape(starts.shape)
        return starts, diffs

    def couplings_at(self, t, sites):
        """Couplings on ``sites`` at global parameters ``t`` (array)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        starts, diffs = self.segment_arrays(sites)
        n = self.n_segments
        seg = np.clip(np.floor(t * n).astype(int), 0, n - 1)
        local = t * n - seg
        return starts[seg] + local[:, None] * diffs[seg], seg


def as_path(obj):
    """Coerce a potential, factored perturbation, mapping or path to :class:`OperatorPath`."""
    if isinstance(obj, OperatorPath):
        return obj
    if isinstance(obj, FactoredPerturbation):
        return OperatorPath.straight(obj.potential())
    if isinstance(obj, LatticePotential):
        return OperatorPath.straight(obj)
    return OperatorPath.straight(LatticePotential.from_mapping(obj))


# ---------------------------------------------------------------------------
# Channel-source frame at fixed lambda


class SiteFrame:
    """Free quantities on a fixed site list at ``lambda + i0``."""

    def __init__(self, lam, sites, edge_margin=DEFAULT_EDGE_MARGIN):
        self.lam = check_band(lam, edge_margin)
        self.sites = np.asarray(sites, dtype=int)
        self.K = len(self.sites)
        self.R0 = resolvent_matrix(above(self.lam), self.sites) if self.K else np.zeros((0, 0), complex)
        self.Z0 = plane_waves(self.lam, self.sites, edge_margin) if self.K else np.zeros((2, 0), complex)

    def _dressing(self, d, r=None):
        """``M = 1 + D R0`` for a stack of couplings ``d`` (n, K); checks for resonances."""
        d = np.atleast_2d(d)
        m = np.eye(self.K)[None] + d[:, :, None] * self.R0[None]
        if self.K:
            cond = np.linalg.cond(m)
            bad = ~(cond < RESONANCE_COND)
            if np.any(bad):
                i = int(np.argmax(bad))
                raise ResonanceError(self.lam, None if r is None else float(np.atleast_1d(r)[i]), float(cond[i]))
        return m

    def dressed_channels(self, d, r=None):
        """``Z_D = Z0 (1 + D R0)^{-1}`` for a stack of couplings; shape (n, 2, K)."""
        m = self._dressing(d, r)
        if not self.K:
            return np.zeros((m.shape[0], 2, 0), complex)
        zt = np.linalg.solve(np.swapaxes(m, -1, -2), np.broadcast_to(self.Z0.T, m.shape[:1] + self.Z0.T.shape))
        return np.swapaxes(zt, -1, -2)

    def full_resolvent(self, d, r=None):
        """``X_D = R0 (1 + D R0)^{-1}``; shape (n, K, K)."""
        m = self._dressing(d, r)
        if not self.K:
            return m
        xt = np.linalg.solve(np.swapaxes(m, -1, -2), np.broadcast_to(self.R0.T, m.shape))
        return np.swapaxes(xt, -1, -2)

    def smatrix(self, d, r=None):
        """``S(lambda; H0 + V, H0)`` for a stack of couplings; shape (n, 2, 2)."""
        d = np.atleast_2d(d)
        zd = self.dressed_channels(d, r)
        return np.eye(2)[None] - 2j * np.pi * (zd * d[:, None, :]) @ self.Z0.conj().T[None]

    def pi(self, d, direction, r=None):
        """``Pi_{H0+V}(W) = Z_D D_W Z_D^*``; ``direction`` broadcast against ``d``."""
        zd = self.dressed_channels(d, r)
        dw = np.broadcast_to(np.atleast_2d(direction), (zd.shape[0], self.K))
        return (zd * dw[:, None, :]) @ np.conj(np.swapaxes(zd, -1, -2))

    def flow_density(self, d, direction, r=None):
        """``(1/pi) Tr(D_W Im X_D)``: the trace of ``Pi`` computed from the resolvent side."""
        x = self.full_resolvent(d, r)
        im = (x - np.conj(np.swapaxes(x, -1, -2))) / 2j
        dw = np.broadcast_to(np.atleast_2d(direction), (x.shape[0], self.K))
        return np.real(np.einsum("nk,nkk->n", dw, im)) / np.pi


# ---------------------------------------------------------------------------
# Single factored perturbation H_r = H0 + r V


def _one_plus(f, lam, r, t0):
    a = np.eye(f.m) + r * f.J @ t0
    cond = np.linalg.cond(a)
    if not cond < RESONANCE_COND:
        raise ResonanceError(lam, r, cond)
    return a


def t_matrix_at(f, lam, r, edge_margin=DEFAULT_EDGE_MARGIN):
    """``T_r(lambda + i0) = T0 (1 + r J T0)^{-1}``."""
    lam = check_band(lam, edge_margin)
    t0 = sandwiched_resolvent(f, above(lam)).matrix
    a = _one_plus(f, lam, r, t0)
    return BoundaryT(above(lam), np.linalg.solve(a.T, t0.T).T)


def dressed_channel_map(f, lam, r, edge_margin=DEFAULT_EDGE_MARGIN):
    """``Z_r(lambda) = Z0(lambda) (1 + r J T0)^{-1}``, the ``+`` channel map of ``H_r``."""
    lam = check_band(lam, edge_margin)
    t0 = sandwiched_resolvent(f, above(lam)).matrix
    z0 = channel_map(f, lam, edge_margin).matrix
    a = _one_plus(f, lam, r, t0)
    return ChannelMap(lam, np.linalg.solve(a.T, z0.T).T)


def scattering_matrix(f, lam, r, edge_margin=DEFAULT_EDGE_MARGIN):
    """``S(lambda; H_r, H0) = 1 - 2 pi i r Z0 J (1 + r T0 J)^{-1} Z0^*``."""
    lam = check_band(lam, edge_margin)
    t0 = sandwiched_resolvent(f, above(lam)).matrix
    z0 = channel_map(f, lam, edge_margin).matrix
    a = np.eye(f.m) + r * t0 @ f.J
    cond = np.linalg.cond(a)
    if not cond < RESONANCE_COND:
        raise ResonanceError(lam, r, cond)
    s = np.eye(2) - 2j * np.pi * r * z0 @ f.J @ np.linalg.solve(a, z0.conj().T)
    return ScatteringSample.from_matrix(lam, r, s)


def det_scattering(f, lam, r, edge_margin=DEFAULT_EDGE_MARGIN):
    """``det S(lambda; H_r, H0)`` evaluated on ``K``.

    Uses ``pi Z0^* Z0 = Im T0`` and ``det(1 + AB) = det(1 + BA)``:
    ``det(1_K - 2 i r J (1 + r T0 J)^{-1} Im T0)``.
    """
    lam = check_band(lam, edge_margin)
    bt = sandwiched_resolvent(f, above(lam))
    t0 = bt.matrix
    a = np.eye(f.m) + r * t0 @ f.J
    cond = np.linalg.cond(a)
    if not cond < RESONANCE_COND:
        raise ResonanceError(lam, r, cond)
    return complex(np.linalg.det(np.eye(f.m) - 2j * r * f.J @ np.linalg.solve(a, bt.B)))


def rebased_scattering_matrix(f, lam, r0, h, edge_margin=DEFAULT_EDGE_MARGIN):
    """``S(lambda; H_{r0+h}, H_{r0})`` with ``H_{r0}`` as the reference operator.

    The stationary formula is applied with ``T_{r0}`` and the dressed channel
    map ``Z_{r0}`` in place of ``T0`` and ``Z0``.
    """
    t = t_matrix_at(f, lam, r0, edge_margin).matrix
    z = dressed_channel_map(f, lam, r0, edge_margin).matrix
    a = np.eye(f.m) + h * t @ f.J
    cond = np.linalg.cond(a)
    if not cond < RESONANCE_COND:
        raise ResonanceError(lam, r0 + h, cond)
    s = np.eye(2) - 2j * np.pi * h * z @ f.J @ np.linalg.solve(a, z.conj().T)
    return ScatteringSample.from_matrix(lam, r0 + h, s)


def infinitesimal_sm(f, lam, r, direction=None, edge_margin=DEFAULT_EDGE_MARGIN):
    """``Pi_{H_r}(W)(lambda)`` for ``H_r = H0 + r V``.

    ``direction`` defaults to ``V`` itself. The trace is computed from the
    resolvent side, ``(1/pi) Tr(D_W Im X)``, independently of ``Pi``.
    """
    v = f.potential() if isinstance(f, FactoredPerturbation) else f
    w = v if direction is None else direction
    if not isinstance(w, LatticePotential):
        w = LatticePotential.from_mapping(w)
    sites = np.array(sorted(set(v.support) | set(w.support)), dtype=int)
    frame = SiteFrame(lam, sites, edge_margin)
    d = r * v.on(sites)
    dw = w.on(sites)
    pi = frame.pi(d, dw, r)[0]
    pi = 0.5 * (pi + pi.conj().T)
    return InfinitesimalSM(frame.lam, float(r), pi, float(frame.flow_density(d, dw, r)[0]))


# ---------------------------------------------------------------------------
# Paths


def path_scattering_matrix(path, lam, edge_margin=DEFAULT_EDGE_MARGIN):
    """``S(lambda; H_end, H_start)`` in the ``+`` gauge of ``H0``: ``S(H_end, H0) S(H_start, H0)^*``."""
    path = as_path(path)
    frame = SiteFrame(lam, path.sites(), edge_margin)
    s_end = frame.smatrix(path.end.on(frame.sites), 1.0)[0]
    s_start = frame.smatrix(path.start.on(frame.sites), 0.0)[0]
    return ScatteringSample.from_matrix(lam, 1.0, s_end @ s_start.conj().T)


def pi_path(path, lam, edge_margin=DEFAULT_EDGE_MARGIN):
    """:class:`MatrixPath` ``t -> 2 pi n Pi_{H(t)}(W_seg)`` for :func:`texp` over ``[0, 1]``."""
    path = as_path(path)
    frame = SiteFrame(lam, path.sites(), edge_margin)
    n = path.n_segments
    _, diffs = path.segment_arrays(frame.sites)

    def many(t):
        d, seg = path.couplings_at(t, frame.sites)
        return 2 * np.pi * n * frame.pi(d, diffs[seg], t)

    return MatrixPath((0.0, 1.0), lambda t: many(np.array([t]))[0], path.joints, many)


def scattering_via_texp(path, lam, r_steps=10_000, edge_margin=DEFAULT_EDGE_MARGIN):
    """``S(lambda; H_end, H_start)`` as ``Texp(-2 pi i int Pi dr)`` along a piecewise-linear path."""
    path = as_path(path)
    res = texp(pi_path(path, lam, edge_margin), r_steps)
    return ScatteringSample.from_matrix(lam, 1.0, res.value)


def _path_smatrices(frame, path, t, s_start_adj):
    d, _ = path.couplings_at(t, frame.sites)
    return frame.smatrix(d, t) @ s_start_adj[None]


def eigenphase_track(path, lam, r_grid, edge_margin=DEFAULT_EDGE_MARGIN, max_refine=12):
    """Continuously unwound eigenphases of ``S(lambda; H_r, H_start)`` along ``r_grid``.

    The grid is refined internally until consecutive matrices differ by less
    than 0.5 in operator norm and no pairing is ambiguous; phases are
    reported on the requested grid only.
    """
    path = as_path(path)
    r_grid = np.asarray(r_grid, dtype=float)
    if r_grid.ndim != 1 or len(r_grid) == 0:
        raise ConfigurationError("r_grid must be a non-empty 1-D array")
    if np.any(np.diff(r_grid) <= 0):
        raise ConfigurationError("r_grid must be strictly ascending")
    frame = SiteFrame(lam, path.sites(), edge_margin)
    s_start_adj = frame.smatrix(path.start.on(frame.sites), 0.0)[0].conj().T
    if len(r_grid) == 1:
        s = _path_smatrices(frame, path, r_grid, s_start_adj)
        th = np.angle(np.linalg.eigvals(s))[0][:, None]
        return EigenphasePath(frame.lam, r_grid, th - (th if r_grid[0] == 0 else 0))

    fine = r_grid.copy()
    smats = _path_smatrices(frame, path, fine, s_start_adj)
    ambiguous = False
    for attempt in range(max_refine + 1):
        jumps = np.linalg.norm(np.diff(smats, axis=0), ord=2, axis=(1, 2))
        ev = np.linalg.eigvals(smats)
        theta, amb = kernels.track_phases(ev)
        # at a degenerate pair the labelling is immaterial
        degenerate = np.abs(ev[:, 0] - ev[:, 1]) < 1e-8
        amb = amb[1:] & ~degenerate[:-1] & ~degenerate[1:]
        bad = (jumps >= 0.5) | amb
        if not np.any(bad):
            break
        if attempt == max_refine:
            ambiguous = True
            warnings.warn(
                f"eigenphase matching stayed ambiguous at lambda={lam}; possible degenerate crossing",
                AmbiguityWarning,
                stacklevel=2,
            )
            break
        mids = 0.5 * (fine[:-1] + fine[1:])[bad]
        fine = np.sort(np.concatenate([fine, mids]))
        smats = _path_smatrices(frame, path, fine, s_start_adj)
    idx = np.searchsorted(fine, r_grid)
    theta = theta[idx].T
    if r_grid[0] == 0.0:
        theta = theta - theta[:, :1]
    return EigenphasePath(frame.lam, r_grid, theta, ambiguous)


def mu_from_phases(final_phases, theta):
    """``mu(theta) = sum_j (1 + floor((theta_j(1) - theta) / 2 pi))``; ``theta`` may be an array."""
    phases = np.asarray(final_phases, dtype=float)
    th = np.asarray(theta, dtype=float)
    x = (phases[:, None] - np.atleast_1d(th)[None, :]) / (2 * np.pi)
    if np.any(np.abs(x - np.round(x)) < 1e-12):
        warnings.warn("theta coincides with a final eigenphase modulo 2 pi", AmbiguityWarning, stacklevel=2)
    mu = np.sum(1 + np.floor(x), axis=0).astype(int)
    return int(mu[0]) if np.ndim(th) == 0 else mu


def mu_integral(final_phases):
    """``int_0^{2 pi} mu(theta) d theta`` as an exact sum over the steps of ``mu``."""
    phases = np.asarray(final_phases, dtype=float)
    cuts = np.sort(np.concatenate([[0.0, 2 * np.pi], np.mod(phases, 2 * np.pi)]))
    lengths = np.diff(cuts)
    mids = 0.5 * (cuts[:-1] + cuts[1:])
    keep = lengths > 0
    # midpoints lie strictly inside the steps, so no coincidence check is needed
    x = (phases[:, None] - mids[keep][None, :]) / (2 * np.pi)
    mu = np.sum(1 + np.floor(x), axis=0)
    return float(np.sum(mu * lengths[keep]))


def default_r_grid(path, points_per_segment=64):
    return np.linspace(0.0, 1.0, as_path(path).n_segments * points_per_segment + 1)


def mu_invariant(path, lam, theta, r_grid=None, edge_margin=DEFAULT_EDGE_MARGIN):
    """Pushnitski's ``mu(theta; lambda)`` from the unwound final eigenphases."""
    grid = default_r_grid(path) if r_grid is None else r_grid
    track = eigenphase_track(path, lam, grid, edge_margin)
    return mu_from_phases(track.final, theta)
