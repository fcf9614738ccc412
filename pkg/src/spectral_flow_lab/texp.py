"""Chronological (time-ordered) exponentials of matrix paths.

Solves ``dX/dt = (1/i) A(t) X(t)``, ``X(a) = 1`` on ``[a, b]``. The primary
scheme is the exponential midpoint rule: the ordered product of
``exp(-i dt A(t_mid))`` with later times multiplying on the left. The
truncated iterated-integral series is kept as an independent oracle.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg
from numpy.polynomial import chebyshev as C

from . import kernels
from .errors import ConfigurationError, EvaluationError
from .linalg import unitarity_residual


@dataclass(frozen=True)
class MatrixPath:
    """A piecewise-continuous matrix valued function on ``domain``.

    Parameters
    ----------
    domain : (a, b)
    evaluate : callable
        ``t -> (d, d)`` complex array.
    breakpoints : sequence of float
        Points in ``(a, b)`` where ``evaluate`` may jump or kink. Integration
        grids are split exactly there.
    evaluate_many : callable, optional
        Vectorised ``(n,) -> (n, d, d)`` version of ``evaluate``.
    """

    domain: tuple
    evaluate: Callable
    breakpoints: Sequence[float] = field(default_factory=tuple)
    evaluate_many: Optional[Callable] = None

    def __post_init__(self):
        a, b = self.domain
        if not b > a:
            raise ConfigurationError(f"empty domain {self.domain}")
        bps = tuple(sorted(float(t) for t in self.breakpoints))
        if any(not (a < t < b) for t in bps):
            raise ConfigurationError("breakpoints must lie strictly inside the domain")
        object.__setattr__(self, "breakpoints", bps)

    def pieces(self):
        a, b = self.domain
        edges = (a,) + self.breakpoints + (b,)
        return list(zip(edges[:-1], edges[1:]))

    def sample(self, t):
        t = np.asarray(t, dtype=float)
        if self.evaluate_many is not None:
            out = np.asarray(self.evaluate_many(t), dtype=np.complex128)
        else:
            out = np.array([self.evaluate(float(s)) for s in t], dtype=np.complex128)
        if not np.all(np.isfinite(out)):
            raise EvaluationError("path evaluation returned non-finite values")
        return out


@dataclass(frozen=True)
class TexpResult:
    value: np.ndarray
    step_count: int
    scheme: str
    unitarity_residual: Optional[float] = None


def _allocate_steps(pieces, steps):
    if steps < 1:
        raise ConfigurationError("steps must be >= 1")
    if steps < len(pieces):
        raise ConfigurationError(
            f"{steps} steps cannot cover {len(pieces)} subintervals between breakpoints"
        )
    lengths = np.array([hi - lo for lo, hi in pieces])
    share = lengths / lengths.sum() * steps
    counts = np.maximum(1, np.floor(share).astype(int))
    # largest remainder, deterministic tie-break by index
    while counts.sum() < steps:
        counts[np.argmax(share - counts)] += 1
    while counts.sum() > steps:
        idx = np.where(counts > 1)[0]
        counts[idx[np.argmin((share - counts)[idx])]] -= 1
    return counts


def _is_hermitian(stack, tol=1e-12):
    scale = max(1.0, float(np.max(np.abs(stack))))
    return float(np.max(np.abs(stack - np.conj(np.swapaxes(stack, -1, -2))))) <= tol * scale


def step_factors(a_stack, dt):
    """``exp(-i dt_k A_k)`` for a stack of matrices."""
    dt = np.broadcast_to(np.asarray(dt, dtype=float), a_stack.shape[:1])
    if _is_hermitian(a_stack):
        herm = 0.5 * (a_stack + np.conj(np.swapaxes(a_stack, -1, -2)))
        w, u = np.linalg.eigh(herm)
        phase = np.exp(-1j * dt[:, None] * w)
        return (u * phase[:, None, :]) @ np.conj(np.swapaxes(u, -1, -2))
    return scipy.linalg.expm(-1j * dt[:, None, None] * a_stack)


def texp(path, steps):
    """Exponential-midpoint approximation of ``Texp((1/i) int_a^b A)``.

    Second order in ``1/steps`` on each smooth piece. Each subinterval between
    breakpoints receives a share of ``steps`` proportional to its length (at
    least one).
    """
    pieces = path.pieces()
    counts = _allocate_steps(pieces, int(steps))
    mids, dts = [], []
    for (lo, hi), n in zip(pieces, counts):
        h = (hi - lo) / n
        mids.append(lo + h * (np.arange(n) + 0.5))
        dts.append(np.full(n, h))
    mids = np.concatenate(mids)
    dts = np.concatenate(dts)
    a_stack = path.sample(mids)
    herm = _is_hermitian(a_stack)
    value = kernels.ordered_product(step_factors(a_stack, dts))
    resid = unitarity_residual(value) if herm else None
    return TexpResult(value, int(counts.sum()), "product_midpoint", resid)


def _cheb_integration(n):
    """Nodes on [-1, 1] (ascending) and the matrix mapping samples to running integrals."""
    x = -np.cos(np.pi * np.arange(n) / (n - 1))
    vander = C.chebvander(x, n - 1)
    integ = C.chebint(np.eye(n), lbnd=-1, axis=0)
    vint = C.chebval(x, integ).T
    return x, vint @ np.linalg.inv(vander)


def texp_series(path, order, quad_points=32):
    """Truncated iterated-integral series for ``Texp((1/i) int A)``.

    Terms ``k = 0..order`` of ``sum_k i^-k int_{t_1 > ... > t_k} A(t_1)...A(t_k)``
    are built by repeated running integration on Chebyshev nodes, which is
    spectrally accurate for smooth paths. Pieces between breakpoints are
    composed in time order.
    """
    if order < 1:
        raise ConfigurationError("order must be >= 1")
    if quad_points < 2:
        raise ConfigurationError("quad_points must be >= 2")
    x, q = _cheb_integration(quad_points)
    total = None
    for lo, hi in path.pieces():
        t = 0.5 * (lo + hi) + 0.5 * (hi - lo) * x
        a_stack = path.sample(t)
        d = a_stack.shape[-1]
        qs = 0.5 * (hi - lo) * q
        term = np.broadcast_to(np.eye(d, dtype=np.complex128), a_stack.shape)
        acc = np.eye(d, dtype=np.complex128)
        for _ in range(order):
            integrand = a_stack @ term
            term = -1j * np.einsum("jl,lab->jab", qs, integrand)
            acc = acc + term[-1]
        total = acc if total is None else acc @ total
    return TexpResult(total, quad_points * len(path.pieces()), "series")


def constant_path(a, domain=(0.0, 1.0)):
    a = np.asarray(a, dtype=np.complex128)
    return MatrixPath(
        domain,
        lambda t: a,
        evaluate_many=lambda t: np.broadcast_to(a, (len(t),) + a.shape),
    )
