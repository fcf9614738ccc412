"""Dense Hermitian matrix services.

Eigendecompositions go through LAPACK ``heevd`` via :func:`numpy.linalg.eigh`,
which is deterministic for a fixed input. Everything downstream only uses
basis-invariant quantities (traces, determinants, projector sums), so the
choice of eigenvectors inside a degenerate cluster does not matter.
"""
from dataclasses import dataclass

import numpy as np

from .errors import EvaluationError, InputError

HERMITIAN_TOL = 1e-12


def as_hermitian(a, tol=HERMITIAN_TOL):
    """Validate and return ``a`` as a complex Hermitian ``(n, n)`` array.

    The result is exactly Hermitian (symmetrised); ``tol`` bounds the
    allowed asymmetry of the input, relative to its largest entry.
    """
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise InputError(f"expected a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InputError("matrix has non-finite entries")
    a = a.astype(np.complex128, copy=False)
    scale = max(1.0, float(np.max(np.abs(a))))
    if np.max(np.abs(a - a.conj().T)) > tol * scale:
        raise InputError("matrix is not Hermitian")
    return 0.5 * (a + a.conj().T)


@dataclass(frozen=True)
class EigenSystem:
    """Eigenvalues (ascending) and orthonormal eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self):
        return self.eigenvalues.shape[0]

    def reconstruct(self):
        u = self.eigenvectors
        return (u * self.eigenvalues) @ u.conj().T

    def projector(self, lam):
        """Spectral projection onto eigenvalues in the closed half-line ``(-inf, lam]``."""
        u = self.eigenvectors[:, self.eigenvalues <= lam]
        return u @ u.conj().T

    def count(self, lam):
        """Number of eigenvalues ``<= lam`` (closed convention); ``lam`` may be an array."""
        return np.searchsorted(self.eigenvalues, lam, side="right")


def _real_if_possible(h):
    return h.real if not np.any(h.imag) else h


def eigh(h):
    """Unitary diagonalisation of a Hermitian matrix."""
    h = as_hermitian(h)
    w, u = np.linalg.eigh(_real_if_possible(h))
    return EigenSystem(w, u.astype(np.complex128))


def eigvalsh(h):
    """Ascending eigenvalues of a Hermitian matrix."""
    return np.linalg.eigvalsh(_real_if_possible(as_hermitian(h)))


def matrix_function(h, f, eig=None):
    """Return ``f(H) = U f(diag) U*`` for a real scalar function ``f``.

    ``f`` is called once on the array of eigenvalues and must be vectorised.
    A precomputed :class:`EigenSystem` can be passed as ``eig``.
    """
    if eig is None:
        eig = eigh(h)
    fw = np.asarray(f(eig.eigenvalues))
    if fw.shape == ():
        fw = np.full(eig.dim, fw)
    if not np.all(np.isfinite(fw)):
        raise EvaluationError("function returned non-finite values on the spectrum")
    u = eig.eigenvectors
    return (u * fw) @ u.conj().T


def fredholm_det(a):
    """``det(I + A)`` via a partially pivoted LU factorisation."""
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InputError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InputError("matrix has non-finite entries")
    if a.shape[0] == 0:
        return 1.0 + 0.0j
    sign, logdet = np.linalg.slogdet(np.eye(a.shape[0]) + a)
    return complex(sign * np.exp(logdet))


def frobenius(a):
    return float(np.linalg.norm(a, "fro"))


def unitarity_residual(u):
    """``||U* U - I||_F``."""
    u = np.asarray(u)
    return frobenius(u.conj().T @ u - np.eye(u.shape[-1]))
