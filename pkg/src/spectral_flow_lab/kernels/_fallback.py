"""Pure NumPy implementations of the hot loops.

These are the reference versions; ``_ckernels`` must agree with them to
rounding error.
"""
import numpy as np


def ordered_product(factors):
    """Time-ordered product ``F[n-1] @ ... @ F[1] @ F[0]`` of a stack of matrices."""
    factors = np.asarray(factors, dtype=np.complex128)
    n, d, _ = factors.shape
    out = np.eye(d, dtype=np.complex128)
    for k in range(n):
        out = factors[k] @ out
    return out


def track_phases(eigvals, ambiguity_tol=1e-12):
    """Continuously unwind the phases of two unit-modulus eigenvalue sequences.

    Parameters
    ----------
    eigvals : (n, 2) complex array
        Unordered eigenvalue pairs along a parameter grid.
    ambiguity_tol : float
        Pairings whose squared angular costs differ by less than this are
        reported as ambiguous.

    Returns
    -------
    theta : (n, 2) float array
        Unwound phases, ``theta[0] = angle(eigvals[0])``.
    ambiguous : (n,) bool array
        Steps at which both pairings were equally good.

    Notes
    -----
    Where two phases meet modulo ``2 pi`` the labels may pass from one
    branch to the other, shifting the unwound values by ``+2 pi m`` and
    ``-2 pi m``. Their sum and the mu-invariant are unaffected.
    """
    ev = np.asarray(eigvals, dtype=np.complex128)
    n = ev.shape[0]
    theta = np.empty((n, 2))
    ambiguous = np.zeros(n, dtype=bool)
    theta[0] = np.angle(ev[0])
    prev = ev[0].copy()
    for k in range(1, n):
        e0, e1 = ev[k]
        d00 = np.angle(e0 / prev[0])
        d11 = np.angle(e1 / prev[1])
        d10 = np.angle(e1 / prev[0])
        d01 = np.angle(e0 / prev[1])
        keep = d00 * d00 + d11 * d11
        swap = d10 * d10 + d01 * d01
        if abs(keep - swap) <= ambiguity_tol:
            ambiguous[k] = True
        if keep <= swap:
            theta[k, 0] = theta[k - 1, 0] + d00
            theta[k, 1] = theta[k - 1, 1] + d11
            prev[0], prev[1] = e0, e1
        else:
            theta[k, 0] = theta[k - 1, 0] + d10
            theta[k, 1] = theta[k - 1, 1] + d01
            prev[0], prev[1] = e1, e0
    return theta, ambiguous
