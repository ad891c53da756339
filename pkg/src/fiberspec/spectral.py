"""Eigen-analysis of discretized transfer operators.

The leading pair comes from power iteration (the spectral gap is large on
all default maps, and the hot path stays O(n^2) per step).  The subdominant
radius uses a full dense eigensolve plus a guard for numerically nilpotent
deflated parts: QR eigensolvers report spurious eigenvalues of magnitude
eps^(1/chain) on defective chains (mode-halving Fourier matrices, dyadic
Ulam matrices), so a collapse of the deflated eighth power overrides the
eigenvalue estimate with 0.
"""

import numpy as np

from .fiber import FiberFunction
from .maps import expanding_constant
from .transfer import GridDensity

MAX_DENSE_DIM = 1024


class ConvergenceError(RuntimeError):
    """Iteration failed to converge; carries the last residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


def leading_pair(op, tol=1e-12, max_iter=10000):
    """Dominant eigenvalue and invariant density of a discretized operator.

    Power iteration from the constant function; the density is normalized
    to integral 1 and the eigenvalue is the per-step mass growth factor
    (1 up to discretization error, by mass conservation).  Fourier matrices
    converge in the fiber C^1 norm; Ulam matrices in the cell sup norm.
    """
    if op.basis == "fourier":
        return _leading_fourier(op, tol, max_iter)
    if op.basis == "ulam":
        return _leading_ulam(op, tol, max_iter)
    raise ValueError(f"unknown basis {op.basis!r}")


def _leading_fourier(op, tol, max_iter):
    nc = op.trunc
    v = np.zeros(op.n, dtype=np.complex128)
    v[nc] = 1.0
    residual = np.inf
    for _ in range(max_iter):
        w = op.data @ v
        lam = w[nc]
        if abs(lam) < 1e-12:
            raise ConvergenceError("mass component vanished during power iteration")
        w = w / lam
        residual = FiberFunction(w - v).c1_norm()
        v = w
        if residual < tol:
            return complex(lam), FiberFunction(v)
    raise ConvergenceError(
        f"leading pair did not converge in {max_iter} iterations", residual
    )


def _leading_ulam(op, tol, max_iter):
    d = np.ones(op.n)
    residual = np.inf
    for _ in range(max_iter):
        w = op.data.T @ d
        lam = np.mean(w)
        if abs(lam) < 1e-12:
            raise ConvergenceError("mass vanished during power iteration")
        w = w / lam
        residual = float(np.max(np.abs(w - d)))
        d = w
        if residual < tol:
            return complex(lam), GridDensity(d)
    raise ConvergenceError(
        f"leading pair did not converge in {max_iter} iterations", residual
    )


def cesaro_projection(op, u, n):
    """Averaged iterates (1/n) sum_{k=1..n} L^k u (Fourier basis).

    Converges to the invariant density times the integral of u at rate
    O(1/n) plus the decaying transient.
    """
    if op.basis != "fourier":
        raise ValueError("cesaro_projection requires a Fourier-basis matrix")
    if n < 1:
        raise ValueError("n must be >= 1")
    v = u.resize(op.trunc).coeffs
    acc = np.zeros_like(v)
    for _ in range(n):
        v = op.data @ v
        acc += v
    return FiberFunction(acc / n)


def _power_pair(a, tol=1e-13, max_iter=10000):
    """Right/left dominant eigenvectors by power iteration; None on failure."""
    n = a.shape[0]
    out = []
    for mat in (a, a.conj().T):
        v = np.ones(n, dtype=a.dtype) / np.sqrt(n)
        ok = False
        for _ in range(max_iter):
            w = mat @ v
            norm = np.linalg.norm(w)
            if norm == 0.0:
                return None
            w = w / norm
            lam = np.vdot(w, mat @ w)
            if np.linalg.norm(mat @ w - lam * w) <= tol * max(1.0, abs(lam)):
                ok = True
                v = w
                break
            v = w
        if not ok:
            return None
        out.append(v)
    return out[0], out[1]


def subdominant_radius(op):
    """Largest eigenvalue modulus after removing the eigenvalue closest to 1.

    Dense eigensolve with a deflated-power guard: if the eighth power of
    the operator minus its leading rank-one part collapses below 1e-12,
    the deflated part is numerically nilpotent and 0 is returned (a dense
    QR eigensolve alone would report spurious values around eps^(1/chain)).
    Genuine subdominant radii below ~0.03 are indistinguishable from 0 at
    that resolution.
    """
    if op.n > MAX_DENSE_DIM:
        raise ValueError(f"dimension {op.n} exceeds dense eigensolve cap {MAX_DENSE_DIM}")
    a = op.dense().astype(np.complex128)
    vals = np.linalg.eigvals(a)
    # remove the eigenvalue closest to 1; ties drop the larger modulus first
    order = np.lexsort((-np.abs(vals), np.abs(vals - 1.0)))
    rest = np.delete(vals, order[0])
    candidate = float(np.max(np.abs(rest))) if rest.size else 0.0

    pair = _power_pair(a)
    if pair is not None:
        v, w = pair
        denom = np.vdot(w, v)
        if abs(denom) > 1e-12:
            lam1 = np.vdot(w, a @ v) / denom
            deflated = a - lam1 * np.outer(v, w.conj()) / denom
            d2 = deflated @ deflated
            d4 = d2 @ d2
            d8 = d4 @ d4
            scale = max(1.0, float(np.linalg.norm(a, 1)))
            if float(np.linalg.norm(d8, 1)) <= 1e-12 * scale:
                return 0.0
    return candidate


def decay_rate_upper(f, op, r=None, m_max=8, grid_n=256):
    """Operational upper bound for the correlation decay rate.

    Combines the discretized operator's subdominant radius with the
    expanding-constant bound on the essential spectral radius, which the
    matrix cannot see.
    """
    return max(subdominant_radius(op), expanding_constant(f, r=r, m_max=m_max,
                                                          grid_n=grid_n))
