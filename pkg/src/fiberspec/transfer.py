"""Discretizations of the fiber transfer operator L(f).

Two unrelated discretizations are kept so they can catch each other's bugs:

* Fourier collocation: column k of the matrix holds the Fourier
  coefficients of L(e_k), computed from branch sums on a 4N collocation
  grid.  Spectrally accurate for smooth maps; this is the production path.
* Ulam: the row-stochastic matrix P_ij = m(I_i intersect f^{-1} I_j) / m(I_i)
  over a uniform partition, assembled from exact per-branch interval
  preimages.  Kept solely as an independent oracle.

The matrices only see the point spectrum of the smooth restriction; the
essential spectral radius must come from maps.expanding_constant, never
from matrix eigenvalues.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from ._kernels import TWO_PI
from .fiber import FiberFunction
from .maps import CircleMap

#: default quadrature resolution for integrals of non-band-limited products
QUAD_POINTS = 4096


@dataclass
class OperatorMatrix:
    """A discretized transfer operator with basis metadata.

    ``data`` is a dense complex (2N+1)x(2N+1) array for the Fourier basis
    (acting on coefficient vectors) and a sparse row-stochastic CSR matrix
    for the Ulam basis (cell densities evolve by ``data.T @ values``).
    """

    basis: str
    n: int
    data: object
    trunc: int = None

    def apply_fiber(self, u):
        """Apply to a FiberFunction (Fourier basis only)."""
        if self.basis != "fourier":
            raise ValueError("apply_fiber requires a Fourier-basis matrix")
        if u.trunc != self.trunc:
            u = u.resize(self.trunc)
        return FiberFunction(self.data @ u.coeffs)

    def apply_density(self, values):
        """Push forward a cell-density vector (Ulam basis only)."""
        if self.basis != "ulam":
            raise ValueError("apply_density requires an Ulam-basis matrix")
        return self.data.T @ values

    def dense(self):
        if sp.issparse(self.data):
            return self.data.toarray()
        return np.asarray(self.data)

    def to_json_dict(self):
        """Debug export; row-major entries (complex as [re, im])."""
        dense = self.dense()
        if np.iscomplexobj(dense):
            data = [[[float(z.real), float(z.imag)] for z in row] for row in dense]
        else:
            data = [[float(z) for z in row] for row in dense]
        return {"basis": self.basis, "n": self.n, "data": data}


class GridDensity:
    """Piecewise-constant density on n uniform cells (Ulam-basis output)."""

    def __init__(self, values):
        self.values = np.asarray(values, dtype=np.float64)

    @property
    def n(self):
        return self.values.size

    def evaluate(self, x):
        idx = np.floor(np.asarray(x, dtype=np.float64) * self.n).astype(np.int64) % self.n
        return self.values[idx]

    def integral(self):
        return float(np.mean(self.values))

    def sup_norm(self):
        return float(np.max(np.abs(self.values)))


def transfer_apply_exact(f, u, x):
    """Pointwise branch sum (L u)(x) = sum_{f(y)=x} u(y) / |det Df(y)|."""
    x = np.asarray(x, dtype=np.float64)
    scalar = x.ndim == 0
    ys = f.inverse_branches(np.atleast_1d(x))
    weights = 1.0 / np.abs(f.derivative(ys))
    vals = u.evaluate(ys.reshape(-1)).reshape(ys.shape)
    out = np.sum(weights * vals, axis=0)
    if scalar:
        return complex(out[0])
    return out


def assemble_fourier(f, trunc):
    """Fourier-collocation matrix of L(f) on modes |k| <= trunc.

    Column k holds the coefficients of L(e_k), recovered by the discrete
    transform of branch-sum values on a 4N collocation grid.  For the
    plain doubling map this reproduces mode halving: L e_k = e_{k/2} for
    even k, 0 for odd k.
    """
    if trunc < 8:
        raise ValueError("trunc must be >= 8")
    m = 4 * trunc
    xs = np.arange(m) / m
    ys = f.inverse_branches(xs)
    weights = 1.0 / np.abs(f.derivative(ys))
    ks = np.arange(-trunc, trunc + 1)
    phases = np.exp(1j * TWO_PI * np.multiply.outer(ys, ks))
    values = np.einsum("bm,bmk->mk", weights, phases)
    cols = np.fft.fft(values, axis=0) / m
    mat = cols[ks % m, :]
    return OperatorMatrix("fourier", 2 * trunc + 1, mat, trunc)


def assemble_ulam(f, n):
    """Ulam matrix P_ij = m(I_i intersect f^{-1} I_j) / m(I_i), sparse CSR.

    Column preimages are unions of per-branch intervals whose endpoints are
    the branch inverses of the cell endpoints; each interval is shorter
    than one cell (the map expands), so it meets at most two rows.  Rows
    sum to 1 up to accumulated rounding.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    f0 = float(f.lift(0.0))
    f1 = f0 + f.degree
    endpoints = np.arange(n + 1) / n

    lo_list, hi_list, col_list = [], [], []
    for t in range(int(np.floor(f0)), int(np.floor(f0)) + f.degree + 1):
        targets = np.clip(t + endpoints, f0, f1)
        ys = _invert_targets(f, targets)
        # exact global edges: F(0) = f0 and F(1) = f1
        ys[targets == f0] = 0.0
        ys[targets == f1] = 1.0
        lo, hi = ys[:-1], ys[1:]
        keep = hi > lo
        lo_list.append(lo[keep])
        hi_list.append(hi[keep])
        col_list.append(np.nonzero(keep)[0])

    lo = np.concatenate(lo_list)
    hi = np.concatenate(hi_list)
    col = np.concatenate(col_list)

    i0 = np.clip(np.floor(lo * n).astype(np.int64), 0, n - 1)
    i1 = np.clip(np.ceil(hi * n).astype(np.int64) - 1, 0, n - 1)
    i1 = np.maximum(i1, i0)
    single = i1 <= i0
    split = ~single
    bnd = (i0[split] + 1) / n

    rows = np.concatenate([i0[single], i0[split], i1[split]])
    cols_out = np.concatenate([col[single], col[split], col[split]])
    vals = np.concatenate([
        (hi[single] - lo[single]) * n,
        (bnd - lo[split]) * n,
        (hi[split] - bnd) * n,
    ])
    mat = sp.coo_matrix((vals, (rows, cols_out)), shape=(n, n)).tocsr()
    return OperatorMatrix("ulam", n, mat)


def _invert_targets(f, targets):
    from ._kernels import invert_lift
    from .maps import NewtonConvergenceError

    ys, ok = invert_lift(f.degree, f._karr, f._aarr, f._barr, f.offset, targets)
    if not ok.all():
        raise NewtonConvergenceError("Ulam endpoint inversion failed")
    return ys


@lru_cache(maxsize=16)
def _quad_branch_data(f: CircleMap, quad_n: int):
    xs = np.arange(quad_n) / quad_n
    ys = f.inverse_branches(xs)
    weights = 1.0 / np.abs(f.derivative(ys))
    fx = f(xs)
    return xs, ys, weights, fx


def duality_residual(f, phi, u, quad_n=QUAD_POINTS):
    """|int phi * (L u) dm  -  int (phi o f) * u dm| by trapezoid quadrature.

    The change-of-variables identity makes the two sides equal; the residual
    measures branch-inversion and quadrature error only.  The uniform-grid
    trapezoid rule is exact for trigonometric polynomials below the Nyquist
    limit of ``quad_n``.
    """
    if isinstance(f, CircleMap):
        xs, ys, weights, fx = _quad_branch_data(f, quad_n)
    else:
        xs = np.arange(quad_n) / quad_n
        ys = f.inverse_branches(xs)
        weights = 1.0 / np.abs(f.derivative(ys))
        fx = f(xs)
    lu = np.sum(weights * u.evaluate(ys.reshape(-1)).reshape(ys.shape), axis=0)
    lhs = np.mean(phi.evaluate(xs) * lu)
    rhs = np.mean(phi.evaluate(fx) * u.evaluate(xs))
    return float(abs(lhs - rhs))


def c1_norm_bound_estimate(f, trials, trunc=64, band=16, seed=1234):
    """Empirical bound on c1_norm(L u) / c1_norm(u) over random trig u.

    Gives an observed stand-in for the norm constant in the weak
    Lasota-Yorke bound; for linear maps the ratio never exceeds 1 because
    branch averaging keeps sup|u| and halves sup|u'|.
    """
    if trials < 10:
        raise ValueError("trials must be >= 10")
    op = assemble_fourier(f, trunc)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        terms = [
            (k, rng.standard_normal(), rng.standard_normal())
            for k in range(1, band + 1)
        ]
        u = FiberFunction.from_real_coeffs(terms, trunc, const=rng.standard_normal())
        ratio = op.apply_fiber(u).c1_norm() / u.c1_norm()
        worst = max(worst, ratio)
    return worst
