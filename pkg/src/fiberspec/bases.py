"""Base dynamics on the noise space and random observables over it.

Three variants are implemented, each with its scalar transfer operator
(the adjoint of composition with theta relative to the invariant measure P)
and the lift of that operator to fiber-function-valued observables:

* RotationBase: an invertible rotation, realized exactly as an index shift
  of the omega grid (the requested angle is snapped to the grid so that
  transfer and duality hold to machine precision).
* PiecewiseLinearBase: a full-branch piecewise-linear expanding map of
  [0, 1) (default: the doubling map) with invariant density p stored on the
  grid; the transfer operator is precomputed as a sparse interpolation
  matrix.
* ShiftBase: the one-sided Bernoulli shift over K symbols; observables are
  cylinder functions of a fixed word depth and the transfer operator
  averages over the prepended symbol, reducing the depth by one.

A RandomObservable stores one row of Fourier coefficients per
representation point (a single row for omega-constant observables, one per
grid point, or one per word).  Lifted transfer acts coefficient-wise, so
the pointwise compatibility with the scalar operator and the commutation
with linear functionals hold by construction.
"""

import numpy as np
import scipy.sparse as sp

from ._kernels import TWO_PI
from .fiber import FiberFunction


class RotationBase:
    """Rotation of the omega grid by round(alpha * grid) / grid.

    Ergodic but not mixing; the canonical invertible base.  Snapping the
    angle to the grid keeps the transfer operator an exact permutation.
    """

    variant = "rotation"

    def __init__(self, alpha, grid=256):
        if grid < 2:
            raise ValueError("grid must be >= 2")
        self.grid = int(grid)
        self.requested_alpha = float(alpha)
        self.shift = int(round(self.requested_alpha * self.grid)) % self.grid
        self.alpha = self.shift / self.grid

    @property
    def n_points(self):
        return self.grid

    def points(self):
        return np.arange(self.grid) / self.grid

    def weights(self):
        return np.full(self.grid, 1.0 / self.grid)

    def apply(self, omega):
        return np.mod(np.asarray(omega, dtype=np.float64) + self.alpha, 1.0)

    def transfer_values(self, values):
        """Scalar transfer: (l u)(omega) = u(theta^{-1} omega), an index shift."""
        return np.roll(np.asarray(values), self.shift, axis=0)

    def compose_with_theta(self, values):
        """Values of u o theta on the grid (used by duality checks)."""
        return np.roll(np.asarray(values), -self.shift, axis=0)

    def nearest_index(self, omega):
        return int(round(float(omega) * self.grid)) % self.grid

    def to_json_dict(self):
        return {"variant": "rotation", "alpha": self.alpha, "grid": self.grid}


class PiecewiseLinearBase:
    """Full-branch piecewise-linear expanding base map on [0, 1).

    Branch j has slope s_j > 1 on [c_j, c_{j+1}) with c_{j+1} - c_j = 1/s_j,
    mapping its domain onto [0, 1); every such map preserves Lebesgue
    measure, so the default invariant density is p = 1 exactly.  A custom
    grid density may be supplied; it must be positive and approximately
    fixed by the Lebesgue transfer operator.

    The scalar transfer matrix combines, for each branch, linear
    interpolation at the branch preimage with the weight p(preimage) /
    (slope * p(omega)).
    """

    variant = "piecewise"

    def __init__(self, slopes=(2.0, 2.0), grid=256, density=None, density_tol=1e-3):
        slopes = tuple(float(s) for s in slopes)
        if any(s <= 1.0 for s in slopes):
            raise ValueError("all branch slopes must exceed 1")
        widths = np.array([1.0 / s for s in slopes])
        if abs(widths.sum() - 1.0) > 1e-9:
            raise ValueError("branch widths 1/s_j must partition [0,1)")
        self.slopes = slopes
        self.grid = int(grid)
        self.breaks = np.concatenate([[0.0], np.cumsum(widths)])
        self.breaks[-1] = 1.0
        if density is None:
            self.density = np.ones(self.grid)
        else:
            self.density = np.asarray(density, dtype=np.float64).copy()
            if self.density.shape != (self.grid,):
                raise ValueError("density must be a grid-sized vector")
            if self.density.min() <= 1e-6:
                raise ValueError("density must be bounded away from 0 (min > 1e-6)")
            if abs(self.density.mean() - 1.0) > 1e-8:
                raise ValueError("density must integrate to 1")
        self._matrix_lebesgue = self._build_matrix(np.ones(self.grid))
        defect = np.max(np.abs(self._matrix_lebesgue @ self.density - self.density))
        if defect > density_tol:
            raise ValueError(
                f"density is not invariant under the Lebesgue transfer "
                f"operator: defect {defect:.3g} > {density_tol:g}"
            )
        if density is None:
            self._matrix = self._matrix_lebesgue
        else:
            inv_p = sp.diags(1.0 / self.density)
            self._matrix = (inv_p @ self._build_matrix(self.density)).tocsr()

    def _build_matrix(self, p):
        """Sparse matrix for u -> sum_j (u * p / s_j) o theta_j^{-1}."""
        g = self.grid
        omegas = np.arange(g) / g
        rows, cols, vals = [], [], []
        for j, s in enumerate(self.slopes):
            y = self.breaks[j] + omegas / s
            scaled = y * g
            idx = np.floor(scaled).astype(np.int64) % g
            frac = scaled - np.floor(scaled)
            rows.append(np.arange(g))
            cols.append(idx)
            vals.append((1.0 - frac) * p[idx] / s)
            rows.append(np.arange(g))
            cols.append((idx + 1) % g)
            vals.append(frac * p[(idx + 1) % g] / s)
        mat = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(g, g),
        )
        return mat.tocsr()

    @property
    def n_points(self):
        return self.grid

    def points(self):
        return np.arange(self.grid) / self.grid

    def weights(self):
        w = self.density / self.density.sum()
        return w

    def apply(self, omega):
        omega = np.asarray(omega, dtype=np.float64)
        j = np.clip(np.searchsorted(self.breaks, omega, side="right") - 1, 0,
                    len(self.slopes) - 1)
        slopes = np.asarray(self.slopes)
        out = np.mod((omega - self.breaks[j]) * slopes[j], 1.0)
        if out.ndim == 0:
            return float(out)
        return out

    def transfer_values(self, values):
        return self._matrix @ np.asarray(values)

    def compose_with_theta(self, values):
        """u o theta on the grid, by linear interpolation at theta(omega_i)."""
        values = np.asarray(values)
        y = self.apply(self.points())
        scaled = y * self.grid
        idx = np.floor(scaled).astype(np.int64) % self.grid
        frac = scaled - np.floor(scaled)
        if values.ndim == 1:
            return (1.0 - frac) * values[idx] + frac * values[(idx + 1) % self.grid]
        return ((1.0 - frac)[:, None] * values[idx]
                + frac[:, None] * values[(idx + 1) % self.grid])

    def nearest_index(self, omega):
        return int(round(float(omega) * self.grid)) % self.grid

    def to_json_dict(self):
        if self.slopes == (2.0, 2.0):
            return {"variant": "piecewise_doubling", "grid": self.grid}
        return {"variant": "piecewise", "slopes": list(self.slopes), "grid": self.grid}


class ShiftBase:
    """One-sided Bernoulli shift over symbols {0, .., K-1} with weights p."""

    variant = "shift"

    def __init__(self, p=(0.5, 0.5)):
        p = np.asarray(p, dtype=np.float64)
        if p.ndim != 1 or p.size < 2:
            raise ValueError("p must be a probability vector over >= 2 symbols")
        if np.any(p <= 0.0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("p must be strictly positive and sum to 1")
        self.p = p

    @property
    def alphabet(self):
        return self.p.size

    def n_words(self, depth):
        return self.alphabet**depth

    def apply(self, word):
        word = tuple(word)
        if not word:
            raise ValueError("cannot shift an empty symbol word")
        return word[1:]

    def word_index(self, word, depth=None):
        """Flat index of a word; first symbol is most significant."""
        word = tuple(word)
        if depth is None:
            depth = len(word)
        if len(word) < depth:
            word = word + (0,) * (depth - len(word))
        idx = 0
        for s in word[:depth]:
            if not 0 <= s < self.alphabet:
                raise ValueError(f"symbol {s} outside alphabet")
            idx = idx * self.alphabet + s
        return idx

    def word_from_index(self, idx, depth):
        out = []
        for _ in range(depth):
            out.append(idx % self.alphabet)
            idx //= self.alphabet
        return tuple(reversed(out))

    def first_symbols(self, depth):
        """First symbol of every word of the given depth, in index order."""
        return np.arange(self.n_words(depth)) // self.n_words(depth - 1)

    def weights(self, depth):
        w = np.ones(1)
        for _ in range(depth):
            w = np.multiply.outer(w, self.p).reshape(-1)
        return w

    def transfer_values(self, values):
        """(l u)(w) = sum_a p_a u(a w); output depth shrinks by one."""
        values = np.asarray(values)
        if values.shape[0] < self.alphabet or values.shape[0] % self.alphabet:
            raise ValueError("values length must be K^d with d >= 1")
        resh = values.reshape(self.alphabet, -1, *values.shape[1:])
        return np.tensordot(self.p, resh, axes=(0, 0))

    def compose_with_theta(self, values):
        """u o theta as a function of one more leading symbol."""
        values = np.asarray(values)
        reps = self.alphabet
        return np.repeat(values[None, ...], reps, axis=0).reshape(
            reps * values.shape[0], *values.shape[1:]
        )

    def to_json_dict(self):
        return {"variant": "shift", "p": [float(x) for x in self.p]}


def base_from_json_dict(d):
    variant = d.get("variant")
    if variant == "rotation":
        return RotationBase(d["alpha"], grid=d.get("grid", 256))
    if variant == "piecewise_doubling":
        return PiecewiseLinearBase((2.0, 2.0), grid=d.get("grid", 256))
    if variant == "piecewise":
        return PiecewiseLinearBase(tuple(d["slopes"]), grid=d.get("grid", 256))
    if variant == "shift":
        return ShiftBase(tuple(d.get("p", (0.5, 0.5))))
    raise ValueError(f"unknown base variant {variant!r}")


class RandomObservable:
    """A measurable family omega -> FiberFunction, stored per representation.

    ``kind`` is "constant" (independent of omega), "grid" (one fiber per
    omega grid point), or "cylinder" (one fiber per word of a fixed depth).
    ``coeffs`` has one Fourier coefficient row per fiber; ``weights`` holds
    the P-measure of each representation point.
    """

    def __init__(self, kind, coeffs, weights, depth=0, alphabet=0):
        coeffs = np.asarray(coeffs, dtype=np.complex128)
        if coeffs.ndim != 2 or coeffs.shape[1] % 2 != 1:
            raise ValueError("coeffs must have shape (fibers, 2N+1)")
        self.kind = kind
        self.coeffs = coeffs
        self.weights = np.asarray(weights, dtype=np.float64)
        if self.weights.shape != (coeffs.shape[0],):
            raise ValueError("weights must have one entry per fiber")
        self.depth = int(depth)
        self.alphabet = int(alphabet)

    @classmethod
    def constant(cls, u):
        return cls("constant", u.coeffs[None, :], np.ones(1))

    @classmethod
    def on_grid(cls, base, fibers):
        coeffs = np.vstack([f.coeffs for f in fibers])
        if coeffs.shape[0] != base.n_points:
            raise ValueError("need one fiber per grid point")
        return cls("grid", coeffs, base.weights())

    @classmethod
    def from_grid_function(cls, base, fn, trunc):
        """fn(omega) -> FiberFunction sampled at every grid point."""
        fibers = [fn(w).resize(trunc) for w in base.points()]
        return cls.on_grid(base, fibers)

    @classmethod
    def on_words(cls, base, depth, fibers):
        coeffs = np.vstack([f.coeffs for f in fibers])
        if coeffs.shape[0] != base.n_words(depth):
            raise ValueError("need one fiber per word")
        return cls("cylinder", coeffs, base.weights(depth), depth=depth,
                   alphabet=base.alphabet)

    @classmethod
    def from_word_function(cls, base, depth, fn, trunc):
        fibers = [
            fn(base.word_from_index(i, depth)).resize(trunc)
            for i in range(base.n_words(depth))
        ]
        return cls.on_words(base, depth, fibers)

    @property
    def trunc(self):
        return (self.coeffs.shape[1] - 1) // 2

    @property
    def n_fibers(self):
        return self.coeffs.shape[0]

    def fiber(self, i):
        return FiberFunction(self.coeffs[i])

    def fiber_integrals(self):
        return self.coeffs[:, self.trunc].copy()

    def common_integral(self):
        return complex(np.dot(self.weights, self.fiber_integrals()))

    def fiber_c1_norms(self, oversample=4):
        n = self.trunc
        m = max(oversample * max(n, 1), 64)
        ks = np.arange(-n, n + 1)
        spec = np.zeros((self.n_fibers, m), dtype=np.complex128)
        spec[:, ks % m] = self.coeffs
        vals = np.fft.ifft(spec, axis=1) * m
        spec[:, ks % m] = self.coeffs * (1j * TWO_PI * ks)
        dvals = np.fft.ifft(spec, axis=1) * m
        return np.max(np.abs(vals), axis=1) + np.max(np.abs(dvals), axis=1)

    def linf_norm(self):
        """ess-sup of the fiber C^1 norms, as a max over the representation."""
        return float(np.max(self.fiber_c1_norms()))

    def replace_coeffs(self, coeffs):
        return RandomObservable(self.kind, coeffs, self.weights, self.depth,
                                self.alphabet)

    def pad_cylinder(self, depth, base):
        """Lift to a deeper cylinder by ignoring the extra trailing symbols."""
        if self.kind != "cylinder":
            raise ValueError("pad_cylinder requires a cylinder observable")
        if depth < self.depth:
            raise ValueError("target depth is shallower than current depth")
        if depth == self.depth:
            return self
        reps = base.alphabet ** (depth - self.depth)
        coeffs = np.repeat(self.coeffs, reps, axis=0)
        return RandomObservable("cylinder", coeffs, base.weights(depth),
                                depth=depth, alphabet=base.alphabet)

    def expand(self, base, depth=None):
        """Materialize a constant observable on the base's representation."""
        if self.kind != "constant":
            return self
        if isinstance(base, ShiftBase):
            if depth is None:
                raise ValueError("expanding on a shift base needs a depth")
            coeffs = np.repeat(self.coeffs, base.n_words(depth), axis=0)
            return RandomObservable("cylinder", coeffs, base.weights(depth),
                                    depth=depth, alphabet=base.alphabet)
        coeffs = np.repeat(self.coeffs, base.n_points, axis=0)
        return RandomObservable("grid", coeffs, base.weights())

    def __sub__(self, other):
        if self.kind != other.kind or self.coeffs.shape != other.coeffs.shape:
            raise ValueError("representation mismatch")
        return self.replace_coeffs(self.coeffs - other.coeffs)

    def __add__(self, other):
        if self.kind != other.kind or self.coeffs.shape != other.coeffs.shape:
            raise ValueError("representation mismatch")
        return self.replace_coeffs(self.coeffs + other.coeffs)

    def __mul__(self, scalar):
        return self.replace_coeffs(self.coeffs * scalar)

    __rmul__ = __mul__


def base_apply(base, omega):
    """Advance a base point by one step of theta."""
    return base.apply(omega)


def base_transfer(base, values):
    """Scalar transfer operator on representation values."""
    return base.transfer_values(np.asarray(values))


def base_lift_transfer(base, u_obs):
    """Lifted transfer on random observables, applied coefficient-wise.

    Constant observables pass through unchanged (the transfer operator
    fixes constants); grid observables transform by the base's scalar
    matrix; cylinder observables lose one symbol of depth.
    """
    if u_obs.kind == "constant":
        return u_obs
    if u_obs.kind == "cylinder":
        if not isinstance(base, ShiftBase):
            raise ValueError("cylinder observables require a shift base")
        if u_obs.depth < 1:
            raise ValueError("cannot apply the shift transfer at depth 0")
        coeffs = base.transfer_values(u_obs.coeffs)
        return RandomObservable("cylinder", coeffs, base.weights(u_obs.depth - 1),
                                depth=u_obs.depth - 1, alphabet=base.alphabet)
    if isinstance(base, ShiftBase):
        raise ValueError("grid observables do not match a shift base")
    if u_obs.n_fibers != base.n_points:
        raise ValueError("observable grid does not match the base grid")
    coeffs = base.transfer_values(u_obs.coeffs)
    return RandomObservable("grid", coeffs, base.weights())


def kp_defect(u_obs):
    """Deviation of the fiber integrals from their common value.

    Zero (up to representation) exactly when the observable lies in the
    constant-integral subspace preserved by the skew transfer operator.
    """
    integrals = u_obs.fiber_integrals()
    mean = np.dot(u_obs.weights, integrals)
    return float(np.max(np.abs(integrals - mean)))
