"""Expanding circle maps given by degree-d lifts plus trigonometric polynomials.

A map f of the circle R/Z is represented through its lift

    F(x) = degree * x + offset + g(x),
    g(x) = sum_k [a_k sin(2 pi k x) + b_k cos(2 pi k x)] / (2 pi k),

so derivatives and inverse branches are available in closed form or by
bracketed Newton iteration.  The module also provides composition of maps
(with chain-rule derivatives and backward branch enumeration) and the
expanding-constant estimate used as an essential-spectral-radius bound.
"""

from dataclasses import dataclass
from functools import cached_property
import math
import warnings

import numpy as np

from ._kernels import DEFAULT_MAXIT, DEFAULT_TOL, TWO_PI, invert_lift

#: refuse backward branch enumerations beyond this many branches
MAX_BRANCHES = 2**20

#: grid used for validating expansion and estimating derivative extrema
DERIVATIVE_GRID = 4096


class NewtonConvergenceError(RuntimeError):
    """Branch inversion failed to reach tolerance; the map is likely invalid."""


class BranchLimitError(ValueError):
    """A branch enumeration would exceed MAX_BRANCHES."""


class WeakExpansionWarning(UserWarning):
    """Expanding-constant estimate came out >= 1 at the requested depth."""


@dataclass(frozen=True)
class CircleMap:
    """A smooth expanding map of the circle R/Z.

    Parameters
    ----------
    degree:
        Topological degree of the lift, an integer >= 2.
    fourier_coeffs:
        Tuples ``(k, a_k, b_k)`` with integer k >= 1 defining the periodic
        perturbation g above.
    r:
        Smoothness / observable-class parameter (> 1).  Observables live in
        C^{r-1}; the default r = 2 works with C^1 observables.
    offset:
        Constant added to the lift.  Used by additive noise; leaves the
        derivative untouched.
    """

    degree: int
    fourier_coeffs: tuple = ()
    r: float = 2.0
    offset: float = 0.0

    def __post_init__(self):
        coeffs = tuple(
            (int(k), float(a), float(b)) for (k, a, b) in self.fourier_coeffs
        )
        object.__setattr__(self, "fourier_coeffs", coeffs)
        if int(self.degree) != self.degree or self.degree < 2:
            raise ValueError(f"degree must be an integer >= 2, got {self.degree}")
        object.__setattr__(self, "degree", int(self.degree))
        if self.r <= 1:
            raise ValueError(f"r must be > 1, got {self.r}")
        for k, _, _ in coeffs:
            if k < 1:
                raise ValueError(f"coefficient index k must be >= 1, got {k}")
        if self.min_derivative() <= 1.0:
            raise ValueError(
                "map is not expanding: min F' = "
                f"{self.min_derivative():.6g} <= 1 on a {DERIVATIVE_GRID}-point grid"
            )

    @cached_property
    def _karr(self):
        return np.array([k for k, _, _ in self.fourier_coeffs], dtype=np.float64)

    @cached_property
    def _aarr(self):
        return np.array([a for _, a, _ in self.fourier_coeffs], dtype=np.float64)

    @cached_property
    def _barr(self):
        return np.array([b for _, _, b in self.fourier_coeffs], dtype=np.float64)

    def lift(self, x):
        """Evaluate the lift F at x (scalar or array)."""
        x = np.asarray(x, dtype=np.float64)
        out = self.degree * x + self.offset
        if self._karr.size:
            w = np.multiply.outer(x, TWO_PI * self._karr)
            out = out + (np.sin(w) @ (self._aarr / (TWO_PI * self._karr)))
            out = out + (np.cos(w) @ (self._barr / (TWO_PI * self._karr)))
        return out

    def __call__(self, x):
        """Evaluate the circle map: F(x) mod 1."""
        return np.mod(self.lift(x), 1.0)

    def derivative(self, x):
        """F'(x) = degree + sum_k [a_k cos(2 pi k x) - b_k sin(2 pi k x)]."""
        x = np.asarray(x, dtype=np.float64)
        out = np.full(x.shape, float(self.degree))
        if self._karr.size:
            w = np.multiply.outer(x, TWO_PI * self._karr)
            out = out + (np.cos(w) @ self._aarr) - (np.sin(w) @ self._barr)
        if out.ndim == 0:
            return float(out)
        return out

    def min_derivative(self, grid_n=DERIVATIVE_GRID):
        xs = np.arange(grid_n) / grid_n
        return float(np.min(self.derivative(xs)))

    def max_derivative(self, grid_n=DERIVATIVE_GRID):
        xs = np.arange(grid_n) / grid_n
        return float(np.max(self.derivative(xs)))

    def inverse_branches(self, x, tol=DEFAULT_TOL, maxit=DEFAULT_MAXIT):
        """All preimages of x under the circle map, one per monotone branch.

        For scalar x returns an ascending array of ``degree`` points y in
        [0, 1) with f(y) = x.  For an array of shape (n,) returns shape
        (degree, n).  Each point solves F(y) = x + j on its own branch
        window; residuals are below ``tol``.
        """
        x = np.asarray(x, dtype=np.float64)
        scalar = x.ndim == 0
        xs = np.atleast_1d(x)
        # the admissible integer shifts j satisfy F(0) <= x + j < F(0) + degree
        f0 = float(self.lift(0.0))
        j0 = np.ceil(f0 - xs)
        targets = xs[None, :] + j0[None, :] + np.arange(self.degree)[:, None]
        ys, ok = invert_lift(
            self.degree, self._karr, self._aarr, self._barr, self.offset,
            targets, tol=tol, maxit=maxit,
        )
        if not ok.all():
            worst = targets.ravel()[np.argmin(ok.ravel())]
            raise NewtonConvergenceError(
                f"branch inversion did not reach {tol:g} for target {worst!r}; "
                "the map may violate the expansion invariants"
            )
        if scalar:
            return ys[:, 0]
        return ys

    def iterate(self, x, n):
        """n-fold application of the circle map."""
        y = np.asarray(x, dtype=np.float64)
        for _ in range(n):
            y = self(y)
        return y

    def to_json_dict(self):
        d = {
            "degree": self.degree,
            "coeffs": [[k, a, b] for (k, a, b) in self.fourier_coeffs],
            "r": self.r,
        }
        if self.offset != 0.0:
            d["offset"] = self.offset
        return d

    @classmethod
    def from_json_dict(cls, d):
        return cls(
            degree=d["degree"],
            fourier_coeffs=tuple((k, a, b) for k, a, b in d.get("coeffs", [])),
            r=d.get("r", 2.0),
            offset=d.get("offset", 0.0),
        )


class ComposedMap:
    """Composition of circle maps in orbit order.

    ``compose([f1, f2, f3])`` evaluates x -> f3(f2(f1(x))): the last list
    element is applied last.  Derivatives use the chain rule; inverse
    branches are enumerated backward through the factors.
    """

    def __init__(self, maps):
        maps = tuple(maps)
        if not maps:
            raise ValueError("compose requires at least one map")
        self.maps = maps
        total = 1
        for f in maps:
            total *= f.degree
        self.degree = total
        self.r = maps[0].r

    def __call__(self, x):
        y = np.asarray(x, dtype=np.float64)
        for f in self.maps:
            y = f(y)
        return y

    def derivative(self, x):
        y = np.asarray(x, dtype=np.float64)
        out = np.ones(y.shape)
        for f in self.maps:
            out = out * f.derivative(y)
            y = f(y)
        if out.ndim == 0:
            return float(out)
        return out

    def inverse_branches(self, x):
        """All ``degree`` preimages of x under the composition.

        Scalar x gives shape (degree,); shape (n,) gives (degree, n).
        """
        if self.degree > MAX_BRANCHES:
            raise BranchLimitError(
                f"{self.degree} branches exceed the enumeration limit {MAX_BRANCHES}"
            )
        x = np.asarray(x, dtype=np.float64)
        scalar = x.ndim == 0
        xs = np.atleast_1d(x)
        cur = xs[None, :]
        for f in reversed(self.maps):
            cur = f.inverse_branches(cur.reshape(-1))
            cur = cur.reshape(-1, xs.size)
        if scalar:
            return np.sort(cur[:, 0])
        return cur


def compose(maps):
    """Compose circle maps in orbit order (last element applied last)."""
    return ComposedMap(maps)


def expanding_constant_profile(f, r=None, m_max=8, grid_n=256):
    """Per-depth estimates S_m^{1/m} of the expanding constant of f.

    S_m is the maximum over a grid of x of the m-step inverse-branch sum
    sum_{f^m(y)=x} |(f^m)'(y)|^{-(r+1)}, which in one dimension combines the
    inverse-branch derivative raised to r with the Jacobian weight.
    Returns an array of length m_max with entry m-1 holding S_m^{1/m}.
    """
    if r is None:
        r = f.r
    if m_max < 1:
        raise ValueError("m_max must be >= 1")
    if grid_n < 64:
        raise ValueError("grid_n must be >= 64")
    if f.degree**m_max > MAX_BRANCHES:
        raise BranchLimitError(
            f"degree^m_max = {f.degree**m_max} exceeds the branch limit {MAX_BRANCHES}"
        )
    xs = np.arange(grid_n) / grid_n
    level = xs[None, :]
    deriv_prod = np.ones_like(level)
    out = np.empty(m_max)
    power = -(r + 1.0)
    for m in range(1, m_max + 1):
        branches = level.shape[0]
        ys = f.inverse_branches(level.reshape(-1)).reshape(f.degree * branches, grid_n)
        dnew = f.derivative(ys.reshape(-1)).reshape(f.degree, branches, grid_n)
        deriv_prod = (dnew * deriv_prod[None, :, :]).reshape(f.degree * branches, grid_n)
        s_m = float(np.max(np.sum(np.abs(deriv_prod) ** power, axis=0)))
        out[m - 1] = s_m ** (1.0 / m)
        level = ys
    return out


def expanding_constant(f, r=None, m_max=8, grid_n=256):
    """Estimate the expanding constant of f for observable class r.

    The defining limsup over branch depths m is approximated conservatively
    by the maximum of S_m^{1/m} over the second half of the computed depths,
    m in {ceil(m_max/2), ..., m_max}.  For a valid expanding map the result
    is < 1; otherwise a WeakExpansionWarning is emitted.
    """
    profile = expanding_constant_profile(f, r=r, m_max=m_max, grid_n=grid_n)
    tail_start = math.ceil(m_max / 2)
    value = float(np.max(profile[tail_start - 1 :]))
    if value >= 1.0:
        warnings.warn(
            f"expanding-constant estimate {value:.6g} >= 1 at m_max={m_max}; "
            "the map is too weakly expanding for a reliable estimate",
            WeakExpansionWarning,
        )
    return value
