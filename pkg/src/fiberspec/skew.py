"""Noise families over a base system and the skew-product transfer operator.

A RandomMapFamily perturbs a fixed expanding circle map fiberwise:

* additive noise shifts the lift by epsilon * s(omega), leaving the
  derivative (and hence every expansion property) untouched;
* parametric noise perturbs one trigonometric coefficient of the lift by
  epsilon * s(omega).

The noise profile s maps the base point to [-1, 1]: cos(2 pi omega) on
grid bases, a per-symbol level table on shift bases.  The admissible noise
range is explicit: construction rejects epsilon >= epsilon_max, where
epsilon_max keeps every fiber map expanding.

SkewOperator realizes one application of the skew transfer operator
(fiberwise Fourier apply with the fiber's own matrix, then the lifted base
transfer).  On shift bases one application shortens cylinder depth by one;
``apply_fixed`` restores the depth by duplication, which is exact because
the noise reads only the leading symbol.
"""

import dataclasses
import math

import numpy as np

from ._kernels import TWO_PI
from .bases import RandomObservable, ShiftBase, base_lift_transfer
from .fiber import FiberFunction
from .maps import CircleMap, compose
from .spectral import ConvergenceError
from .transfer import assemble_fourier


class DensityError(RuntimeError):
    """The computed invariant density violates positivity or mass contracts."""


@dataclasses.dataclass(frozen=True)
class RandomMapFamily:
    """A family of fiber maps f_eps(omega) around a central map f0."""

    f0: CircleMap
    noise_kind: str
    epsilon: float
    coeff_index: int = 0
    profile: str = "cosine"
    levels: tuple = (1.0, -1.0)

    def __post_init__(self):
        if self.noise_kind not in ("additive", "parametric"):
            raise ValueError(f"unknown noise kind {self.noise_kind!r}")
        if self.profile not in ("cosine", "levels"):
            raise ValueError(f"unknown noise profile {self.profile!r}")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        levels = tuple(float(v) for v in self.levels)
        object.__setattr__(self, "levels", levels)
        if any(abs(v) > 1.0 for v in levels):
            raise ValueError("noise levels must lie in [-1, 1]")
        if self.noise_kind == "parametric":
            if not self.f0.fourier_coeffs:
                raise ValueError("parametric noise needs a coefficient to perturb")
            if not 0 <= self.coeff_index < len(self.f0.fourier_coeffs):
                raise ValueError("coeff_index out of range")
        if self.epsilon >= self.epsilon_max:
            raise ValueError(
                f"epsilon {self.epsilon} >= admissible bound {self.epsilon_max:.6g}"
            )

    @property
    def epsilon_max(self):
        """Largest admissible noise level keeping every fiber expanding.

        Additive noise never changes the derivative.  Parametric noise on
        coefficient (k, a, b) changes F' by at most epsilon in sup norm, so
        expansion survives below min F' - 1.
        """
        if self.noise_kind == "additive":
            return math.inf
        return self.f0.min_derivative() - 1.0

    def lip_bound(self):
        """Closed-form Lipschitz constant: sup_omega d_C2(f_eps(omega), f0) <= Lip * eps.

        The C^2 distance is taken as the sum of the sup norms of the value
        and first two derivatives of the lift difference.
        """
        if self.noise_kind == "additive":
            return 1.0
        k = self.f0.fourier_coeffs[self.coeff_index][0]
        return 1.0 / (TWO_PI * k) + 1.0 + TWO_PI * k

    def s_value(self, omega):
        """Noise profile s(omega) in [-1, 1]."""
        if self.profile == "cosine":
            return float(np.cos(TWO_PI * float(omega)))
        word = tuple(omega)
        if not word:
            raise ValueError("shift noise needs at least one symbol")
        return self.levels[word[0]]

    def map_for_s(self, s):
        """The fiber map corresponding to a concrete noise value s."""
        if self.epsilon == 0.0:
            return self.f0
        if self.noise_kind == "additive":
            return dataclasses.replace(self.f0, offset=self.f0.offset + self.epsilon * s)
        k, a, b = self.f0.fourier_coeffs[self.coeff_index]
        coeffs = list(self.f0.fourier_coeffs)
        coeffs[self.coeff_index] = (k, a + self.epsilon * s, b)
        return dataclasses.replace(self.f0, fourier_coeffs=tuple(coeffs))

    def fiber_map(self, omega):
        """The concrete CircleMap acting on the fiber over omega."""
        return self.map_for_s(self.s_value(omega))

    def s_values_for(self, base, depth=None):
        """Noise values at every representation point of the base."""
        if isinstance(base, ShiftBase):
            if self.profile != "levels":
                raise ValueError("shift bases use the per-symbol level profile")
            if len(self.levels) != base.alphabet:
                raise ValueError("level table size must match the alphabet")
            if depth is None:
                raise ValueError("cylinder representation needs a depth")
            levels = np.asarray(self.levels)
            return levels[base.first_symbols(depth)]
        if self.profile != "cosine":
            raise ValueError("grid bases use the cosine profile")
        return np.cos(TWO_PI * base.points())

    def to_json_dict(self):
        d = {
            "f0": self.f0.to_json_dict(),
            "noise_kind": self.noise_kind,
            "epsilon": self.epsilon,
            "s_profile": {"kind": self.profile, "levels": list(self.levels)},
        }
        if self.noise_kind == "parametric":
            d["coeff_index"] = self.coeff_index
        return d

    @classmethod
    def from_json_dict(cls, d):
        prof = d.get("s_profile", {})
        return cls(
            f0=CircleMap.from_json_dict(d["f0"]),
            noise_kind=d["noise_kind"],
            epsilon=d["epsilon"],
            coeff_index=d.get("coeff_index", 0),
            profile=prof.get("kind", "cosine"),
            levels=tuple(prof.get("levels", (1.0, -1.0))),
        )


def fiber_compose_n(fam, base, omega, n):
    """The n-step fiber map along the base orbit of omega.

    Composes f(omega), f(theta omega), ..., f(theta^{n-1} omega) in orbit
    order, so evaluation matches n applications of the skew product.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    maps = []
    point = omega
    for _ in range(n):
        maps.append(fam.fiber_map(point))
        point = base.apply(point)
    return compose(maps)


class SkewOperator:
    """One application of the skew transfer operator at fixed truncation.

    Precomputes the Fourier matrix of every distinct fiber map; apply()
    multiplies each fiber by its own matrix and then runs the lifted base
    transfer.  Distinct fibers share matrices whenever the noise profile
    repeats values (always on shift bases, where only the alphabet matters).
    """

    def __init__(self, fam, base, trunc=64, depth=6):
        self.fam = fam
        self.base = base
        self.trunc = trunc
        self.is_shift = isinstance(base, ShiftBase)
        self.depth = depth if self.is_shift else None
        if self.is_shift:
            if fam.profile != "levels" or len(fam.levels) != base.alphabet:
                raise ValueError("shift bases need one noise level per symbol")
            # s depends only on the leading symbol: one matrix per symbol
            self._symbol_mats = np.stack(
                [assemble_fourier(fam.map_for_s(s), trunc).data for s in fam.levels]
            )
            self._mats = None
        else:
            svals = fam.s_values_for(base)
            unique, inverse = np.unique(svals, return_inverse=True)
            mats = np.stack(
                [assemble_fourier(fam.map_for_s(s), trunc).data for s in unique]
            )
            if unique.size == 1:
                self._mats = np.broadcast_to(mats[0], (svals.size, *mats[0].shape))
            else:
                self._mats = mats[inverse]
            self._symbol_mats = None

    def _expand(self, u_obs):
        if u_obs.kind == "constant":
            return u_obs.expand(self.base, depth=self.depth)
        return u_obs

    def apply(self, u_obs):
        """Fiberwise transfer then lifted base transfer.

        On shift bases the cylinder depth decreases by one; the fiber
        matrices are indexed by each word's leading symbol.
        """
        u_obs = self._expand(u_obs)
        if u_obs.trunc != self.trunc:
            raise ValueError("observable truncation does not match the operator")
        if self.is_shift:
            if u_obs.kind != "cylinder":
                raise ValueError("shift operator needs cylinder observables")
            mats = self._symbol_mats[self.base.first_symbols(u_obs.depth)]
        else:
            if u_obs.n_fibers != self.base.n_points:
                raise ValueError("observable does not match the base grid")
            mats = self._mats
        pushed = np.einsum("fij,fj->fi", mats, u_obs.coeffs)
        return base_lift_transfer(self.base, u_obs.replace_coeffs(pushed))

    def apply_fixed(self, u_obs):
        """apply(), then restore the cylinder depth by trailing duplication."""
        u_obs = self._expand(u_obs)
        target_depth = u_obs.depth
        out = self.apply(u_obs)
        if self.is_shift:
            out = out.pad_cylinder(target_depth, self.base)
        return out


def skew_apply(fam, base, u_obs, depth=6):
    """One application of the skew transfer operator.

    Builds the fiber matrices on the fly; hold a SkewOperator instead when
    iterating.
    """
    trunc = u_obs.trunc
    op = SkewOperator(fam, base, trunc=trunc,
                      depth=(u_obs.depth if u_obs.kind == "cylinder" else depth))
    return op.apply(u_obs)


def skew_fixed_density(fam, base, tol=1e-12, trunc=64, depth=6, max_iter=10000):
    """Invariant density of the skew product and its leading factor.

    Power iteration of the skew operator from the constant function 1,
    renormalized each step so the common fiber integral is 1.  Returns
    (rho, lambda_bar); lambda_bar must come out 1 within 10 * tol, the
    density must be fiberwise positive, and cylinder depth is maintained
    by exact re-padding.
    """
    op = SkewOperator(fam, base, trunc=trunc, depth=depth)
    u_obs = RandomObservable.constant(FiberFunction.constant(1.0, trunc))
    u_obs = op._expand(u_obs)
    lam = 1.0
    for _ in range(max_iter):
        v_obs = op.apply_fixed(u_obs)
        integrals = v_obs.fiber_integrals()
        lam = complex(np.dot(v_obs.weights, integrals)).real
        if abs(lam) < 1e-12:
            raise ConvergenceError("fiber mass vanished during the solve")
        v_obs = v_obs * (1.0 / lam)
        residual = float(np.max((v_obs - u_obs).fiber_c1_norms()))
        u_obs = v_obs
        if residual < tol:
            break
    else:
        raise ConvergenceError(
            f"fixed density did not converge in {max_iter} iterations", residual
        )
    if abs(lam - 1.0) > 10.0 * tol:
        raise DensityError(f"leading factor {lam} deviates from 1 beyond 10*tol")
    _check_positive(u_obs)
    return u_obs, lam


def _check_positive(u_obs, floor=-1e-8):
    n = u_obs.trunc
    m = 4 * max(n, 1)
    ks = np.arange(-n, n + 1)
    spec = np.zeros((u_obs.n_fibers, m), dtype=np.complex128)
    spec[:, ks % m] = u_obs.coeffs
    vals = np.fft.ifft(spec, axis=1) * m
    if float(np.max(np.abs(vals.imag))) > 1e-8:
        raise DensityError("density has a non-negligible imaginary part")
    worst = float(np.min(vals.real))
    if worst < floor:
        raise DensityError(f"density dips to {worst:.3g}; discretization invalid")


def skew_apply_n_direct(fam, base, u_obs, n, depth=6):
    """n-step skew transfer via composed fiber maps (consistency oracle).

    Computes the lifted base transfer applied n times to the field
    omega -> L(f^(n)(omega)) u(omega); must agree with n single steps.
    Intended for small n on coarse representations.
    """
    if u_obs.kind == "constant":
        u_obs = u_obs.expand(base, depth=depth)
    trunc = u_obs.trunc
    out = np.empty_like(u_obs.coeffs)
    if isinstance(base, ShiftBase):
        d = u_obs.depth
        if d < n:
            raise ValueError("cylinder depth too shallow for the requested n")
        for i in range(u_obs.n_fibers):
            word = base.word_from_index(i, d)
            composed = fiber_compose_n(fam, base, word, n)
            mat = assemble_fourier(composed, trunc)
            out[i] = mat.apply_fiber(u_obs.fiber(i)).coeffs
    else:
        pts = base.points()
        for i in range(u_obs.n_fibers):
            composed = fiber_compose_n(fam, base, pts[i], n)
            mat = assemble_fourier(composed, trunc)
            out[i] = mat.apply_fiber(u_obs.fiber(i)).coeffs
    result = u_obs.replace_coeffs(out)
    for _ in range(n):
        result = base_lift_transfer(base, result)
    return result
