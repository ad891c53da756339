"""Backward and integrated fiber correlations, with decay-rate fitting.

Correlation sequences are computed through the spectral rewriting: project
the observable onto the complement of the invariant density, iterate the
skew transfer operator, and pair against the test function fiberwise.
Rates are least-squares fits of log |value| against the step count; rates
are never read off matrix eigenvalues because the essential spectrum is
invisible to the discretization.
"""

import numpy as np

from .bases import ShiftBase, kp_defect
from .skew import SkewOperator, fiber_compose_n
from .transfer import QUAD_POINTS

#: hide sequence entries at or below this size from rate fits
FIT_FLOOR = 1e-12


def project_out_density(u, rho):
    """Fiberwise projection u - rho(omega) * integral(u) as an observable."""
    u = u.resize(rho.trunc)
    iu = u.integral()
    return rho.replace_coeffs(u.coeffs[None, :] - rho.coeffs * iu)


def _pairing_vector(phi, trunc):
    """Row vector turning coefficient rows into integrals against phi."""
    return phi.resize(trunc).coeffs[::-1].copy()


def backward_corr_all(fam, base, rho, phi, u, n_max, depth=6):
    """Backward correlation sequences at every representation point.

    Returns an array of shape (n_max, fibers); column j holds the sequence
    evaluated at representation point j.  Entry (n-1, j) is the integral of
    phi against the n-fold skew image of the density-projected observable.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    if rho.kind == "constant":
        rho = rho.expand(base, depth=depth)
    op = SkewOperator(fam, base, trunc=rho.trunc,
                      depth=rho.depth if rho.kind == "cylinder" else depth)
    v = project_out_density(u, rho)
    pair_vec = _pairing_vector(phi, rho.trunc)
    out = np.empty((n_max, rho.n_fibers))
    for n in range(1, n_max + 1):
        v = op.apply_fixed(v)
        vals = v.coeffs @ pair_vec
        out[n - 1] = vals.real
    return out


def backward_corr(fam, base, rho, phi, u, omega, n_max, depth=6):
    """Backward correlation sequence at the representation point nearest omega."""
    seq = backward_corr_all(fam, base, rho, phi, u, n_max, depth=depth)
    if isinstance(base, ShiftBase):
        idx = base.word_index(omega, depth=rho.depth if rho.kind == "cylinder" else depth)
    else:
        idx = base.nearest_index(omega)
    return seq[:, idx]


def integrated_corr(fam, base, rho, phi_obs, u_obs, n_max, depth=6,
                    kp_tol=1e-8):
    """Integrated correlation sequence of a pair of random observables.

    The observable must have nearly constant fiber integral; each entry is
    the base-weighted average of the fiberwise pairings after n skew steps.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    defect = kp_defect(u_obs)
    if defect > kp_tol:
        raise ValueError(
            f"observable has fiber-integral defect {defect:.3g} > {kp_tol:g}"
        )
    if rho.kind == "constant":
        rho = rho.expand(base, depth=depth)
    op = SkewOperator(fam, base, trunc=rho.trunc,
                      depth=rho.depth if rho.kind == "cylinder" else depth)
    u_obs = u_obs.expand(base, depth=rho.depth) if u_obs.kind == "constant" else u_obs
    phi_obs = (phi_obs.expand(base, depth=rho.depth)
               if phi_obs.kind == "constant" else phi_obs)
    if u_obs.coeffs.shape != rho.coeffs.shape:
        raise ValueError("observable representation does not match the density")
    ibar = u_obs.common_integral()
    v = u_obs.replace_coeffs(u_obs.coeffs - rho.coeffs * ibar)
    phi_rev = phi_obs.coeffs[:, ::-1]
    out = np.empty(n_max)
    for n in range(1, n_max + 1):
        v = op.apply_fixed(v)
        vals = np.einsum("fk,fk->f", v.coeffs, phi_rev)
        out[n - 1] = float(np.dot(v.weights, vals).real)
    return out


def deterministic_corr(op, rho0, phi, u, n_max):
    """Correlation sequence of the unperturbed map from its Fourier matrix."""
    if op.basis != "fourier":
        raise ValueError("deterministic_corr requires a Fourier matrix")
    v = (u.resize(op.trunc) - rho0.resize(op.trunc) * u.integral()).coeffs
    pair_vec = _pairing_vector(phi, op.trunc)
    out = np.empty(n_max)
    for n in range(1, n_max + 1):
        v = op.data @ v
        out[n - 1] = float((v @ pair_vec).real)
    return out


def forward_corr_rotation(fam, base, rho, phi, u, omega, n_max,
                          quad_n=QUAD_POINTS):
    """Forward fiber correlations for the invertible base, by quadrature.

    Only meaningful when the base is invertible; used as a cross-check of
    the backward sequences (which equal forward ones composed with the
    inverse base orbit).
    """
    xs = np.arange(quad_n) / quad_n
    ux = u.evaluate(xs)
    iu = u.integral()
    out = np.empty(n_max)
    point = omega
    for n in range(1, n_max + 1):
        composed = fiber_compose_n(fam, base, omega, n)
        point = base.apply(point)
        idx = base.nearest_index(point)
        mean_phi = rho.fiber(idx).pair(phi)
        out[n - 1] = float((np.mean(phi.evaluate(composed(xs)) * ux)
                            - mean_phi * iu).real)
    return out


def fit_decay_rate(seq, floor=FIT_FLOOR):
    """Least-squares exponential fit |seq(n)| ~ C * tau^n.

    Entries at or below ``floor`` are excluded; with fewer than three
    usable entries the sequence is treated as finite-step annihilation and
    (tau, C) = (0, max|seq|) is returned.
    """
    seq = np.asarray(seq, dtype=np.float64)
    if seq.size < 4:
        raise ValueError("need at least 4 sequence entries")
    ns = np.arange(1, seq.size + 1)
    mags = np.abs(seq)
    keep = mags > floor
    if np.count_nonzero(keep) < 3:
        return 0.0, float(mags.max(initial=0.0))
    slope, intercept = np.polyfit(ns[keep], np.log(mags[keep]), 1)
    return float(np.exp(slope)), float(np.exp(intercept))


def fit_envelope(seq, floor=FIT_FLOOR):
    """Dominating decay envelope built from the fitted rate.

    Returns (tau, C) where tau comes from fit_decay_rate and C is the
    smallest constant with |seq(n)| <= C * tau^n for every entry above the
    floor, so the envelope dominates non-normal transients by construction.
    """
    seq = np.asarray(seq, dtype=np.float64)
    tau, coef = fit_decay_rate(seq, floor)
    mags = np.abs(seq)
    if tau == 0.0:
        return 0.0, coef
    ns = np.arange(1, seq.size + 1)
    keep = mags > floor
    return tau, float(np.max(mags[keep] / tau ** ns[keep]))


def max_ratio(seq, floor=FIT_FLOOR):
    """Largest step-to-step ratio |seq(n+1)| / |seq(n)| above the floor."""
    mags = np.abs(np.asarray(seq, dtype=np.float64))
    valid = mags[:-1] > floor
    if not np.any(valid):
        return 0.0
    return float(np.max(mags[1:][valid] / mags[:-1][valid]))
