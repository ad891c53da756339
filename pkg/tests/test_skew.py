import dataclasses

import numpy as np
import pytest

import fiberspec as fs
from fiberspec import FiberFunction, RandomObservable
from fiberspec.skew import _check_positive

GOLDEN = (np.sqrt(5) - 1) / 2


@pytest.fixture(scope="module")
def rot64():
    return fs.RotationBase(GOLDEN, 64)


@pytest.fixture(scope="module")
def shift_base():
    return fs.ShiftBase((0.5, 0.5))


# --- family construction ---------------------------------------------------

def test_fiber_map_zero_noise_returns_f0(pert_half):
    fam = fs.RandomMapFamily(pert_half, "parametric", 0.0)
    assert fam.fiber_map(0.123) is pert_half


def test_fiber_map_additive_offsets(doubling):
    fam = fs.RandomMapFamily(doubling, "additive", 0.1)
    fm = fam.fiber_map(0.0)  # s = cos 0 = 1
    assert fm.offset == pytest.approx(0.1, abs=1e-15)
    assert fm.lift(0.0) == pytest.approx(0.1, abs=1e-15)
    assert fm(0.3) == pytest.approx(0.7, abs=1e-14)
    assert np.allclose(fm.derivative(np.linspace(0, 1, 9)), 2.0)


def test_fiber_map_parametric_quarter_point(pert_half):
    fam = fs.RandomMapFamily(pert_half, "parametric", 0.2)
    fm = fam.fiber_map(0.25)  # s = cos(pi/2) = 0
    assert fm.fourier_coeffs[0][1] == pytest.approx(0.5, abs=1e-15)


def test_epsilon_max_enforced(pert_half, doubling):
    # parametric bound: min F' - 1 = 0.5 for the half-amplitude map
    fam = fs.RandomMapFamily(pert_half, "parametric", 0.49)
    assert fam.epsilon_max == pytest.approx(0.5, abs=1e-6)
    with pytest.raises(ValueError, match="admissible"):
        fs.RandomMapFamily(pert_half, "parametric", 0.5)
    # additive noise never shrinks the admissible range
    fs.RandomMapFamily(doubling, "additive", 5.0)


def test_parametric_needs_a_coefficient(doubling):
    with pytest.raises(ValueError, match="coefficient"):
        fs.RandomMapFamily(doubling, "parametric", 0.1)


def test_lip_bound_caps_c2_distance(pert_half, doubling):
    xs = np.arange(2048) / 2048
    for fam in (fs.RandomMapFamily(doubling, "additive", 0.3),
                fs.RandomMapFamily(pert_half, "parametric", 0.3)):
        worst = 0.0
        for omega in np.linspace(0, 1, 17):
            fm = fam.fiber_map(omega)
            delta = fm.lift(xs) - fam.f0.lift(xs)
            d1 = fm.derivative(xs) - fam.f0.derivative(xs)
            # second derivative of the lift difference, spectrally exact
            dd = (FiberFunction.from_function(lambda t: fm.derivative(t)
                                              - fam.f0.derivative(t), 16)
                  .derivative().evaluate(xs).real)
            dist = np.abs(delta).max() + np.abs(d1).max() + np.abs(dd).max()
            worst = max(worst, dist)
        assert worst <= fam.lip_bound() * fam.epsilon + 1e-9


def test_family_json_roundtrip(pert_half):
    fam = fs.RandomMapFamily(pert_half, "parametric", 0.125, profile="levels",
                             levels=(0.5, -1.0))
    back = fs.RandomMapFamily.from_json_dict(fam.to_json_dict())
    assert back == fam


# --- cocycle composition ----------------------------------------------------

def test_fiber_compose_single_step(rot64, pert_half):
    fam = fs.RandomMapFamily(pert_half, "parametric", 0.1)
    omega = 0.25
    one = fs.fiber_compose_n(fam, rot64, omega, 1)
    xs = np.linspace(0, 1, 33, endpoint=False)
    assert np.abs(one(xs) - fam.fiber_map(omega)(xs)).max() < 1e-15


def test_cocycle_law(rot64, shift_base, pert_half):
    rng = np.random.default_rng(0)
    xs = rng.random(100)
    fam = fs.RandomMapFamily(pert_half, "parametric", 0.1)
    omega = 0.21875
    full = fs.fiber_compose_n(fam, rot64, omega, 5)
    head = fs.fiber_compose_n(fam, rot64, omega, 2)
    point = rot64.apply(rot64.apply(omega))
    tail = fs.fiber_compose_n(fam, rot64, point, 3)
    assert np.abs(full(xs) - tail(head(xs))).max() < 1e-12

    fam2 = fs.RandomMapFamily(pert_half, "parametric", 0.1, profile="levels")
    word = (0, 1, 1, 0, 1)
    full2 = fs.fiber_compose_n(fam2, shift_base, word, 5)
    head2 = fs.fiber_compose_n(fam2, shift_base, word, 2)
    tail2 = fs.fiber_compose_n(fam2, shift_base, word[2:], 3)
    assert np.abs(full2(xs) - tail2(head2(xs))).max() < 1e-12


def test_zero_noise_composition_is_linear_power(doubling, rot64):
    fam = fs.RandomMapFamily(doubling, "additive", 0.0)
    c = fs.fiber_compose_n(fam, rot64, 0.3, 4)
    xs = np.linspace(0, 1, 41, endpoint=False)
    assert np.abs(c(xs) - np.mod(16 * xs, 1.0)).max() < 1e-12


# --- skew operator ----------------------------------------------------------

def test_skew_apply_fixed_point_at_zero_noise(pert_half, rot64):
    fam = fs.RandomMapFamily(pert_half, "parametric", 0.0)
    _, rho0 = fs.leading_pair(fs.assemble_fourier(pert_half, 32), tol=1e-13)
    u_obs = RandomObservable.constant(rho0)
    out = fs.skew_apply(fam, rot64, u_obs)
    assert np.abs(out.coeffs - rho0.coeffs[None, :]).max() < 1e-12


def test_skew_apply_additive_preserves_lebesgue(doubling, rot64, shift_base):
    one = RandomObservable.constant(FiberFunction.constant(1.0, 16))
    fam = fs.RandomMapFamily(doubling, "additive", 0.2)
    out = fs.skew_apply(fam, rot64, one)
    expect = np.zeros(33)
    expect[16] = 1.0
    assert np.abs(out.coeffs - expect[None, :]).max() < 1e-12
    fam2 = fs.RandomMapFamily(doubling, "additive", 0.2, profile="levels")
    out2 = fs.skew_apply(fam2, shift_base, one, depth=4)
    assert np.abs(out2.coeffs - expect[None, :]).max() < 1e-12


def test_skew_apply_preserves_integral_constancy(pert_half, rot64):
    fam = fs.RandomMapFamily(pert_half, "parametric", 0.1)
    zero_mean = FiberFunction.from_real_coeffs([(1, 0.5, 0.2)], 16)
    u_obs = RandomObservable.from_grid_function(
        rot64,
        lambda w: FiberFunction.constant(1.0, 16) + np.sin(2 * np.pi * w) * zero_mean,
        16)
    assert fs.kp_defect(u_obs) < 1e-12
    out = fs.skew_apply(fam, rot64, u_obs)
    assert fs.kp_defect(out) < 1e-10


def test_kp_defect_stays_small_over_100_iterations(pert_half, rot64):
    fam = fs.RandomMapFamily(pert_half, "parametric", 0.1)
    op = fs.SkewOperator(fam, rot64, trunc=16)
    zero_mean = FiberFunction.from_real_coeffs([(2, -0.4, 0.3)], 16)
    u_obs = RandomObservable.from_grid_function(
        rot64,
        lambda w: FiberFunction.constant(1.0, 16) + np.cos(2 * np.pi * w) * zero_mean,
        16)
    for _ in range(100):
        u_obs = op.apply(u_obs)
    assert fs.kp_defect(u_obs) < 1e-9


def test_n_step_consistency(pert_half, rot64, shift_base):
    # n applications of the one-step operator match the lifted transfer of
    # the composed fiber maps
    fam = fs.RandomMapFamily(pert_half, "parametric", 0.08)
    rng = np.random.default_rng(3)
    u_obs = RandomObservable.from_grid_function(
        rot64,
        lambda w: FiberFunction.from_real_coeffs(
            [(1, np.cos(2 * np.pi * w), 0.3)], 16, const=1.0),
        16)
    op = fs.SkewOperator(fam, rot64, trunc=16)
    stepped = u_obs
    for n in (1, 2, 3):
        stepped = op.apply(stepped)
        direct = fs.skew_apply_n_direct(fam, rot64, u_obs, n)
        assert np.abs(stepped.coeffs - direct.coeffs).max() < 1e-8

    fam2 = fs.RandomMapFamily(pert_half, "parametric", 0.08, profile="levels")
    u2 = RandomObservable.from_word_function(
        shift_base, 5,
        lambda w: FiberFunction.from_real_coeffs(
            [(1, 0.2 * w[0] - 0.1 * w[1], 0.1)], 16, const=1.0),
        16)
    op2 = fs.SkewOperator(fam2, shift_base, trunc=16, depth=5)
    stepped2 = u2
    for n in (1, 2, 3):
        stepped2 = op2.apply(stepped2)
        direct2 = fs.skew_apply_n_direct(fam2, shift_base, u2, n)
        assert np.abs(stepped2.coeffs - direct2.coeffs).max() < 1e-8


def _global_duality_residual(fam, base, phi_obs, u_obs, depth=4):
    """|<phi, L u>_(P x m) - <phi o Theta, u>_(P x m)| by quadrature."""
    out = fs.skew_apply(fam, base, u_obs, depth=depth)
    lhs = 0.0
    for i in range(out.n_fibers):
        lhs += out.weights[i] * out.fiber(i).pair(phi_obs.fiber(min(i, phi_obs.n_fibers - 1)))
    xs = np.arange(4096) / 4096
    rhs = 0.0
    if isinstance(base, fs.ShiftBase):
        d = u_obs.depth
        for i in range(u_obs.n_fibers):
            word = base.word_from_index(i, d)
            fm = fam.fiber_map(word)
            shifted = base.word_index(word[1:], d - 1)
            phi_vals = phi_obs.fiber(min(shifted, phi_obs.n_fibers - 1)).evaluate(fm(xs))
            rhs += u_obs.weights[i] * np.mean(phi_vals * u_obs.fiber(i).evaluate(xs))
    else:
        pts = base.points()
        for i in range(u_obs.n_fibers):
            fm = fam.fiber_map(pts[i])
            j = base.nearest_index(base.apply(pts[i]))
            phi_vals = phi_obs.fiber(min(j, phi_obs.n_fibers - 1)).evaluate(fm(xs))
            rhs += u_obs.weights[i] * np.mean(phi_vals * u_obs.fiber(i).evaluate(xs))
    return abs(lhs - rhs)


def test_global_duality(pert_half, rot64, shift_base):
    rng = np.random.default_rng(20)

    def random_fiber(_):
        terms = [(k, rng.standard_normal(), rng.standard_normal()) for k in (1, 2)]
        return FiberFunction.from_real_coeffs(terms, 16, const=rng.standard_normal())

    fam = fs.RandomMapFamily(pert_half, "parametric", 0.1)
    phi = RandomObservable.from_grid_function(rot64, random_fiber, 16)
    u_obs = RandomObservable.from_grid_function(rot64, random_fiber, 16)
    assert _global_duality_residual(fam, rot64, phi, u_obs) < 1e-7

    fam2 = fs.RandomMapFamily(pert_half, "parametric", 0.1, profile="levels")
    phi2 = RandomObservable.from_word_function(shift_base, 3, random_fiber, 16)
    u2 = RandomObservable.from_word_function(shift_base, 4, random_fiber, 16)
    assert _global_duality_residual(fam2, shift_base, phi2, u2) < 1e-7

    # piecewise base with an omega-independent test function (the base
    # transfer is interpolatory, so omega-varying phi only meets the scalar
    # duality tolerance, not 1e-7)
    pw = fs.PiecewiseLinearBase((2.0, 2.0), 64)
    phi3 = RandomObservable.constant(random_fiber(None))
    u3 = RandomObservable.from_grid_function(pw, random_fiber, 16)
    assert _global_duality_residual(fam, pw, phi3, u3) < 1e-7


# --- fixed density ----------------------------------------------------------

def test_fixed_density_zero_noise(pert_half, rot64):
    fam = fs.RandomMapFamily(pert_half, "parametric", 0.0)
    rho, lam = fs.skew_fixed_density(fam, rot64, trunc=32)
    assert lam == pytest.approx(1.0, abs=1e-10)
    _, rho0 = fs.leading_pair(fs.assemble_fourier(pert_half, 32), tol=1e-13)
    assert np.abs(rho.coeffs - rho0.coeffs[None, :]).max() < 1e-10


def test_fixed_density_additive_exact(doubling):
    for base, profile in ((fs.RotationBase(GOLDEN, 64), "cosine"),
                          (fs.PiecewiseLinearBase((2., 2.), 64), "cosine"),
                          (fs.ShiftBase((0.5, 0.5)), "levels")):
        fam = fs.RandomMapFamily(doubling, "additive", 0.1, profile=profile)
        rho, lam = fs.skew_fixed_density(fam, base, trunc=32, depth=4)
        flat = rho.coeffs.copy()
        flat[:, 32] -= 1.0
        assert np.abs(flat).max() < 1e-10
        assert abs(lam - 1.0) < 1e-8
        assert fs.kp_defect(rho) < 1e-10


def test_fixed_density_mass_normalized(pert_half, rot64):
    fam = fs.RandomMapFamily(pert_half, "parametric", 0.1)
    rho, _ = fs.skew_fixed_density(fam, rot64, trunc=32)
    assert np.abs(rho.fiber_integrals() - 1.0).max() < 1e-12


def test_fixed_density_depth_refinement(pert_half, shift_base):
    fam = fs.RandomMapFamily(pert_half, "parametric", 0.05, profile="levels")
    rho6, _ = fs.skew_fixed_density(fam, shift_base, trunc=32, depth=6)
    rho8, _ = fs.skew_fixed_density(fam, shift_base, trunc=32, depth=8)
    assert fs.kp_defect(rho6) < 1e-8
    lifted = rho6.pad_cylinder(8, shift_base)
    assert np.max((lifted - rho8).fiber_c1_norms()) < 1e-4


def test_fixed_density_positivity_guard():
    bad = RandomObservable.constant(
        FiberFunction.from_real_coeffs([(1, 0.0, 2.0)], 8, const=0.1))
    with pytest.raises(fs.DensityError, match="dips"):
        _check_positive(bad)


def test_monotone_epsilon_continuity(pert_half, rot64):
    fam_builder = lambda eps: fs.RandomMapFamily(pert_half, "parametric", eps)
    _, rho0 = fs.leading_pair(fs.assemble_fourier(pert_half, 32), tol=1e-13)
    errs = []
    for eps in (0.1, 0.05, 0.025):
        rho, _ = fs.skew_fixed_density(fam_builder(eps), rot64, trunc=32)
        diff = rho.replace_coeffs(rho.coeffs - rho0.coeffs[None, :])
        errs.append(np.max(diff.fiber_c1_norms()))
    assert errs[0] > errs[1] > errs[2]
