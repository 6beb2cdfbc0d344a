import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import smooth_field
from meanfield.errors import BlowUpSuspected, ConfigurationError, WallError
from meanfield.operator import (
    EIGHT_PI,
    energy,
    eval_psi,
    eval_T,
    jacobian_action,
    make_parameters,
    nonlinear_rhs,
    residual_norm,
    wall_distance,
    window_index,
)
from meanfield.surface import SpectralField, build_surface, integrate, laplacian
from meanfield.weights import weight_function

TWO_PI = 2 * np.pi
PI = np.pi


def cosx(surface, eps=1.0):
    return SpectralField.from_function(surface, lambda x, y: eps * np.cos(TWO_PI * x), mean_zero=True)


def test_windows_and_walls():
    assert window_index(4 * PI) == 0
    assert window_index(12 * PI) == 1
    assert window_index(20 * PI) == 2
    assert wall_distance(0.0) == pytest.approx(EIGHT_PI)
    assert wall_distance(12 * PI) == pytest.approx(4 * PI)
    assert wall_distance(17 * PI) == pytest.approx(PI)


@pytest.mark.parametrize("rho1, rho2", [(8 * PI, 4 * PI), (4 * PI, 16 * PI), (8 * PI + 1e-3, 3.0)])
def test_on_wall_rejected(torus16, rho1, rho2):
    p = make_parameters(torus16, rho1, rho2)
    with pytest.raises(WallError):
        p.require_off_wall(1e-3 * EIGHT_PI)


def test_zero_coupling_is_not_a_wall(torus16):
    make_parameters(torus16, 4 * PI, 0.0).require_off_wall(1e-3 * EIGHT_PI)


def test_invalid_parameters(torus16):
    with pytest.raises(ConfigurationError):
        make_parameters(torus16, -1.0, 1.0)
    with pytest.raises(ConfigurationError):
        make_parameters(torus16, 1.0, 1.0, lambda x, y: np.cos(TWO_PI * x))
    assert issubclass(WallError, ConfigurationError)


def test_rhs_vanishes_for_constant_weight(surface):
    p = make_parameters(surface, 5 * PI, 11 * PI)
    assert np.abs(nonlinear_rhs(surface, p, SpectralField.zeros(surface)).values).max() <= 1e-12


def test_rhs_at_zero_collapses(torus32):
    h = weight_function("torus", "two-peak", 1.0)
    p = make_parameters(torus32, 13 * PI, 5 * PI, h)
    rhs = nonlinear_rhs(torus32, p, SpectralField.zeros(torus32))
    hv = h(torus32.nodes[:, 0], torus32.nodes[:, 1]).reshape(torus32.grid_shape)
    # int h over the unit torus, from the fine grid
    fine = build_surface("torus", 256)
    hint = integrate(fine, h(fine.nodes[:, 0], fine.nodes[:, 1]))
    expect = (13 - 5) * PI * (hv / hint - 1)
    assert np.abs(rhs.values - expect).max() <= 1e-10


def test_rhs_refined_grid_oracle():
    # random O(1) field on the modes |kx|, |ky| <= 1; e^u is then resolved at N = 32,
    # while wider bands leave a truncation tail of the rhs above 1e-9
    rng = np.random.default_rng(7)
    ks = [(kx, ky) for kx in range(-1, 2) for ky in range(-1, 2) if (kx, ky) != (0, 0)]
    amp = 0.3 * rng.normal(size=(len(ks), 2))

    def u(x, y):
        return sum(a * np.cos(TWO_PI * (kx * x + ky * y)) + b * np.sin(TWO_PI * (kx * x + ky * y))
                   for (kx, ky), (a, b) in zip(ks, amp))

    h = weight_function("torus", "two-peak", 1.0)
    out = []
    for n in (32, 128):
        s = build_surface("torus", n)
        p = make_parameters(s, 10 * PI, 6 * PI, h)
        out.append(nonlinear_rhs(s, p, SpectralField.from_function(s, u, mean_zero=True)).values)
    assert np.abs(out[0] - out[1][::4, ::4]).max() <= 1e-9


def test_T_and_psi_vanish_at_trivial_solution(surface):
    p = make_parameters(surface, 12 * PI, 3 * PI)
    z = SpectralField.zeros(surface)
    assert eval_T(surface, p, z).norm() == 0.0
    assert eval_psi(surface, p, z).norm() == 0.0


def test_T_linearization_oracle(torus32):
    p = make_parameters(torus32, 6 * PI, 0.0)
    errs = []
    for eps in (1e-2, 1e-3, 1e-4, 1e-6):
        t = eval_T(torus32, p, cosx(torus32, eps))
        errs.append(np.abs(t.values - p.rho1 * eps / (4 * PI**2) * np.cos(TWO_PI * torus32.nodes[:, 0]).reshape(torus32.grid_shape)).max())
    errs = np.array(errs)
    epss = np.array([1e-2, 1e-3, 1e-4, 1e-6])
    assert np.all(errs <= 2 * epss**2 + 1e-15)


def test_jacobian_at_zero_by_hand(torus32):
    p = make_parameters(torus32, 5 * PI, 7 * PI)
    w = cosx(torus32)
    jw = jacobian_action(torus32, p, SpectralField.zeros(torus32), w)
    expect = w.values - (p.rho1 + p.rho2) / (4 * PI**2) * w.values
    assert np.abs(jw.values - expect).max() <= 1e-12
    z = jacobian_action(torus32, p, smooth_field(torus32, np.random.default_rng(0)), SpectralField.zeros(torus32))
    assert z.norm() == 0.0


def test_jacobian_central_difference(surface, rng):
    p = make_parameters(surface, 9 * PI, 14 * PI, weight_function(surface.kind, "two-peak", 1.0))
    u, w = smooth_field(surface, rng, 1.5), smooth_field(surface, rng)
    jw = jacobian_action(surface, p, u, w).coeffs
    ratios = []
    for eps in (1e-3, 1e-4):
        fd = (eval_psi(surface, p, u + eps * w).coeffs - eval_psi(surface, p, u - eps * w).coeffs) / (2 * eps)
        ratios.append(np.linalg.norm(fd - jw) / eps**2)
    assert max(ratios) <= 10.0 * np.linalg.norm(jw)


def test_energy_values(torus32):
    p = make_parameters(torus32, 4 * PI, 4 * PI)
    assert energy(torus32, p, SpectralField.zeros(torus32)) == pytest.approx(0.0, abs=1e-14)
    assert energy(torus32, p, cosx(torus32)) > 0


def test_energy_gradient_matches_residual(surface, rng):
    p = make_parameters(surface, 11 * PI, 6 * PI, weight_function(surface.kind, "single-peak", 1.0))
    u, w = smooth_field(surface, rng, 2.0), smooth_field(surface, rng)
    eps = 1e-4
    fd = (energy(surface, p, u + eps * w) - energy(surface, p, u - eps * w)) / (2 * eps)
    grad = -laplacian(surface, u).values - nonlinear_rhs(surface, p, u).values
    exact = integrate(surface, w.values * grad)
    assert abs(fd - exact) <= 1e-6 * abs(exact)


def test_residual_norm_is_psi_norm(surface, rng):
    p = make_parameters(surface, 3 * PI, 4 * PI)
    u = smooth_field(surface, rng, 0.7)
    assert residual_norm(surface, p, u) == pytest.approx(eval_psi(surface, p, u).norm(), rel=1e-14)


def test_blow_up_reported(torus16):
    p = make_parameters(torus16, 4 * PI, 4 * PI)
    u = SpectralField.from_function(torus16, lambda x, y: 800 * np.cos(TWO_PI * x), mean_zero=True)
    with pytest.raises(BlowUpSuspected) as info:
        eval_T(torus16, p, u)
    assert info.value.max_abs_u > 700
    assert info.value.location is not None


def test_large_but_finite_field_is_stable(torus16):
    p = make_parameters(torus16, 4 * PI, 4 * PI)
    u = SpectralField.from_function(torus16, lambda x, y: 80 * np.cos(TWO_PI * x), mean_zero=True)
    assert np.all(np.isfinite(eval_psi(torus16, p, u).coeffs))


SURFACES = {"torus": build_surface("torus", 16), "sphere": build_surface("sphere", 10)}


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**31), kind=st.sampled_from(["torus", "sphere"]),
       amp=st.sampled_from([0.1, 1.0, 5.0]), rho=st.floats(0.5, 40.0),
       preset=st.sampled_from(["constant", "single-peak", "two-peak"]))
def test_diagonal_oddness(seed, kind, amp, rho, preset):
    s = SURFACES[kind]
    p = make_parameters(s, rho * PI, rho * PI, weight_function(kind, preset, 1.0))
    u = smooth_field(s, np.random.default_rng(seed), amp)
    psi_p, psi_m = eval_psi(s, p, u).coeffs, eval_psi(s, p, -u).coeffs
    assert np.linalg.norm(psi_p + psi_m) <= 1e-12 * max(1.0, np.linalg.norm(psi_p))
    t_p, t_m = eval_T(s, p, u).coeffs, eval_T(s, p, -u).coeffs
    assert np.linalg.norm(t_p + t_m) <= 1e-12 * max(1.0, np.linalg.norm(t_p))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31), kind=st.sampled_from(["torus", "sphere"]),
       r1=st.floats(0, 40), r2=st.floats(0, 40), c=st.floats(1e-3, 1e3))
def test_mean_zero_and_scaling(seed, kind, r1, r2, c):
    s = SURFACES[kind]
    h = weight_function(kind, "two-peak", 1.0)
    p = make_parameters(s, r1 * PI, r2 * PI, h)
    pc = make_parameters(s, r1 * PI, r2 * PI, lambda a, b: c * h(a, b))
    u = smooth_field(s, np.random.default_rng(seed), 2.0)
    rhs = nonlinear_rhs(s, p, u)
    assert abs(rhs.coeffs[0]) <= 1e-12
    assert abs(eval_T(s, p, u).coeffs[0]) <= 1e-12
    assert abs(jacobian_action(s, p, u, u).coeffs[0]) <= 1e-12
    scale = max(1.0, np.abs(rhs.coeffs).max())
    assert np.abs(nonlinear_rhs(s, pc, u).coeffs - rhs.coeffs).max() <= 1e-13 * scale


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31), kind=st.sampled_from(["torus", "sphere"]),
       r1=st.floats(0, 40), r2=st.floats(0, 40))
def test_jacobian_symmetry(seed, kind, r1, r2):
    s = SURFACES[kind]
    p = make_parameters(s, r1 * PI, r2 * PI, weight_function(kind, "single-peak", 1.0))
    rng = np.random.default_rng(seed)
    u, w1, w2 = smooth_field(s, rng, 2.0), smooth_field(s, rng), smooth_field(s, rng)
    a = integrate(s, w1.values * -laplacian(s, jacobian_action(s, p, u, w2)).values)
    b = integrate(s, w2.values * -laplacian(s, jacobian_action(s, p, u, w1)).values)
    assert abs(a - b) <= 1e-9 * max(1.0, abs(a))
