import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_instance
from geofair import dist
from geofair.designer import (
    SpectralData,
    compute_k,
    low_rate_bound,
    lower_bound,
    select_direction,
    solve,
    spectral_data,
)
from geofair.errors import (
    DegenerateSpectrumWarning,
    DomainError,
    InfeasibleEpsilonError,
    NumericalError,
)
from geofair.geometry import PerturbationDesign, ProblemInstance, approx_mi_ty, approx_mi_xy, build_operators
from geofair.oracle import quadratic_oracle

SIGMA_TY = 3.20336


def test_select_direction_cases():
    a, b = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    assert select_direction(SpectralData(3.2, 1.0, a, b)) == (3.2, a, False)
    d = select_direction(SpectralData(1.0 + 1e-12, 0.4, a, b))
    assert d.used_second and d.sigma == 0.4
    with pytest.raises(NumericalError):
        select_direction(SpectralData(0.9, 0.4, a, b))


def test_spectral_data_worked_example(worked):
    spec = spectral_data(build_operators(worked).w_ty)
    assert spec.sigma_max == pytest.approx(3.2034, abs=1e-3)
    assert spec.sigma_max2 == pytest.approx(1.0, abs=1e-9)


def test_lower_bound_worked_example(worked):
    lb = lower_bound(worked)
    assert lb.sigma == pytest.approx(SIGMA_TY, abs=1e-4)
    assert lb.k_factor == 1.0
    assert lb.p2_value == pytest.approx(0.5 * 0.05 ** 2 * 3.2034 ** 2, abs=1e-5)
    assert lb.tight and not lb.used_second
    np.testing.assert_allclose(lb.direction, [0.8314, -0.5557], atol=1e-4)


@pytest.mark.parametrize("rate, k", [(0.35, 1.4169), (0.75, 1.0), (math.inf, 1.0), (0.7026, 1.0)])
def test_compute_k(worked, rate, k):
    ops = build_operators(worked)
    v = lower_bound(worked, ops=ops).direction
    assert compute_k(ops, v, 0.05, rate) == pytest.approx(k, abs=1e-4)


def test_k_restores_rate_feasibility(worked):
    for r in (0.01, 0.1, 0.35):
        inst = worked.with_rate(r)
        lb = lower_bound(inst)
        ops = build_operators(inst)
        assert approx_mi_xy(ops, lb.design, inst.eps) <= r * (1 + 1e-12)
        assert approx_mi_xy(ops, lb.design, inst.eps) == pytest.approx(r, rel=1e-12)


def test_low_rate_bound_worked_example(worked):
    inst = worked.with_rate(0.35)
    assert low_rate_bound(inst) == pytest.approx(0.35 * 10.2615 / 562.1029, abs=1e-5)
    assert low_rate_bound(inst) == pytest.approx(0.006390, abs=1e-6)
    assert low_rate_bound(inst) == pytest.approx(lower_bound(inst).p2_value, rel=1e-12)
    assert low_rate_bound(worked.with_rate(0.2)) * 2 == pytest.approx(low_rate_bound(worked.with_rate(0.4)), rel=1e-12)
    with pytest.raises(DomainError):
        low_rate_bound(worked.with_rate(0.75))


def test_boundary_continuity(worked):
    ops = build_operators(worked)
    v = lower_bound(worked, ops=ops).direction
    r_star = 0.5 * 0.05 ** 2 * float(np.sum((ops.w_xy @ v) ** 2))
    below = lower_bound(worked.with_rate(r_star * (1 - 1e-9))).p2_value
    above = lower_bound(worked.with_rate(r_star * (1 + 1e-9))).p2_value
    assert below == pytest.approx(above, rel=1e-8)


def test_solve_realisable_design(worked):
    inst = worked.with_eps(0.02)
    sol = solve(inst)
    np.testing.assert_allclose(sol.p_x_given_y.matrix, [[0.0447, 0.4553], [0.9553, 0.5447]], atol=1e-4)
    for y in range(2):
        assert dist.chi_squared(sol.p_s_given_y.column(y).probs, inst.p_s.probs) == pytest.approx(0.02 ** 2, rel=1e-10)
    np.testing.assert_allclose(sol.joint.marginal("sx"), inst.p_s_given_x.matrix * inst.p_x.probs, atol=1e-12)
    np.testing.assert_allclose(sol.joint.marginal("y"), [0.5, 0.5], atol=1e-12)
    assert sol.p2_value == pytest.approx(0.5 * 0.02 ** 2 * SIGMA_TY ** 2, rel=1e-5)


def test_solve_infeasible_at_worked_eps(worked):
    with pytest.raises(InfeasibleEpsilonError) as info:
        solve(worked)
    assert "P(X|Y)" in str(info.value)


def test_zero_eps(worked):
    sol = solve(worked.with_eps(0.0))
    assert sol.p2_value == 0.0
    for y in range(2):
        np.testing.assert_allclose(sol.p_s_given_y.column(y).probs, worked.p_s.probs, atol=1e-15)
        np.testing.assert_allclose(sol.p_y_given_x.column(y).probs, [0.5, 0.5], atol=1e-15)


def test_sign_invariance(worked):
    inst = worked.with_eps(0.02)
    ops = build_operators(inst)
    lb = lower_bound(inst)
    flipped = PerturbationDesign(lb.design.p_y, -lb.design.l_vectors)
    assert approx_mi_ty(ops, flipped, inst.eps) == pytest.approx(lb.p2_value, rel=1e-14)
    assert approx_mi_xy(ops, flipped, inst.eps) == pytest.approx(approx_mi_xy(ops, lb.design, inst.eps), rel=1e-14)


def test_degenerate_spectrum_uses_second():
    # T = S makes W_ty the identity: every direction has unit gain.
    psx = [[0.8, 0.3], [0.2, 0.7]]
    inst = ProblemInstance([0.4, 0.6], psx, psx, eps=0.01)
    with pytest.warns(DegenerateSpectrumWarning):
        lb = lower_bound(inst)
    assert lb.used_second
    assert lb.sigma == pytest.approx(1.0, abs=1e-12)
    assert abs(lb.direction @ build_operators(inst).sqrt_ps) < 1e-12
    assert lb.p2_value == pytest.approx(0.5 * 0.01 ** 2, rel=1e-12)


def test_coupling_is_used_in_joint(worked):
    inst = worked.with_eps(0.01)
    coupling = np.zeros((2, 2, 2))
    for x in range(2):
        coupling[:, :, x] = np.outer(inst.p_s_given_x.matrix[:, x], inst.p_t_given_x.matrix[:, x])
    coupled = ProblemInstance(inst.p_x, inst.p_s_given_x, inst.p_t_given_x, 0.01, p_st_given_x=coupling)
    np.testing.assert_allclose(solve(coupled).joint.table, solve(inst).joint.table, atol=1e-15)


@pytest.mark.filterwarnings("ignore::geofair.errors.DegenerateSpectrumWarning")
@given(st.integers(0, 10_000), st.floats(0.1, 0.9), st.floats(0.2, 5.0))
@settings(max_examples=40, deadline=None)
def test_binary_tightness_against_brute_force(seed, frac, rate_scale):
    # For |S| = 2 the only feasible direction is the line orthogonal to sqrt(P_S);
    # scan its radius densely and compare with the closed form.
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, 2, 2)
    ops = build_operators(inst)
    eps = frac * ops.eps_threshold
    u = ops.sqrt_ps
    d = np.array([u[1], -u[0]])
    gain_t = float(np.sum((ops.w_ty @ d) ** 2))
    gain_x = float(np.sum((ops.w_xy @ d) ** 2))
    rate = rate_scale * 0.5 * eps ** 2 * gain_x
    inst = inst.with_eps(eps).with_rate(rate)
    radii = np.linspace(0, 1, 200_001)
    ok = 0.5 * eps ** 2 * radii ** 2 * gain_x <= rate
    brute = float(np.max(0.5 * eps ** 2 * radii[ok] ** 2 * gain_t))
    lb = lower_bound(inst, ops=ops)
    assert lb.p2_value >= brute - 1e-15
    assert lb.p2_value == pytest.approx(brute, rel=2e-5)
    assert lb.p2_value == pytest.approx(quadratic_oracle(ops, eps, rate), rel=1e-9)


@given(st.integers(0, 10_000), st.floats(0.1, 0.9))
@settings(max_examples=30, deadline=None)
def test_three_state_bound_is_a_lower_bound(seed, frac):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, 3, 3)
    ops = build_operators(inst)
    inst = inst.with_eps(frac * ops.eps_threshold)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateSpectrumWarning)
        lb = lower_bound(inst, ops=ops)
    assert not lb.tight
    assert quadratic_oracle(ops, inst.eps, inst.rate) >= lb.p2_value - 1e-12
