from math import comb, exp

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from starforms import build_bump, c_phi_constant
from starforms.mollifier import QuadratureError, derivative_l1_norm, eval_theta, multi_indices

# ||d_1^2 theta||_{L^1} for the unit-disk bump, from an independent adaptive
# polar quadrature (scipy dblquad on the closed-form second derivative).
D11_L1_UNIT_DISK = 8.746757165762736


def test_mass_and_odd_moments():
    m = build_bump([0.0, 0.0], 1.0)
    assert abs(m.moment((0, 0)) - 1.0) <= 1e-10
    for alpha in multi_indices(2, 7):
        if any(a % 2 for a in alpha):
            assert abs(m.moment(alpha)) <= 1e-12


def test_moment_scaling():
    m1, m2 = build_bump([0.0, 0.0, 0.0], 1.0), build_bump([0.0, 0.0, 0.0], 2.5)
    for alpha in [(2, 0, 0), (2, 2, 0), (4, 0, 2)]:
        assert abs(m2.moment(alpha) - 2.5 ** sum(alpha) * m1.moment(alpha)) <= 1e-12 * m2.moment(alpha)


def test_eval_theta_examples():
    m = build_bump([0.3, -0.1], 0.7)
    assert eval_theta(m, [0.3, -0.1]) == pytest.approx(m.A * exp(-1.0), rel=1e-15)
    assert eval_theta(m, [1.0, -0.1]) == 0.0
    assert eval_theta(m, [2.0, 2.0]) == 0.0
    assert eval_theta(m, [0.3, 0.5]) > 0.0


def test_bad_radius():
    with pytest.raises(ValueError):
        build_bump([0.0], 0.0)
    with pytest.raises(ValueError):
        c_phi_constant(build_bump([0.0, 0.0], 1.0), rho=0.0)


def test_unconverged_quadrature_raises():
    with pytest.raises(QuadratureError):
        build_bump([0.0, 0.0], 1.0, quad_order=4)


def test_c_phi_frozen_value():
    m = build_bump([0.0, 0.0], 1.0)
    assert c_phi_constant(m, "theta", j=0, rho=1.0) == pytest.approx(1.0 + D11_L1_UNIT_DISK, rel=1e-5)


def test_c_phi_scaling_and_affine_in_rho():
    m1, mr = build_bump([0.0, 0.0], 1.0), build_bump([0.0, 0.0], 0.4)
    assert c_phi_constant(mr, rho=0.4) == pytest.approx(c_phi_constant(m1, rho=1.0) / 0.4, rel=1e-10)
    a = derivative_l1_norm(m1, 0, 0)
    b = derivative_l1_norm(m1, 0, 2)
    for rho in (0.5, 2.0):
        assert c_phi_constant(m1, rho=rho) == pytest.approx(a / rho + rho * b, rel=1e-14)


def test_z_theta_variant_is_finite_and_positive():
    m = build_bump([0.2, 0.0], 0.5)
    assert c_phi_constant(m, "z_theta", j=0, rho=0.5, m_index=0) > 0
    with pytest.raises(ValueError):
        c_phi_constant(m, "other")


def test_derivative_norms_scale_with_radius():
    m1, m2 = build_bump([0.0, 0.0], 1.0), build_bump([0.0, 0.0], 0.3)
    for order in (1, 2):
        ratio = derivative_l1_norm(m2, 0, order) / derivative_l1_norm(m1, 0, order)
        assert ratio == pytest.approx(0.3 ** (-order), rel=1e-8)


def test_moment_table_contents():
    m = build_bump([0.0, 0.0], 1.0, moment_degree=4)
    table = m.moment_table
    assert set(table) == set(multi_indices(2, 4))


@settings(max_examples=25, deadline=None)
@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(0.2, 2.0))
def test_translation_rule(cx, cy, r):
    """Moments about a shifted center follow the binomial expansion of centered moments."""
    m = build_bump([cx, cy], r)
    m0 = build_bump([0.0, 0.0], r)
    c = (cx, cy)
    for alpha in multi_indices(2, 3):
        expected = 0.0
        for beta in multi_indices(2, sum(alpha)):
            if beta[0] > alpha[0] or beta[1] > alpha[1]:
                continue
            coef = comb(alpha[0], beta[0]) * comb(alpha[1], beta[1])
            expected += coef * c[0] ** (alpha[0] - beta[0]) * c[1] ** (alpha[1] - beta[1]) * m0.moment(beta)
        assert abs(m.moment(alpha) - expected) <= 1e-12 * max(1.0, abs(expected))


def test_moments_match_direct_quadrature():
    m = build_bump([0.2, -0.3], 0.6)
    g = np.linspace(-1.0, 1.0, 1601)
    h = g[1] - g[0]
    X, Y = np.meshgrid(0.2 + 0.6 * g, -0.3 + 0.6 * g, indexing="ij")
    P = np.stack([X.ravel(), Y.ravel()], axis=1)
    th = eval_theta(m, P) * (0.6 * h) ** 2
    for alpha in [(0, 0), (1, 0), (1, 2), (3, 0)]:
        direct = np.sum(th * P[:, 0] ** alpha[0] * P[:, 1] ** alpha[1])
        assert abs(direct - m.moment(alpha)) < 1e-8
