import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from starforms import FormValue, contract, hodge_star, wedge
from starforms.exterior import (
    DegreeError,
    basis,
    complement,
    dim,
    inner_product,
    inner_product_via_star,
    permutation_sign,
    sigma,
    suppress,
)


def e(n, *I):
    return FormValue.basis_form(n, I)


def form(n, terms):
    degree = len(next(iter(terms)))
    return FormValue.from_dict(n, degree, terms)


# --- examples ---


def test_wedge_examples():
    assert wedge(e(2, 1), e(2, 2)) == e(2, 1, 2)
    assert wedge(e(2, 1), e(2, 1)) == FormValue.zero(2, 2)
    assert wedge(form(2, {(1,): 1.0, (2,): 1.0}), e(2, 2)) == e(2, 1, 2)


def test_wedge_overflow():
    with pytest.raises(DegreeError):
        wedge(e(2, 1, 2), e(2, 1))


def test_hodge_examples():
    assert hodge_star(e(3, 1)) == e(3, 2, 3)
    assert hodge_star(e(3, 1, 2)) == e(3, 3)
    assert hodge_star(e(2, 2)) == form(2, {(1,): -1.0})


def test_contract_examples():
    assert contract([1.0, 2.0], e(2, 1, 2)) == form(2, {(2,): 1.0, (1,): -2.0})
    s = contract([3.0, 0.0, 0.0], e(3, 1))
    assert s.degree == 0 and s.coeffs[0] == 3.0
    z = [0.3, -1.7]
    assert contract(z, contract(z, e(2, 1, 2))) == FormValue.zero(2, 0)


def test_contract_scalar_rejected():
    with pytest.raises(DegreeError):
        contract([1.0, 0.0], FormValue.zero(2, 0))


def test_inner_product_examples():
    assert inner_product(e(3, 1, 2), e(3, 1, 2)) == 1.0
    assert inner_product(e(3, 1, 2), e(3, 1, 3)) == 0.0
    v = form(2, {(1,): 2.0, (2,): 1.0})
    assert inner_product(v, v) == 5.0
    with pytest.raises(DegreeError):
        inner_product(e(3, 1), e(3, 1, 2))


def test_index_helpers():
    assert suppress((1, 3, 4), 2) == (1, 4)
    assert complement((2,), 3) == (1, 3)
    assert permutation_sign((2, 1, 3)) == -1
    assert permutation_sign((3, 1, 2)) == 1
    # parity of (I, I^c): (2, 1) is odd, (1, 2, 3) even
    assert sigma((2,), 2) == 1
    assert sigma((1,), 3) == 0
    assert len(basis(5, 2)) == dim(5, 2) == 10


def test_zero_equality_ignores_explicit_zeros():
    assert FormValue.from_dict(3, 1, {(1,): 0.0}) == FormValue.zero(3, 1)


# --- properties ---


@st.composite
def form_pair(draw, total=True):
    n = draw(st.integers(2, 6))
    p = draw(st.integers(0, n))
    q = draw(st.integers(0, n - p if total else n))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    a = FormValue(n, p, rng.uniform(-1, 1, dim(n, p)))
    b = FormValue(n, q, rng.uniform(-1, 1, dim(n, q)))
    z = rng.uniform(-1, 1, n)
    return n, a, b, z


@settings(max_examples=150, deadline=None)
@given(form_pair())
def test_anticommutativity(data):
    _, a, b, _ = data
    sign = (-1) ** (a.degree * b.degree)
    np.testing.assert_allclose(wedge(a, b).coeffs, sign * wedge(b, a).coeffs, atol=1e-12)


@settings(max_examples=150, deadline=None)
@given(form_pair())
def test_double_star(data):
    n, a, _, _ = data
    l = a.degree
    np.testing.assert_allclose(hodge_star(hodge_star(a)).coeffs, (-1) ** (l * (n - l)) * a.coeffs, atol=1e-12)


@settings(max_examples=150, deadline=None)
@given(form_pair())
def test_contraction_antiderivation(data):
    _, a, b, z = data
    if a.degree + b.degree == 0:
        return
    lhs = contract(z, wedge(a, b)).coeffs
    rhs = 0.0
    if a.degree:
        rhs = rhs + wedge(contract(z, a), b).coeffs
    if b.degree:
        rhs = rhs + (-1) ** a.degree * wedge(a, contract(z, b)).coeffs
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


@settings(max_examples=150, deadline=None)
@given(form_pair())
def test_inner_product_definite_and_star_identity(data):
    _, a, _, _ = data
    assert inner_product(a, a) >= 0
    assert inner_product(FormValue.zero(a.n, a.degree), FormValue.zero(a.n, a.degree)) == 0
    assert abs(inner_product(a, a) - inner_product_via_star(a, a)) <= 1e-12
    if np.any(a.coeffs):
        assert inner_product(a, a) > 0


@settings(max_examples=100, deadline=None)
@given(form_pair(total=False))
def test_wedge_bilinear(data):
    n, a, b, _ = data
    if a.degree + b.degree > n:
        return
    lhs = wedge(FormValue(n, a.degree, 2.5 * a.coeffs), b).coeffs
    np.testing.assert_allclose(lhs, 2.5 * wedge(a, b).coeffs, atol=1e-12)
