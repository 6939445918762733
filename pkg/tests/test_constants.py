from math import e, exp, log, sqrt

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from starforms import Ball, BoundRangeError, chain_bound, cigar_family, dirichlet_constant, estimate_empirical_ratio
from starforms import h1_bound, h2_bound_poincare, kappa, poincare_constant_KP
from starforms.constants import (
    bogovskii_branch,
    is_nondecreasing,
    kappa_bogovskii,
    kappa_poincare,
    poincare_branch,
    span_ratio,
)
from starforms.exterior import DegreeError
from starforms.geometry import DomainStats


def stats(ratio_diam, ratio_vol):
    return DomainStats(R=ratio_diam, rho=1.0, vol=ratio_vol, vol_ball=1.0)


def test_kappa_poincare_examples():
    assert kappa_poincare(2, 2, e) == 1.0
    assert kappa_poincare(2, 1, e) == pytest.approx(1.0, abs=1e-12)
    assert kappa_poincare(4, 1, e) == pytest.approx(exp(1 / 3), abs=1e-12)


def test_kappa_poincare_third_branch_keeps_printed_exponent():
    v = 7.0
    expected = v ** ((6 - 2) / (2 * 5)) * log(v) ** (6 / (2 * 4))
    assert kappa_poincare(6, 1, v) == pytest.approx(expected, rel=1e-14)


def test_kappa_bogovskii_examples():
    assert kappa_bogovskii(3, 1, e) == 1.0
    assert kappa_bogovskii(2, 2, e) == pytest.approx(2.0, abs=1e-12)
    assert kappa_bogovskii(2, 2, e**2) == pytest.approx(3.0, abs=1e-12)


def test_kappa_degenerate_volume_ratio():
    with pytest.raises(BoundRangeError):
        kappa_poincare(2, 1, 1.0)
    with pytest.raises(BoundRangeError):
        kappa_bogovskii(2, 2, 0.5)
    assert kappa("poincare", 2, 1, 1.0, floor=True) == 1.0
    with pytest.raises(ValueError):
        kappa("other", 2, 1, 2.0)


def test_h1_bound_examples():
    assert h1_bound("poincare", 2, 2, stats(4.0, 3.0)) == 4.0
    assert h1_bound("poincare", 2, 2, stats(8.0, 3.0)) == 2 * h1_bound("poincare", 2, 2, stats(4.0, 3.0))
    assert h1_bound("bogovskii", 2, 2, stats(3.0, e)) == pytest.approx(6.0, abs=1e-12)
    with pytest.raises(ValueError):
        h1_bound("poincare", 2, 2, stats(3.0, 2.0), scale=0.0)


def test_h2_bound_examples():
    assert h2_bound_poincare(2, 2, 2.0) == 0.5
    assert h2_bound_poincare(3, 2, 0.5) == 2 * h2_bound_poincare(3, 2, 1.0)
    with pytest.raises(BoundRangeError, match="range"):
        h2_bound_poincare(3, 1, 1.0)


def test_poincare_constant_examples():
    assert poincare_constant_KP(2, stats(2.0, e)) == pytest.approx(4.0, abs=1e-12)
    assert poincare_constant_KP(2, stats(2.0, e), scale=0.0) == 0.0
    vals = [poincare_constant_KP(3, stats(2.0, v)) for v in (1.5, 3.0, 10.0, 100.0)]
    assert is_nondecreasing(vals)
    with pytest.raises(BoundRangeError):
        poincare_constant_KP(2, stats(2.0, 1.0))


def test_chain_bound_examples():
    assert chain_bound(False, 1, 3.0) == 6.0
    assert chain_bound(False, 2, 3.0, C_P=5.0, C_S=0.0, D_T=2.0, d_T=0.1) == 6.0
    assert chain_bound(True, 1, 1.0, C_S=0.0, n=2) == pytest.approx(4 * sqrt(2))
    expected = 2 * 2.0 * sqrt(1 + 32 * 1.5**2 * (2.0 * 0.3 * 4.0 / 0.5 + 1) ** 4)
    assert chain_bound(False, 2, 2.0, C_P=0.3, C_S=1.5, D_T=4.0, d_T=0.5) == pytest.approx(expected, rel=1e-14)
    with pytest.raises(BoundRangeError):
        chain_bound(True, 2, 1.0, n=2)
    with pytest.raises(DegreeError):
        chain_bound(False, 0, 1.0)


def test_dirichlet_constant():
    # first zeros of J_0 and J_{1/2}
    assert dirichlet_constant(2) == pytest.approx(1 / 2.404825557695773, rel=1e-12)
    assert dirichlet_constant(3) == pytest.approx(1 / np.pi, rel=1e-12)


def test_dispatch_total():
    for n in range(1, 7):
        for l in range(1, n + 1):
            p = poincare_branch(n, l)
            assert p == (1 if 2 * l > n else 2 if 2 * l >= n - 1 else 3)
            assert bogovskii_branch(n, l) == (1 if l < n / 2 + 1 else 2)
    with pytest.raises(DegreeError):
        poincare_branch(2, 3)


def test_cigar_family_geometry():
    fam = cigar_family((1, 2, 4, 8))
    for t, dom in zip((1, 2, 4, 8), fam):
        s = dom.stats()
        assert s.ratio_diam == pytest.approx(t, rel=1e-12)
        assert s.rho == 1.0
    with pytest.raises(ValueError):
        cigar_family((0.5,))


def test_is_nondecreasing():
    assert is_nondecreasing([1, 1, 2])
    assert not is_nondecreasing([1, 0.99999, 2])
    assert is_nondecreasing([1, 0.99999, 2], rtol=1e-4)


def test_empirical_ratio_report():
    disk = Ball([0.0, 0.0], 1.0)
    a = estimate_empirical_ratio("poincare", disk, 1, ensemble_size=4, seed=3)
    b = estimate_empirical_ratio("poincare", disk, 1, ensemble_size=4, seed=3)
    assert a.empirical_ratio == b.empirical_ratio and a.samples == b.samples
    assert a.empirical_ratio >= max(a.samples) >= 0
    assert a.count == 4 and a.seed == 3
    with pytest.raises(ValueError):
        estimate_empirical_ratio("poincare", disk, 1, ensemble_size=0)


def test_calibrated_bound_on_smaller_ball():
    """Scale fitted on the unit disk, then checked with a smaller inscribed ball."""
    ref = estimate_empirical_ratio("poincare", Ball([0.0, 0.0], 1.0), 1, ensemble_size=8, seed=0)
    scale = 2.0 * ref.empirical_ratio
    target = Ball([0.0, 0.0], 1.0, ball=([0.0, 0.0], 0.45))
    rep = estimate_empirical_ratio("poincare", target, 1, ensemble_size=8, seed=0, scale=scale)
    assert rep.empirical_ratio <= rep.bound_value


def test_bogovskii_ratio_positive():
    rep = estimate_empirical_ratio("bogovskii", Ball([0.0, 0.0], 1.0), 1, ensemble_size=2, seed=1, level=4)
    assert rep.empirical_ratio > 0
    assert rep.kappa == 1.0


# --- properties ---


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.floats(e, 1e6))
def test_kappa_at_least_one(n, l, v):
    if l > n:
        return
    assert kappa_poincare(n, l, v) >= 1.0 - 1e-12
    assert kappa_bogovskii(n, l, v) >= 1.0


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.floats(1.01, 1e4))
def test_kappa_continuous(n, l, v):
    if l > n:
        return
    for fn in (kappa_poincare, kappa_bogovskii):
        a, b = fn(n, l, v), fn(n, l, v * (1 + 1e-9))
        assert abs(a - b) <= 1e-6 * max(1.0, abs(a))


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(["poincare", "bogovskii"]), st.integers(2, 5), st.floats(1.5, 50), st.floats(1.1, 10))
def test_bound_linear_in_diameter(kind, n, v, lam):
    l = 1 if kind == "poincare" else 2
    base = h1_bound(kind, n, l, stats(2.0, v))
    assert h1_bound(kind, n, l, stats(2.0 * lam, v)) == pytest.approx(lam * base, rel=1e-13)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.floats(1e-3, 1e3))
def test_span_ratio_homogeneous(seed, lam):
    rng = np.random.default_rng(seed)
    W = rng.uniform(0.1, 1.0, 30)
    U = rng.normal(size=(4, 30, 2))
    G = rng.normal(size=(4, 30, 4))
    r = span_ratio(G, U, W)
    assert span_ratio(lam * G, lam * U, W) == pytest.approx(r, rel=1e-10)
    assert r >= 0
