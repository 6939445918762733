from math import pi

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from starforms import Ball, Cigar, Ellipsoid, RadialStar2D, make_domain
from starforms.geometry import Crescent, contains, domain_stats, quadrature_nodes, ray_exit, verify_star_shape


def rotation(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


def test_contains_examples():
    assert contains(Ball([0, 0, 0], 1.0), [0, 0, 0])
    assert not contains(Ball([0, 0, 0], 1.0), [2, 0, 0])
    assert contains(Ellipsoid([0, 0], [2, 1]), [1.5, 0])


def test_ray_exit_examples():
    disk = Ball([0, 0], 1.0)
    assert ray_exit(disk, [0, 0], [0.5, 0]) == pytest.approx(2.0, abs=1e-12)
    assert ray_exit(disk, [0, 0], [0.9, 0]) == pytest.approx(1 / 0.9, abs=1e-12)
    a = 3.0
    assert ray_exit(Ellipsoid([0, 0], [a, 1]), [0, 0], [a / 2, 0]) == pytest.approx(2.0, abs=1e-12)
    with pytest.raises(ValueError):
        ray_exit(disk, [0.1, 0], [0.1, 0])


def test_ray_exit_bisection_shapes():
    star = RadialStar2D([0, 0], 1.0, cos_coeffs=[0.0, 0.0, 0.15], ball=([0, 0], 0.5))
    T = ray_exit(star, [0.1, 0.0], [0.3, 0.2])
    p = np.array([0.1, 0.0]) + T * np.array([0.2, 0.2])
    R = star.stats().R
    assert contains(star, p - 1e-8 * np.array([0.2, 0.2]))
    assert not contains(star, p + 1e-8 * R * np.array([1.0, 1.0]))


def test_stats_examples():
    s = domain_stats(Ball([0, 0], 1.0))
    assert (s.R, s.vol) == (2.0, pytest.approx(pi))
    e = domain_stats(Ellipsoid([0, 0], [3.0, 1.0]))
    assert e.R == 6.0 and e.vol == pytest.approx(3 * pi)
    h = domain_stats(Ball([0, 0], 1.0, ball=([0, 0], 0.5)))
    assert h.ratio_diam == pytest.approx(2.0) and h.ratio_vol == pytest.approx(4.0)


def test_cigar_stats():
    c = Cigar([0, 0], [2, 0], 0.5)
    s = c.stats()
    assert s.R == pytest.approx(3.0)
    assert s.vol == pytest.approx(2.0 + pi * 0.25)
    assert s.ratio_diam == pytest.approx((2 + 1) / 1)


def test_quadrature_nodes():
    c = Cigar([0, 0], [1, 0], 0.5)
    X, W = quadrature_nodes(c, 4)
    assert abs(W.sum() - c.volume()) / c.volume() < 0.01
    assert np.all(c.contains(X))
    assert len(quadrature_nodes(c, 5)[1]) > len(W)


def test_quadrature_first_order_convergence():
    disk = Ball([0.1, 0.0], 1.0)
    errs = [abs(quadrature_nodes(disk, L)[1].sum() - pi) for L in (4, 6, 8)]
    # error falls at least linearly with spacing (factor 4 over two levels)
    assert errs[2] < errs[0] / 4


def test_star_shape_checks():
    assert verify_star_shape(Ball([0, 0], 1.0, ball=([0, 0], 0.4)), 500, 0).ok
    assert verify_star_shape(Ellipsoid([0, 0], [2.0, 1.0]), 500, 0).ok
    cres = Crescent([0, 0], 1.0, [0.45, 0], 0.75, ball=([-0.8, 0], 0.1))
    check = verify_star_shape(cres, 2000, 0)
    assert not check.ok
    b, y = check.witness
    assert cres.contains(y)
    again = verify_star_shape(cres, 2000, 0).witness
    assert np.array_equal(again[0], b) and np.array_equal(again[1], y)


def test_inscribed_ball_validated():
    with pytest.raises(ValueError):
        Ball([0, 0], 1.0, ball=([0, 0], 0.0))
    with pytest.raises(ValueError):
        Ellipsoid([0, 0], [1.0, -1.0])


def test_make_domain():
    d = make_domain({"shape": "cigar", "p0": [0, 0], "p1": [1, 0], "radius": 0.5, "ball": {"center": [0, 0], "radius": 0.5}})
    assert isinstance(d, Cigar) and d.ball_radius == 0.5
    with pytest.raises(ValueError):
        make_domain({"shape": "torus"})


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31))
def test_segment_containment_and_exit(seed):
    rng = np.random.default_rng(seed)
    dom = Ellipsoid([0.2, 0.0], [2.0, 0.8], rotation(0.3), ball=([0.2, 0.0], 0.8))
    x = dom.sample(1, rng)[0]
    z = dom.sample_ball(1, rng)[0]
    if np.linalg.norm(x - z) < 1e-6:
        return
    T = ray_exit(dom, z, x)
    assert T >= 1.0
    ts = np.linspace(0, min(T, 1.0), 20)
    assert np.all(dom.contains(z + ts[:, None] * (x - z)))
    exit_point = z + T * (x - z)
    assert abs(np.linalg.norm(dom._local(exit_point)) - 1.0) < 1e-10 * dom.stats().R


@settings(max_examples=10, deadline=None)
@given(st.floats(0, 2 * np.pi))
def test_stats_rigid_motion_invariance(angle):
    base = Ellipsoid([0, 0], [2.0, 1.0])
    moved = Ellipsoid([0.7, -1.3], [2.0, 1.0], rotation(angle), ball=([0.7, -1.3], 1.0))
    a, b = base.stats(), moved.stats()
    assert b.ratio_diam == pytest.approx(a.ratio_diam, rel=1e-12)
    assert b.ratio_vol == pytest.approx(a.ratio_vol, rel=1e-12)
