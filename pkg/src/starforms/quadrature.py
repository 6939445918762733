"""Quadrature rules on intervals, spheres and cubes."""

from __future__ import annotations

from functools import lru_cache
from math import gamma, pi

import numpy as np
from scipy.special import roots_jacobi


@lru_cache(maxsize=None)
def _gauss_unit(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    return (x + 1.0) / 2.0, w / 2.0


def gauss_legendre(a, b, order: int):
    """Nodes and weights on ``[a, b]``; ``a`` and ``b`` may be arrays (broadcast on a new last axis)."""
    x, w = _gauss_unit(order)
    a = np.asarray(a, dtype=float)[..., None]
    b = np.asarray(b, dtype=float)[..., None]
    return a + (b - a) * x, (b - a) * w


def composite_gauss(a: float, b: float, panels: int, order: int):
    edges = np.linspace(a, b, panels + 1)
    x, w = gauss_legendre(edges[:-1], edges[1:], order)
    return x.reshape(-1), w.reshape(-1)


def sphere_area(n: int) -> float:
    """Surface measure of the unit sphere in R^n (2 for n = 1)."""
    return 2.0 * pi ** (n / 2) / gamma(n / 2)


def ball_volume(n: int, r: float = 1.0) -> float:
    return pi ** (n / 2) / gamma(n / 2 + 1) * r**n


@lru_cache(maxsize=None)
def sphere_rule(n: int, order: int):
    """Product rule on the unit sphere of R^n.

    ``order`` is the number of circle points (n = 2) or Gauss-Jacobi nodes per
    polar angle (n >= 3); the circle factor then uses ``2 * order`` points.
    Exact for polynomials of degree < ``order`` in each angular factor.
    """
    if n == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if n == 2:
        phi = 2 * pi * (np.arange(order) + 0.5) / order
        return np.stack([np.cos(phi), np.sin(phi)], axis=1), np.full(order, 2 * pi / order)
    a = (n - 3) / 2.0
    t, wt = roots_jacobi(order, a, a)
    sub_pts, sub_w = sphere_rule(n - 1, 2 * order if n == 3 else order)
    s = np.sqrt(1.0 - t**2)
    pts = np.concatenate(
        [np.column_stack([np.full(len(sub_w), ti), si * sub_pts]) for ti, si in zip(t, s)]
    )
    w = np.concatenate([wi * sub_w for wi in wt])
    return pts, w


def cube_rule(lo, hi, panels: int, order: int):
    """Tensor composite Gauss rule on the box ``[lo, hi]``."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    axes = [composite_gauss(l, h, panels, order) for l, h in zip(lo, hi)]
    grids = np.meshgrid(*[a[0] for a in axes], indexing="ij")
    wgrids = np.meshgrid(*[a[1] for a in axes], indexing="ij")
    X = np.stack([g.reshape(-1) for g in grids], axis=1)
    W = np.prod(np.stack([g.reshape(-1) for g in wgrids], axis=1), axis=1)
    return X, W


def cone_rule(axis, half_angle: float, order: int):
    """Rule on the spherical cap ``{w : angle(w, axis) <= half_angle}``.

    Gauss-Legendre in the polar angle (with the ``sin^(n-2)`` Jacobian) times
    :func:`sphere_rule` on the transverse sphere; integrands that vanish
    smoothly at the rim converge quickly.
    """
    a = np.asarray(axis, dtype=float)
    a = a / np.linalg.norm(a)
    n = a.size
    if n == 1:
        return a[None].copy(), np.ones(1)
    if n == 2:
        phi0 = np.arctan2(a[1], a[0])
        phi, w = gauss_legendre(phi0 - half_angle, phi0 + half_angle, order)
        return np.stack([np.cos(phi), np.sin(phi)], axis=1), w
    psi, wpsi = gauss_legendre(0.0, half_angle, order)
    wpsi = wpsi * np.sin(psi) ** (n - 2)
    sub, wsub = sphere_rule(n - 1, order)
    # orthonormal frame whose first column is the axis
    Q, _ = np.linalg.qr(np.column_stack([a, np.eye(n)]))
    Q = Q[:, :n] * np.sign(Q[:, 0] @ a)
    perp = sub @ Q[:, 1:].T
    dirs = np.cos(psi)[:, None, None] * a + np.sin(psi)[:, None, None] * perp[None]
    w = wpsi[:, None] * wsub[None]
    return dirs.reshape(-1, n), w.reshape(-1)
