"""Domains star-shaped with respect to a ball.

Every domain carries an inscribed ball (the support of the mollifier) and
offers membership tests, ray exit distances, masked-grid quadrature nodes
and summary statistics. Exit distances are analytic for the convex shapes
and found by bisection on :meth:`Domain.contains` otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import ConvexHull
from scipy.spatial.distance import pdist

from .quadrature import ball_volume

BISECTION_STEPS = 80


@dataclass(frozen=True)
class DomainStats:
    """Diameters and measures of a domain and its inscribed ball."""

    R: float
    rho: float
    vol: float
    vol_ball: float

    @property
    def ratio_diam(self) -> float:
        return self.R / self.rho

    @property
    def ratio_vol(self) -> float:
        return self.vol / self.vol_ball


@dataclass(frozen=True)
class StarCheck:
    ok: bool
    witness: Optional[Tuple[np.ndarray, np.ndarray]] = None  # (ball point, domain point)
    outside_fraction: float = 0.0


def _as_points(X, n: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None]
    if X.shape[-1] != n:
        raise ValueError(f"expected points in R^{n}, got shape {X.shape}")
    return X


def _max_pairwise(P: np.ndarray) -> float:
    if len(P) > P.shape[1] + 1 and P.shape[1] > 1:
        try:
            P = P[ConvexHull(P).vertices]
        except Exception:  # degenerate hull; fall back to all points
            pass
    return float(pdist(P).max()) if len(P) > 1 else 0.0


class Domain:
    """Base class. Subclasses set ``n``, ``ball_center``, ``ball_radius`` and implement ``contains``."""

    n: int
    ball_center: np.ndarray
    ball_radius: float

    def _init_ball(self, center, radius):
        self.ball_center = np.array(center, dtype=float).reshape(-1)
        self.ball_radius = float(radius)
        if self.ball_center.size != self.n:
            raise ValueError("inscribed ball center has the wrong dimension")
        if not self.ball_radius > 0:
            raise ValueError("inscribed ball radius must be positive")
        self._node_cache = {}
        self._stats_cache = {}

    # interface ---------------------------------------------------------------

    def contains(self, X) -> np.ndarray:
        raise NotImplementedError

    def bounding_box(self) -> Tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def diameter(self) -> float:
        X, _ = self.quadrature_nodes(6 if self.n <= 2 else 4)
        return _max_pairwise(X)

    def volume(self) -> float:
        return float(np.sum(self.quadrature_nodes(7 if self.n <= 2 else 5)[1]))

    def exit_distance(self, X, D) -> np.ndarray:
        """Distance ``lam`` from ``X`` along unit directions ``D`` to the boundary.

        Requires each ray to leave the domain once (true for points of a
        star-shaped domain seen from its ball).
        """
        X = _as_points(X, self.n)
        D = _as_points(D, self.n)
        lo = np.zeros(np.broadcast_shapes(X.shape, D.shape)[0])
        blo, bhi = self.bounding_box()
        hi = np.full_like(lo, 2.0 * float(np.linalg.norm(bhi - blo)) + 1.0)
        for _ in range(BISECTION_STEPS):
            mid = 0.5 * (lo + hi)
            inside = self.contains(X + mid[:, None] * D)
            lo = np.where(inside, mid, lo)
            hi = np.where(inside, hi, mid)
        return 0.5 * (lo + hi)

    # derived ----------------------------------------------------------------

    def ray_exit(self, z, x) -> float:
        """``T = sup{t >= 1 : z + t (x - z) in domain}``."""
        z = np.asarray(z, dtype=float)
        x = np.asarray(x, dtype=float)
        v = x - z
        L = float(np.linalg.norm(v))
        if L == 0.0:
            raise ValueError("degenerate ray: x coincides with z")
        lam = float(self.exit_distance(x[None], (v / L)[None])[0])
        return 1.0 + lam / L

    def quadrature_nodes(self, level: int):
        """Midpoints of a uniform grid on the bounding box that fall inside the domain.

        The longest box side is split into ``4 * 2**level`` cells and the
        other sides into cells of at most that size; every retained node
        carries the cell volume as weight.
        """
        if level < 1:
            raise ValueError("quadrature level must be >= 1")
        if level not in self._node_cache:
            lo, hi = self.bounding_box()
            h = float(np.max(hi - lo)) / (4 * 2**level)
            axes = []
            cell = 1.0
            for a, b in zip(lo, hi):
                k = max(1, int(np.ceil((b - a) / h - 1e-9)))
                hk = (b - a) / k
                axes.append(a + hk * (np.arange(k) + 0.5))
                cell *= hk
            grid = np.stack([g.reshape(-1) for g in np.meshgrid(*axes, indexing="ij")], axis=1)
            X = grid[self.contains(grid)]
            W = np.full(len(X), cell)
            X.setflags(write=False)
            W.setflags(write=False)
            self._node_cache[level] = (X, W)
        return self._node_cache[level]

    def stats(self) -> DomainStats:
        if "stats" not in self._stats_cache:
            self._stats_cache["stats"] = DomainStats(
                R=self.diameter(),
                rho=2.0 * self.ball_radius,
                vol=self.volume(),
                vol_ball=ball_volume(self.n, self.ball_radius),
            )
        return self._stats_cache["stats"]

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        """Uniform samples from the domain by rejection from the bounding box."""
        lo, hi = self.bounding_box()
        out = []
        got = 0
        while got < count:
            Y = rng.uniform(lo, hi, size=(max(64, 2 * (count - got)), self.n))
            Y = Y[self.contains(Y)]
            out.append(Y)
            got += len(Y)
        return np.concatenate(out)[:count]

    def sample_ball(self, count: int, rng: np.random.Generator, shrink: float = 1.0) -> np.ndarray:
        d = rng.normal(size=(count, self.n))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        r = self.ball_radius * shrink * rng.uniform(size=count) ** (1.0 / self.n)
        return self.ball_center + r[:, None] * d

    def verify_star_shape(self, samples: int = 2000, seed: int = 0, steps: int = 65) -> StarCheck:
        """Monte Carlo check that segments from ball points to domain points stay inside.

        Also checks that the inscribed ball itself lies in the domain. Returns
        the pair whose segment has the largest fraction of points outside.
        """
        if samples < 1:
            raise ValueError("need at least one sample")
        rng = np.random.default_rng(seed)
        b = self.sample_ball(samples, rng, shrink=1.0 - 1e-9)
        if not np.all(self.contains(b)):
            bad = b[~self.contains(b)][0]
            return StarCheck(False, (bad, bad), 1.0)
        y = self.sample(samples, rng)
        t = np.linspace(0.0, 1.0, steps)
        pts = b[:, None, :] + t[None, :, None] * (y - b)[:, None, :]
        inside = self.contains(pts.reshape(-1, self.n)).reshape(samples, steps)
        frac = 1.0 - inside.mean(axis=1)
        k = int(np.argmax(frac))
        if frac[k] == 0.0:
            return StarCheck(True)
        return StarCheck(False, (b[k], y[k]), float(frac[k]))


class Ball(Domain):
    """Open ball; the inscribed ball defaults to the domain itself."""

    def __init__(self, center, radius: float, ball: Optional[Tuple[Sequence[float], float]] = None):
        self.center = np.array(center, dtype=float).reshape(-1)
        self.n = self.center.size
        self.radius = float(radius)
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        bc, br = ball if ball is not None else (self.center, self.radius)
        self._init_ball(bc, br)

    def contains(self, X):
        X = np.asarray(X, dtype=float)
        return np.sum((X - self.center) ** 2, axis=-1) < self.radius**2

    def bounding_box(self):
        return self.center - self.radius, self.center + self.radius

    def diameter(self):
        return 2.0 * self.radius

    def volume(self):
        return ball_volume(self.n, self.radius)

    def exit_distance(self, X, D):
        X = _as_points(X, self.n) - self.center
        D = _as_points(D, self.n)
        b = np.sum(X * D, axis=-1)
        c = np.sum(X * X, axis=-1) - self.radius**2
        return -b + np.sqrt(np.maximum(b * b - c, 0.0))


class Ellipsoid(Domain):
    """``{x : |Q^T (x - c) / a| < 1}`` with semi-axes ``a`` and rotation ``Q``."""

    def __init__(self, center, semi_axes, rotation=None, ball=None):
        self.center = np.array(center, dtype=float).reshape(-1)
        self.n = self.center.size
        self.semi_axes = np.array(semi_axes, dtype=float).reshape(-1)
        if self.semi_axes.size != self.n or np.any(self.semi_axes <= 0):
            raise ValueError("semi-axes must be positive, one per dimension")
        self.rotation = np.eye(self.n) if rotation is None else np.array(rotation, dtype=float)
        bc, br = ball if ball is not None else (self.center, float(self.semi_axes.min()))
        self._init_ball(bc, br)

    def _local(self, X):
        return (np.asarray(X, dtype=float) - self.center) @ self.rotation / self.semi_axes

    def contains(self, X):
        return np.sum(self._local(X) ** 2, axis=-1) < 1.0

    def bounding_box(self):
        half = np.sqrt(np.sum((self.rotation * self.semi_axes) ** 2, axis=1))
        return self.center - half, self.center + half

    def diameter(self):
        return 2.0 * float(self.semi_axes.max())

    def volume(self):
        return ball_volume(self.n) * float(np.prod(self.semi_axes))

    def exit_distance(self, X, D):
        P = self._local(_as_points(X, self.n))
        V = (_as_points(D, self.n) @ self.rotation) / self.semi_axes
        a = np.sum(V * V, axis=-1)
        b = np.sum(P * V, axis=-1)
        c = np.sum(P * P, axis=-1) - 1.0
        return (-b + np.sqrt(np.maximum(b * b - a * c, 0.0))) / a


class Cigar(Domain):
    """Points within ``radius`` of the segment ``[p0, p1]`` (a capsule)."""

    def __init__(self, p0, p1, radius: float, ball=None):
        self.p0 = np.array(p0, dtype=float).reshape(-1)
        self.p1 = np.array(p1, dtype=float).reshape(-1)
        self.n = self.p0.size
        self.radius = float(radius)
        if not self.radius > 0:
            raise ValueError("tube radius must be positive")
        self.length = float(np.linalg.norm(self.p1 - self.p0))
        bc, br = ball if ball is not None else (0.5 * (self.p0 + self.p1), self.radius)
        self._init_ball(bc, br)

    def segment_distance(self, X):
        X = np.asarray(X, dtype=float)
        v = self.p1 - self.p0
        if self.length == 0.0:
            return np.linalg.norm(X - self.p0, axis=-1)
        t = np.clip(((X - self.p0) @ v) / self.length**2, 0.0, 1.0)
        return np.linalg.norm(X - self.p0 - t[..., None] * v, axis=-1)

    def contains(self, X):
        return self.segment_distance(X) < self.radius

    def bounding_box(self):
        lo = np.minimum(self.p0, self.p1) - self.radius
        hi = np.maximum(self.p0, self.p1) + self.radius
        return lo, hi

    def diameter(self):
        return self.length + 2.0 * self.radius

    def volume(self):
        if self.n == 1:
            return self.length + 2.0 * self.radius
        return ball_volume(self.n, self.radius) + ball_volume(self.n - 1, self.radius) * self.length

    def exit_distance(self, X, D):
        # The capsule is convex, so the exit time is the largest far-intersection
        # time over its three convex pieces (two end balls and the finite tube).
        X = _as_points(X, self.n)
        D = _as_points(D, self.n)
        best = np.full(np.broadcast_shapes(X.shape, D.shape)[0], -np.inf)
        r2 = self.radius**2
        for p in (self.p0, self.p1):
            Y = X - p
            b = np.sum(Y * D, axis=-1)
            disc = b * b - (np.sum(Y * Y, axis=-1) - r2)
            far = np.where(disc >= 0, -b + np.sqrt(np.maximum(disc, 0.0)), -np.inf)
            best = np.maximum(best, far)
        if self.length > 0 and self.n > 1:
            e = (self.p1 - self.p0) / self.length
            Y = X - self.p0
            ya = Y @ e
            da = D @ e
            Yp = Y - ya[:, None] * e
            Dp = D - da[:, None] * e
            a = np.sum(Dp * Dp, axis=-1)
            b = np.sum(Yp * Dp, axis=-1)
            c = np.sum(Yp * Yp, axis=-1) - r2
            with np.errstate(divide="ignore", invalid="ignore"):
                disc = b * b - a * c
                t_hi = np.where(a > 0, (-b + np.sqrt(np.maximum(disc, 0.0))) / a, np.inf)
                t_lo = np.where(a > 0, (-b - np.sqrt(np.maximum(disc, 0.0))) / a, -np.inf)
                ok_rad = (a > 0) & (disc >= 0) | (a == 0) & (c < 0)
                s1 = np.where(da != 0, (0.0 - ya) / da, np.where(ya >= 0, -np.inf, np.inf))
                s2 = np.where(da != 0, (self.length - ya) / da, np.where(ya <= self.length, np.inf, -np.inf))
            s_lo = np.minimum(s1, s2)
            s_hi = np.maximum(s1, s2)
            lo = np.maximum(t_lo, s_lo)
            hi = np.minimum(t_hi, s_hi)
            far = np.where(ok_rad & (hi >= lo), hi, -np.inf)
            best = np.maximum(best, far)
        return np.maximum(best, 0.0)


class RadialStar2D(Domain):
    """Planar domain ``{c + r w(phi) : 0 <= r < a0 + sum a_k cos k phi + b_k sin k phi}``."""

    def __init__(self, center, a0: float, cos_coeffs=(), sin_coeffs=(), ball=None):
        self.center = np.array(center, dtype=float).reshape(-1)
        self.n = 2
        if self.center.size != 2:
            raise ValueError("RadialStar2D lives in the plane")
        self.a0 = float(a0)
        K = max(len(cos_coeffs), len(sin_coeffs))
        self.cos_coeffs = np.zeros(K)
        self.sin_coeffs = np.zeros(K)
        self.cos_coeffs[: len(cos_coeffs)] = cos_coeffs
        self.sin_coeffs[: len(sin_coeffs)] = sin_coeffs
        phi = np.linspace(0, 2 * np.pi, 4096, endpoint=False)
        if self.profile(phi).min() <= 0:
            raise ValueError("radial profile must stay positive")
        if ball is None:
            ball = (self.center, 0.5 * float(self.profile(phi).min()))
        self._init_ball(*ball)

    def profile(self, phi):
        phi = np.asarray(phi, dtype=float)
        k = np.arange(1, len(self.cos_coeffs) + 1)
        kp = phi[..., None] * k
        return self.a0 + np.cos(kp) @ self.cos_coeffs + np.sin(kp) @ self.sin_coeffs

    def contains(self, X):
        Y = np.asarray(X, dtype=float) - self.center
        return np.hypot(Y[..., 0], Y[..., 1]) < self.profile(np.arctan2(Y[..., 1], Y[..., 0]))

    def boundary(self, count: int = 4096) -> np.ndarray:
        phi = np.linspace(0, 2 * np.pi, count, endpoint=False)
        r = self.profile(phi)
        return self.center + r[:, None] * np.stack([np.cos(phi), np.sin(phi)], axis=1)

    def bounding_box(self):
        B = self.boundary()
        pad = 1e-3 * float(np.max(B.max(0) - B.min(0)))
        return B.min(0) - pad, B.max(0) + pad

    def diameter(self):
        return _max_pairwise(self.boundary())

    def volume(self):
        return float(np.pi * (self.a0**2 + 0.5 * np.sum(self.cos_coeffs**2 + self.sin_coeffs**2)))


class Intersection(Domain):
    """Intersection of two domains, with a caller-supplied inscribed ball."""

    def __init__(self, first: Domain, second: Domain, ball):
        if first.n != second.n:
            raise ValueError("dimension mismatch")
        self.first = first
        self.second = second
        self.n = first.n
        self._init_ball(*ball)

    def contains(self, X):
        return self.first.contains(X) & self.second.contains(X)

    def bounding_box(self):
        a_lo, a_hi = self.first.bounding_box()
        b_lo, b_hi = self.second.bounding_box()
        return np.maximum(a_lo, b_lo), np.minimum(a_hi, b_hi)

    def exit_distance(self, X, D):
        return np.minimum(self.first.exit_distance(X, D), self.second.exit_distance(X, D))


class Crescent(Domain):
    """Disk minus an offset disk; not star-shaped with respect to any ball in general."""

    def __init__(self, outer_center, outer_radius, inner_center, inner_radius, ball):
        self.outer = Ball(outer_center, outer_radius)
        self.inner = Ball(inner_center, inner_radius)
        self.n = self.outer.n
        self._init_ball(*ball)

    def contains(self, X):
        return self.outer.contains(X) & ~self.inner.contains(X)

    def bounding_box(self):
        return self.outer.bounding_box()


# --- functional interface ----------------------------------------------------------


def contains(domain: Domain, x):
    out = domain.contains(np.asarray(x, dtype=float))
    return bool(out) if np.ndim(out) == 0 else out


def ray_exit(domain: Domain, z, x) -> float:
    return domain.ray_exit(z, x)


def domain_stats(domain: Domain) -> DomainStats:
    return domain.stats()


def quadrature_nodes(domain: Domain, level: int):
    return domain.quadrature_nodes(level)


def verify_star_shape(domain: Domain, samples: int = 2000, seed: int = 0) -> StarCheck:
    return domain.verify_star_shape(samples, seed)


def make_domain(spec: dict) -> Domain:
    """Build a domain from a plain mapping (as read from a config file).

    Recognized ``shape`` values: ``ball``, ``ellipsoid``, ``cigar``,
    ``radial_star_2d``. An optional ``ball`` entry ``{"center", "radius"}``
    overrides the default inscribed ball.
    """
    spec = dict(spec)
    shape = spec.pop("shape")
    ball = spec.pop("ball", None)
    ball = None if ball is None else (ball["center"], ball["radius"])
    if shape == "ball":
        return Ball(spec["center"], spec["radius"], ball=ball)
    if shape == "ellipsoid":
        return Ellipsoid(spec["center"], spec["semi_axes"], spec.get("rotation"), ball=ball)
    if shape == "cigar":
        return Cigar(spec["p0"], spec["p1"], spec["radius"], ball=ball)
    if shape == "radial_star_2d":
        return RadialStar2D(
            spec["center"], spec["a0"], spec.get("cos", ()), spec.get("sin", ()), ball=ball
        )
    raise ValueError(f"unknown shape {shape!r}")
