"""Averaged Bogovskii-type operator on a domain star-shaped with respect to a ball.

For an ``l``-form ``u`` supported in the closed domain,

    B u(x) = int theta(z) int_1^T(x,z) t^(l-1) (z - x) _| u(z + t (x - z)) dt dz,

where ``T(x, z)`` is the exit parameter of the ray from ``z`` through ``x``.
The production evaluator writes the same integral in polar coordinates
centered at ``x``: with ``z = x + rho w`` and ``y = x - sigma w``,

    B u(x) = int_{S} w _| int_0^lam(x,-w) u(x - sigma w) K(sigma, w) dsigma dw,
    K(sigma, w) = int_0^inf theta(x + rho w) rho^(n-l) (rho + sigma)^(l-1) drho.

The Jacobian absorbs the weak singularity at ``z = x``, so every integral is
smooth and handled by plain Gauss rules. ``K`` is a polynomial in ``sigma``
whose coefficients are radial bump moments along the chord of the ball.

The ray form (with an exclusion radius around ``z = x``) and the ``(s, y)``
form are kept as independent cross-checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb
from typing import Callable, Optional

import numpy as np

from . import exterior as ext
from .exterior import DegreeError, FormValue
from .geometry import Domain
from .mollifier import Mollifier, ball_rule, eval_theta
from .polyform import FieldForm, exterior_derivative_fd, fd_gradient
from .quadrature import composite_gauss, cone_rule, gauss_legendre, sphere_rule


@dataclass(frozen=True)
class BogovskiiConfig:
    """Operator data.

    Attributes:
        mollifier: bump supported in the inscribed ball of ``domain``.
        degree: degree ``l`` of the input forms.
        domain: star-shaped domain (exit distances, support mask).
        t_quad_order: Gauss order per panel along each ray.
        ray_panels: number of panels along each ray.
        sphere_order: direction rule parameter (see :func:`sphere_rule`),
            used for points within the ball.
        cone_order: cap rule parameter (see :func:`cone_rule`) for points
            outside the ball, where only a cone of directions meets the bump.
        rho_order: Gauss order along the chord of the ball.
        singular_cutoff: exclusion radius around ``z = x`` for the ray form;
            defaults to ``1e-3`` times the ball diameter.
        z_radial_order, z_sphere_order: ball rule used by the ray and ``(s, y)`` forms.
    """

    mollifier: Mollifier
    degree: int
    domain: Domain
    t_quad_order: int = 32
    ray_panels: int = 4
    sphere_order: int = 64
    rho_order: int = 48
    singular_cutoff: Optional[float] = None
    z_radial_order: int = 48
    z_sphere_order: int = 32
    cone_order: int = 32
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        n = self.mollifier.n
        if self.domain.n != n:
            raise ValueError("mollifier and domain dimensions differ")
        if not 1 <= self.degree <= n:
            raise DegreeError(f"degree must be in 1..{n}, got {self.degree}")
        if self.singular_cutoff is None:
            object.__setattr__(self, "singular_cutoff", 2e-3 * self.mollifier.radius)
        if not self.singular_cutoff > 0:
            raise ValueError("singular cutoff must be positive")
        # the bump must live in the inscribed ball
        gap = np.linalg.norm(self.mollifier.center - self.domain.ball_center)
        if gap + self.mollifier.radius > self.domain.ball_radius * (1 + 1e-12):
            raise ValueError("mollifier support is not inside the inscribed ball")

    @property
    def n(self) -> int:
        return self.mollifier.n

    def directions(self):
        if "dirs" not in self._cache:
            self._cache["dirs"] = sphere_rule(self.n, self.sphere_order)
        return self._cache["dirs"]

    def ray_rule(self):
        if "ray" not in self._cache:
            self._cache["ray"] = composite_gauss(0.0, 1.0, self.ray_panels, self.t_quad_order)
        return self._cache["ray"]

    def z_rule(self):
        if "z" not in self._cache:
            self._cache["z"] = ball_rule(self.mollifier, self.z_radial_order, self.z_sphere_order)
        return self._cache["z"]

    def with_degree(self, degree: int) -> "BogovskiiConfig":
        return BogovskiiConfig(
            self.mollifier, degree, self.domain, self.t_quad_order, self.ray_panels,
            self.sphere_order, self.rho_order, self.singular_cutoff,
            self.z_radial_order, self.z_sphere_order, self.cone_order, self._cache,
        )


def _unit_rule(order: int):
    t, w = gauss_legendre(0.0, 1.0, order)
    return t, w


def _masked(u: Callable, domain: Domain, Y: np.ndarray) -> np.ndarray:
    vals = np.asarray(u(Y), dtype=float).reshape(len(Y), -1)
    nz = np.flatnonzero(np.any(vals != 0.0, axis=1))
    vals[nz] *= domain.contains(Y[nz])[:, None]
    return vals


def _chord(mol: Mollifier, x: np.ndarray, dirs: np.ndarray, order: int):
    """Gauss nodes ``rho`` (dirs x order) on the part of each ray ``x + rho w`` inside the ball."""
    d = x - mol.center
    b = dirs @ d
    disc = b * b - (d @ d - mol.radius**2)
    sq = np.sqrt(np.maximum(disc, 0.0))
    lo = np.maximum(-b - sq, 0.0)
    hi = np.maximum(-b + sq, 0.0)
    hi = np.where(disc > 0, hi, 0.0)
    lo = np.minimum(lo, hi)
    rho, w = gauss_legendre(lo, hi, order)
    return rho, w


def _directions(cfg: BogovskiiConfig, x: np.ndarray, support=None):
    """Direction rule at ``x``.

    Only directions ``w`` whose backward ray ``x - sigma w`` meets the input
    support and whose forward ray meets the bump contribute. Each condition
    that is informative (``x`` outside the respective ball) defines a cap;
    the narrower cap is integrated with :func:`cone_rule`, otherwise the full
    sphere rule is used.
    """
    mol = cfg.mollifier
    caps = []
    to_c = mol.center - x
    dist = float(np.linalg.norm(to_c))
    if dist > mol.radius * (1.0 + 1e-9):
        caps.append((float(np.arcsin(mol.radius / dist)), to_c))
    if support is not None:
        away = x - support[0]
        ds = float(np.linalg.norm(away))
        if ds > support[1] * (1.0 + 1e-9):
            caps.append((float(np.arcsin(support[1] / ds)), away))
    if cfg.n == 1 or not caps:
        return cfg.directions()
    angle, axis = min(caps, key=lambda c: c[0])
    return cone_rule(axis, angle, cfg.cone_order)


def _ray_samples(cfg: BogovskiiConfig, x: np.ndarray):
    """Directions, ray nodes ``sigma``, their weights and the sample points ``x - sigma w``."""
    dirs, wd = _directions(cfg, x)
    lam = cfg.domain.exit_distance(np.broadcast_to(x, dirs.shape), -dirs)
    tau, wt = cfg.ray_rule()
    sigma = lam[:, None] * tau[None]
    wsig = lam[:, None] * wt[None]
    Y = x[None, None, :] - sigma[..., None] * dirs[:, None, :]
    return dirs, wd, sigma, wsig, Y


def _b_kernel(cfg: BogovskiiConfig, x, dirs, sigma, weight=None):
    """``K(sigma, w)``; ``weight(z)`` optionally multiplies the bump."""
    n, l = cfg.n, cfg.degree
    rho, wr = _chord(cfg.mollifier, x, dirs, cfg.rho_order)
    Z = x + rho[..., None] * dirs[:, None, :]
    th = eval_theta(cfg.mollifier, Z.reshape(-1, n)).reshape(rho.shape)
    if weight is not None:
        th = th * weight(Z)
    K = np.zeros_like(sigma)
    for k in range(l):
        Mk = np.sum(wr * th * rho ** (n - l + k), axis=1)
        K += comb(l - 1, k) * sigma ** (l - 1 - k) * Mk[:, None]
    return K


def _q_kernel(cfg: BogovskiiConfig, x, dirs, sigma, weight=None):
    """``int phi(x + rho w) rho^(n-l) (rho + sigma)^(l-2) drho`` on the (direction, sigma) grid."""
    n, l = cfg.n, cfg.degree
    rho, wr = _chord(cfg.mollifier, x, dirs, cfg.rho_order)
    Z = x + rho[..., None] * dirs[:, None, :]
    th = eval_theta(cfg.mollifier, Z.reshape(-1, n)).reshape(rho.shape)
    if weight is not None:
        th = th * weight(Z)
    g = wr * th * rho ** (n - l)  # (dirs, rho)
    return np.einsum("dr,dsr->ds", g, (rho[:, None, :] + sigma[..., None]) ** (l - 2))


def _apply_group(cfg: BogovskiiConfig, u: Callable, X: np.ndarray, rules, support=None) -> np.ndarray:
    n, l = cfg.n, cfg.degree
    dirs = np.stack([r[0] for r in rules])  # (P, D, n)
    wd = np.stack([r[1] for r in rules])  # (P, D)
    P, D = wd.shape
    lam = cfg.domain.exit_distance(
        np.repeat(X, D, axis=0), -dirs.reshape(-1, n)
    ).reshape(P, D)
    s_lo = np.zeros_like(lam)
    s_hi = lam
    if support is not None:
        # restrict each ray to its chord through the support ball
        d = X[:, None, :] - support[0]
        b = np.sum(dirs * d, axis=-1)
        disc = b * b - (np.sum(d * d, axis=-1) - support[1] ** 2)
        sq = np.sqrt(np.maximum(disc, 0.0))
        s_hi = np.where(disc > 0, np.clip(b + sq, 0.0, lam), 0.0)
        s_lo = np.minimum(np.clip(b - sq, 0.0, lam), s_hi)
        # one smooth panel per chord
        tau, wt = _unit_rule(cfg.t_quad_order)
    else:
        tau, wt = cfg.ray_rule()
    span = s_hi - s_lo
    sigma = s_lo[..., None] + span[..., None] * tau
    wsig = span[..., None] * wt
    Y = X[:, None, None, :] - sigma[..., None] * dirs[:, :, None, :]
    vals = np.zeros(sigma.shape + (ext.dim(n, l),))
    hit = span > 0
    if hit.any():
        vals[hit] = _masked(u, cfg.domain, Y[hit].reshape(-1, n)).reshape(-1, len(tau), vals.shape[-1])
    # kernel moments along the chords of the ball
    mol = cfg.mollifier
    d = X[:, None, :] - mol.center
    b = np.sum(dirs * d, axis=-1)
    disc = b * b - (np.sum(d * d, axis=-1) - mol.radius**2)
    sq = np.sqrt(np.maximum(disc, 0.0))
    hi = np.where(disc > 0, np.maximum(-b + sq, 0.0), 0.0)
    lo = np.minimum(np.maximum(-b - sq, 0.0), hi)
    rho, wr = gauss_legendre(lo, hi, cfg.rho_order)  # (P, D, R)
    Z = X[:, None, None, :] + rho[..., None] * dirs[:, :, None, :]
    th = eval_theta(mol, Z.reshape(-1, n)).reshape(rho.shape)
    K = np.zeros_like(sigma)
    for k in range(l):
        Mk = np.sum(wr * th * rho ** (n - l + k), axis=-1)
        K += comb(l - 1, k) * sigma ** (l - 1 - k) * Mk[..., None]
    line = np.einsum("pds,pdsc->pdc", wsig * K, vals)
    con = ext.contract_coeffs(dirs.reshape(-1, n), line.reshape(P * D, -1), l, n)
    return np.einsum("pd,pdc->pc", wd, con.reshape(P, D, -1))


def apply_bogovskii(cfg: BogovskiiConfig, u: Callable, x, chunk: int = 32) -> np.ndarray | FormValue:
    """``B u`` at one point (returns :class:`FormValue`) or at the rows of ``x``.

    ``u`` maps ``(N, n)`` points to ``(N, C(n, l))`` coefficients; it is
    masked to the domain before use. Points outside the domain map to zero.
    Points are processed in chunks of ``chunk`` so that ``u`` is called on
    large batches.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    n, l = cfg.n, cfg.degree
    out = np.zeros((len(X), ext.dim(n, l - 1)))
    support = getattr(u, "support", None)
    groups = {}
    for a in np.flatnonzero(cfg.domain.contains(X)):
        rule = _directions(cfg, X[a], support)
        groups.setdefault(len(rule[1]), []).append((a, rule))
    for members in groups.values():
        for start in range(0, len(members), chunk):
            part = members[start:start + chunk]
            sel = np.array([a for a, _ in part])
            out[sel] = _apply_group(cfg, u, X[sel], [r for _, r in part], support)
    if single:
        return FormValue(n, l - 1, out[0])
    return out


def scalar_Q(cfg: BogovskiiConfig, f: Callable, m: int, x) -> np.ndarray:
    """One coefficient of the operator: the contraction factor ``(z - y)_m`` times ``f``.

    Equals ``Q_2 f - Q_1 (y_m f)``; ``m`` is 1-based.
    """
    X = np.atleast_2d(np.asarray(x, dtype=float))
    out = np.zeros(len(X))
    n = cfg.n
    for a in np.flatnonzero(cfg.domain.contains(X)):
        xa = X[a]
        dirs, wd, sigma, wsig, Y = _ray_samples(cfg, xa)
        fv = _masked(f, cfg.domain, Y.reshape(-1, n)).reshape(sigma.shape)
        K = _b_kernel(cfg, xa, dirs, sigma)
        out[a] = (wd * dirs[:, m - 1]) @ np.sum(wsig * K * fv, axis=1)
    return out


def component_Q(cfg: BogovskiiConfig, i: int, v: Callable, m: int, x, method: str = "polar") -> np.ndarray:
    """``Q_i v(x) = int_0^1 (1-s)^(n-l) int phi_i(y + (x-y)/s) v(y) dy ds / s^n``.

    ``phi_1 = theta``, ``phi_2 = z_m theta`` (``m`` 1-based). ``method`` is
    ``"polar"`` (rays from ``x``, default) or ``"sy"`` (substitution to ball
    nodes; only reliable for ``x`` away from the ball).
    """
    if i not in (1, 2):
        raise ValueError("i must be 1 or 2")
    X = np.atleast_2d(np.asarray(x, dtype=float))
    n, l = cfg.n, cfg.degree
    out = np.zeros(len(X))
    weight = (lambda Z: Z[..., m - 1]) if i == 2 else None
    for a in np.flatnonzero(cfg.domain.contains(X)):
        xa = X[a]
        if method == "polar":
            dirs, wd, sigma, wsig, Y = _ray_samples(cfg, xa)
            fv = _masked(v, cfg.domain, Y.reshape(-1, n)).reshape(sigma.shape)
            K = _q_kernel(cfg, xa, dirs, sigma, weight)
            out[a] = wd @ np.sum(wsig * K * fv, axis=1)
        elif method == "sy":
            Z, Wz = cfg.z_rule()
            if i == 2:
                Wz = Wz * Z[:, m - 1]
            s, ws, Y, keep = _sy_samples(cfg, xa, Z)
            fv = _masked(v, cfg.domain, Y.reshape(-1, n)).reshape(Y.shape[:2])
            out[a] = np.sum(Wz[keep] * np.sum(ws * (1 - s) ** (-l) * fv, axis=1))
        else:
            raise ValueError(f"unknown method {method!r}")
    return out


# --- independent representations ------------------------------------------------------------


def _exit_params(cfg: BogovskiiConfig, x: np.ndarray, Z: np.ndarray):
    V = x - Z
    L = np.linalg.norm(V, axis=1)
    keep = L > cfg.singular_cutoff
    E = V[keep] / L[keep, None]
    lam = cfg.domain.exit_distance(np.broadcast_to(x, E.shape), E)
    return keep, 1.0 + lam / L[keep]


def _sy_samples(cfg: BogovskiiConfig, x: np.ndarray, Z: np.ndarray):
    keep, T = _exit_params(cfg, x, Z)
    smax = 1.0 - 1.0 / T
    tau, wt = cfg.ray_rule()
    s = smax[:, None] * tau[None]
    ws = smax[:, None] * wt[None]
    Y = (x[None, None] - s[..., None] * Z[keep][:, None, :]) / (1.0 - s)[..., None]
    return s, ws, Y, keep


def apply_bogovskii_ray(cfg: BogovskiiConfig, u: Callable, x) -> np.ndarray:
    """Ray form over ball nodes ``z`` with ``t = 1 + (T - 1) tau^2``.

    Nodes within ``singular_cutoff`` of ``x`` are dropped.
    """
    X = np.atleast_2d(np.asarray(x, dtype=float))
    n, l = cfg.n, cfg.degree
    Z, Wz = cfg.z_rule()
    tau, wt = cfg.ray_rule()
    out = np.zeros((len(X), ext.dim(n, l - 1)))
    for a in np.flatnonzero(cfg.domain.contains(X)):
        xa = X[a]
        keep, T = _exit_params(cfg, xa, Z)
        Zk = Z[keep]
        t = 1.0 + (T - 1.0)[:, None] * tau[None] ** 2
        wtt = 2.0 * (T - 1.0)[:, None] * tau[None] * wt[None] * t ** (l - 1)
        Y = Zk[:, None, :] + t[..., None] * (xa - Zk)[:, None, :]
        vals = _masked(u, cfg.domain, Y.reshape(-1, n)).reshape(Y.shape[:2] + (-1,))
        line = np.einsum("zt,ztc->zc", wtt, vals)
        out[a] = Wz[keep] @ ext.contract_coeffs(Zk - xa, line, l, n)
    return out


def apply_bogovskii_sy(cfg: BogovskiiConfig, u: Callable, x) -> np.ndarray:
    """``int theta(z) int_0^(1-1/T) (1-s)^(-l-1) (z - x) _| u((x - s z)/(1 - s)) ds dz``."""
    X = np.atleast_2d(np.asarray(x, dtype=float))
    n, l = cfg.n, cfg.degree
    Z, Wz = cfg.z_rule()
    out = np.zeros((len(X), ext.dim(n, l - 1)))
    for a in np.flatnonzero(cfg.domain.contains(X)):
        xa = X[a]
        s, ws, Y, keep = _sy_samples(cfg, xa, Z)
        vals = _masked(u, cfg.domain, Y.reshape(-1, n)).reshape(Y.shape[:2] + (-1,))
        line = np.einsum("zs,zsc->zc", ws * (1.0 - s) ** (-l - 1), vals)
        out[a] = Wz[keep] @ ext.contract_coeffs(Z[keep] - xa, line, l, n)
    return out


# --- checks ------------------------------------------------------------------------------


def bogovskii_field(cfg: BogovskiiConfig, u: Callable) -> FieldForm:
    """``B u`` wrapped as a callable ``(l-1)``-form."""
    return FieldForm(cfg.n, cfg.degree - 1, lambda X: apply_bogovskii(cfg, u, X))


def exactness_check_bogovskii(
    cfg: BogovskiiConfig,
    w: FieldForm,
    h: float,
    points: Optional[np.ndarray] = None,
    count: int = 24,
    seed: int = 0,
) -> float:
    """``max |d B (dw) - dw| / max |dw|`` over sample points.

    ``w`` is a compactly supported ``(l-1)``-form with known derivative. The
    exterior derivative of ``B u`` is taken by Richardson-extrapolated
    central differences with step ``h``.
    """
    R = cfg.domain.stats().R
    if h > 0.01 * R:
        raise ValueError(f"finite-difference step {h} exceeds 0.01 * diam = {0.01 * R}")
    if w.degree != cfg.degree - 1:
        raise DegreeError(f"w must be a {cfg.degree - 1}-form")
    u = w.d()
    if points is None:
        points = cfg.domain.sample(count, np.random.default_rng(seed))
    points = np.atleast_2d(points)
    uv = u(points)
    scale = float(np.max(np.abs(uv)))
    if scale == 0.0:
        return 0.0
    Bu = bogovskii_field(cfg, u)
    dBu = exterior_derivative_fd(Bu, points, h)
    return float(np.max(np.abs(dBu - uv)) / scale)


class _NodeForm:
    """Form known only at a fixed node set, with its exterior derivative there."""

    def __init__(self, n, degree, X, values, derivative=None):
        self.n, self.degree = n, degree
        self._X, self._values, self._derivative = X, values, derivative

    def __call__(self, X):
        if X is not self._X and not (X.shape == self._X.shape and np.array_equal(X, self._X)):
            raise ValueError("this form is only tabulated at its quadrature nodes")
        return self._values

    def d(self):
        if self._derivative is None:
            raise ValueError("derivative not tabulated")
        return self._derivative


def tabulated_output(cfg: BogovskiiConfig, u: Callable, domain: Domain, level: int, h: Optional[float] = None):
    """``B u`` and ``d B u`` (central differences) at the quadrature nodes of ``domain``.

    The result behaves like a form on those nodes only, which is what
    integral checks such as the trace pairing need, and avoids re-evaluating
    the operator per test function.
    """
    X, _ = domain.quadrature_nodes(level)
    if h is None:
        h = 1e-4 * cfg.mollifier.radius
    Bu = bogovskii_field(cfg, u)
    vals = Bu(X)
    grads = fd_gradient(Bu, X, h, richardson=False)
    dvals = ext.d_coeffs(grads, cfg.degree - 1, cfg.n)
    dform = _NodeForm(cfg.n, cfg.degree, X, dvals)
    return _NodeForm(cfg.n, cfg.degree - 1, X, vals, dform)


def trace_residuals(cfg: BogovskiiConfig, u: Callable, domain: Domain, psis, level: int, rel: float = 1e-3):
    """``(|<tr B u, psi>|, tolerance)`` for each test form ``psi``.

    The pairing is computed on grids ``level - 1`` and ``level``. The
    tolerance combines ``rel`` times the L^1 size of the integrands with the
    change between the two grids, an estimate of the quadrature error. A
    nonzero trace does not shrink under refinement and so fails the test.
    """
    from .polyform import trace_pairing

    coarse = tabulated_output(cfg, u, domain, level - 1)
    fine = tabulated_output(cfg, u, domain, level)
    out = []
    for psi in psis:
        v0 = trace_pairing(coarse, psi, domain, level - 1)
        v1, scale = trace_pairing(fine, psi, domain, level, full=True)
        out.append((abs(v1), rel * scale + abs(v1 - v0)))
    return out
