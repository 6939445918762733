"""Explicit bound formulas and their empirical counterparts.

The continuity bounds have the shape ``C(n, l) (R / rho) kappa`` where
``kappa`` depends on the volume ratio ``|Omega| / |B|`` only. ``C(n, l)`` is
not known numerically, so every bound takes an explicit ``scale`` that is
calibrated once on the most symmetric member of a domain family.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import log, sqrt
from typing import List, Optional, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.special import jv

from .exterior import DegreeError
from .geometry import Cigar, Domain, DomainStats
from .mollifier import build_bump
from .polyform import PolyForm, bump_cut_form, fd_gradient, random_closed_form
from .quadrature import sphere_rule

KINDS = ("poincare", "bogovskii")


class BoundRangeError(ValueError):
    """A bound was requested outside the range where it is proved."""


def _check(n: int, l: int) -> None:
    if not 1 <= l <= n:
        raise DegreeError(f"need 1 <= l <= n, got n={n}, l={l}")


def _vol_ratio(stats) -> float:
    v = stats.ratio_vol if isinstance(stats, DomainStats) else float(stats)
    if not v > 1.0:
        raise BoundRangeError(f"volume ratio |Omega|/|B| = {v!r} must exceed 1")
    return v


def poincare_branch(n: int, l: int) -> int:
    """1 if ``2l > n``; 2 if ``2l`` is ``n`` or ``n - 1``; 3 if ``2l <= n - 2``."""
    _check(n, l)
    if 2 * l > n:
        return 1
    if 2 * l >= n - 1:
        return 2
    return 3


def bogovskii_branch(n: int, l: int) -> int:
    """1 if ``l < n/2 + 1``, else 2."""
    _check(n, l)
    return 1 if 2 * l < n + 2 else 2


def kappa_poincare(n: int, l: int, stats) -> float:
    """Volume-ratio factor of the Poincare-type bound.

    ``stats`` is a :class:`DomainStats` or the volume ratio itself. The
    third branch keeps the log exponent ``n / (2 (n - l - 1))``.
    """
    branch = poincare_branch(n, l)
    if branch == 1:
        return 1.0
    v = _vol_ratio(stats)
    power = v ** ((n - 2 * l) / (2 * (n - l)))
    if branch == 2:
        return power * log(v) ** (n / (2 * (n - l)))
    return power * log(v) ** (n / (2 * (n - l - 1)))


def kappa_bogovskii(n: int, l: int, stats) -> float:
    """Volume-ratio factor of the Bogovskii-type bound."""
    if bogovskii_branch(n, l) == 1:
        return 1.0
    v = _vol_ratio(stats)
    return 1.0 + log(v) ** (n / (2 * (l - 1))) * v ** ((2 * (l - 1) - n) / (2 * (l - 1)))


def kappa(kind: str, n: int, l: int, stats, floor: bool = False) -> float:
    """Dispatch on ``kind``; with ``floor=True`` the result is ``max(1, kappa)``
    and a volume ratio ``<= 1`` (the domain is its own ball) gives 1."""
    fn = {"poincare": kappa_poincare, "bogovskii": kappa_bogovskii}.get(kind)
    if fn is None:
        raise ValueError(f"unknown operator kind {kind!r}")
    if floor:
        v = stats.ratio_vol if isinstance(stats, DomainStats) else float(stats)
        if v <= 1.0:
            _check(n, l)
            return 1.0
        return max(1.0, fn(n, l, stats))
    return fn(n, l, stats)


def h1_bound(kind: str, n: int, l: int, stats: DomainStats, scale: float = 1.0, kappa_floor: bool = False) -> float:
    """``scale * (R / rho) * kappa``."""
    if not scale > 0:
        raise ValueError("scale must be positive")
    return scale * stats.ratio_diam * kappa(kind, n, l, stats, floor=kappa_floor)


def h2_bound_poincare(n: int, l: int, rho: float, scale: float = 1.0) -> float:
    """``scale / rho``; proved only when ``2l > n``."""
    _check(n, l)
    if 2 * l <= n:
        raise BoundRangeError(f"second-order bound needs 2l > n (n={n}, l={l}): outside the supported range")
    if not rho > 0:
        raise ValueError("rho must be positive")
    return scale / rho


def poincare_constant_KP(n: int, stats, scale: float = 1.0) -> float:
    """Bound on the mean-zero Poincare constant of a piece of a chain.

    ``scale * (R/rho) * (1 + log(v)^(n/(2(n-1))) * v^((n-2)/(2(n-1))))`` with
    ``v`` the volume ratio. ``stats`` may also be a ``(ratio_diam, ratio_vol)`` pair.
    """
    if isinstance(stats, DomainStats):
        rd, v = stats.ratio_diam, stats.ratio_vol
    else:
        rd, v = stats
    v = _vol_ratio(v)
    if n < 2:
        raise ValueError("n must be at least 2")
    return scale * rd * (1.0 + log(v) ** (n / (2 * (n - 1))) * v ** ((n - 2) / (2 * (n - 1))))


def chain_bound(
    bc: bool,
    l: int,
    C_T: float,
    C_P: float = 1.0,
    C_S: float = 0.0,
    D_T: float = 1.0,
    d_T: float = 1.0,
    dim_const: float = 1.0,
    n: Optional[int] = None,
) -> float:
    """Constant of the glued primitive on a chain.

    Without boundary conditions: ``2 C_T`` for ``l = 1`` and
    ``2 C_T sqrt(1 + 32 C_S^2 (C_T C_P D_T / d_T + 1)^4)`` otherwise. With
    boundary conditions: ``4 C_T sqrt(2 + C_S^2 c^2 (D_T / d_T)^2 C_T^2)``
    with ``c = dim_const``; top degree (``l = n``) is not covered.
    """
    if l < 1:
        raise DegreeError("l must be >= 1")
    if min(C_T, C_P, D_T, d_T, dim_const) <= 0 or C_S < 0:
        raise ValueError("chain constants must be positive")
    if bc:
        if n is not None and l >= n:
            raise BoundRangeError(f"bounded-trace gluing is not covered for l = n = {n}")
        return 4.0 * C_T * sqrt(2.0 + C_S**2 * dim_const**2 * (D_T / d_T) ** 2 * C_T**2)
    if l == 1:
        return 2.0 * C_T
    return 2.0 * C_T * sqrt(1.0 + 32.0 * C_S**2 * (C_T * C_P * D_T / d_T + 1.0) ** 4)


def dirichlet_constant(n: int) -> float:
    """``1 / j`` with ``j`` the first zero of ``J_{n/2-1}``.

    Any domain of diameter ``D`` sits in a ball of radius ``D``, whose first
    Dirichlet eigenvalue is ``(j / D)^2``; hence ``||w|| <= (1/j) D |w|_{H^1}``
    for ``w`` vanishing on the boundary.
    """
    nu = n / 2.0 - 1.0
    # the first zero lies in (nu, nu + 2 sqrt(nu + 1) + 2.5)
    lo = max(nu, 0.0) + 1e-9
    grid = np.linspace(lo, nu + 2.0 * sqrt(nu + 1.0) + 3.0, 400)
    vals = jv(nu, grid)
    k = int(np.flatnonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))[0])
    return 1.0 / brentq(lambda t: jv(nu, t), grid[k], grid[k + 1], xtol=1e-14)


# --- empirical ratios ---------------------------------------------------------------------


@dataclass
class BoundReport:
    operator_kind: str
    n: int
    l: int
    stats: DomainStats
    kappa: float
    bound_value: float
    scale: float
    empirical_ratio: float
    samples: List[float] = field(default_factory=list)
    count: int = 0
    seed: int = 0
    degree: int = 0


def default_level(domain: Domain, cells_per_ball: int = 12) -> int:
    """Grid level whose cells are about ``rho / cells_per_ball`` wide."""
    lo, hi = domain.bounding_box()
    target = float(np.max(hi - lo)) * cells_per_ball / (2.0 * domain.ball_radius)
    return max(2, int(np.ceil(np.log2(target / 4.0))))


def _draw_seeds(seed: int, count: int) -> List[int]:
    ss = np.random.SeedSequence(seed)
    return [int(c.generate_state(1)[0]) for c in ss.spawn(count)]


def _bump_center(domain: Domain, radius: float, rng: np.random.Generator) -> np.ndarray:
    """Uniform point of the domain whose ``radius``-ball stays inside."""
    rim, _ = sphere_rule(domain.n, 16) if domain.n > 1 else (np.array([[1.0], [-1.0]]), None)
    for _ in range(1000):
        c = domain.sample(1, rng)[0]
        if np.all(domain.contains(c + radius * rim)):
            return c
    raise RuntimeError("no admissible bump center found")


def span_ratio(G: np.ndarray, U: np.ndarray, W: np.ndarray, rtol: float = 1e-10) -> float:
    """Largest ``|op u|_{H^1} / ||u||_{L^2}`` over the linear span of the draws.

    ``G[i]`` holds the output derivatives of draw ``i`` at the nodes and
    ``U[i]`` the input values, both flattened per node; ``W`` are the node
    weights. The input Gram matrix is orthonormalized through an SVD, dropping
    directions with relative singular value below ``rtol``.
    """
    sw = np.sqrt(W)[None, :, None]
    BU = (sw * U.reshape(len(U), len(W), -1)).reshape(len(U), -1).T
    BG = (sw * G.reshape(len(G), len(W), -1)).reshape(len(G), -1).T
    _, S, Vt = np.linalg.svd(BU, full_matrices=False)
    if S.size == 0 or S[0] == 0:
        return 0.0
    keep = S > rtol * S[0]
    T = Vt[keep].T / S[keep]
    return float(np.linalg.norm(BG @ T, 2))


def estimate_empirical_ratio(
    kind: str,
    domain: Domain,
    l: int,
    ensemble_size: int = 8,
    degree: int = 2,
    seed: int = 0,
    level: Optional[int] = None,
    scale: float = 1.0,
    kappa_floor: bool = True,
    bump_fraction: float = 0.5,
) -> BoundReport:
    """Empirical counterpart of the H^1 bounds over a seeded ensemble of closed inputs.

    Poincare inputs are random closed polynomial forms of degree ``<= degree``,
    mapped exactly and differentiated symbolically. Bogovskii inputs are
    ``d(beta p)`` with ``p`` a random polynomial ``(l-1)``-form and ``beta``
    a bump of radius ``bump_fraction * rho / 2`` centered at a random
    admissible point; outputs are differentiated by central differences.

    ``samples`` lists the ratio of each draw; ``empirical_ratio`` is the
    maximum over the span of the draws (at least the largest sample).
    """
    if ensemble_size < 1:
        raise ValueError("ensemble_size must be >= 1")
    if kind not in KINDS:
        raise ValueError(f"unknown operator kind {kind!r}")
    n = domain.n
    _check(n, l)
    if level is None:
        level = default_level(domain)
    stats = domain.stats()
    X, W = domain.quadrature_nodes(level)
    h = 1e-4 * domain.ball_radius
    G, U = [], []
    if kind == "poincare":
        from .poincare import PoincareConfig, apply_poincare_poly

        mol = build_bump(domain.ball_center, domain.ball_radius, moment_degree=max(12, degree + 6))
        cfg = PoincareConfig(mol, l)
        for s in _draw_seeds(seed, ensemble_size):
            u = random_closed_form(n, l, degree, s)
            G.append(apply_poincare_poly(cfg, u).gradient(X))
            U.append(u(X))
    else:
        from .bogovskii import BogovskiiConfig, bogovskii_field

        cfg = BogovskiiConfig(build_bump(domain.ball_center, domain.ball_radius), l, domain)
        radius = bump_fraction * domain.ball_radius
        for s in _draw_seeds(seed, ensemble_size):
            rng = np.random.default_rng(s)
            p = PolyForm.random(n, l - 1, degree, rng)
            c = _bump_center(domain, radius, rng)
            u = bump_cut_form(p, c, radius).d()
            G.append(fd_gradient(bogovskii_field(cfg, u), X, h, richardson=False))
            U.append(u(X))
    G = np.array(G).reshape(ensemble_size, len(W), -1)
    U = np.array(U).reshape(ensemble_size, len(W), -1)
    num = np.einsum("n,inc->i", W, G**2)
    den = np.einsum("n,inc->i", W, U**2)
    samples = np.sqrt(np.divide(num, den, out=np.zeros_like(num), where=den > 0))
    k = kappa(kind, n, l, stats, floor=kappa_floor)
    return BoundReport(
        operator_kind=kind,
        n=n,
        l=l,
        stats=stats,
        kappa=k,
        bound_value=scale * stats.ratio_diam * k,
        scale=scale,
        empirical_ratio=max(span_ratio(G, U, W), float(samples.max())),
        samples=[float(x) for x in samples],
        count=ensemble_size,
        seed=seed,
        degree=degree,
    )


# --- eccentricity sweeps ------------------------------------------------------------------


def cigar_family(ratios: Sequence[float] = (1, 2, 4, 8), n: int = 2, radius: float = 0.5) -> List[Cigar]:
    """Nested capsules along ``x_1`` sharing the ball ``B(0, radius)`` at one end.

    The member with diameter ratio ``R / rho = t`` has segment length
    ``(t - 1) * 2 * radius``, so the family grows from the ball itself.
    """
    out = []
    for t in ratios:
        if t < 1:
            raise ValueError("diameter ratios must be >= 1")
        p1 = np.zeros(n)
        p1[0] = (t - 1.0) * 2.0 * radius
        out.append(Cigar(np.zeros(n), p1, radius, ball=(np.zeros(n), radius)))
    return out


def is_nondecreasing(values: Sequence[float], rtol: float = 0.0) -> bool:
    """``v[k+1] >= v[k] - rtol * |v[k]|`` for every ``k``."""
    v = np.asarray(values, dtype=float)
    return bool(np.all(v[1:] >= v[:-1] - rtol * np.abs(v[:-1])))


def bound_sweep(
    kind: str,
    domains: Sequence[Domain],
    l: int,
    ensemble_size: int = 8,
    degree: int = 2,
    seed: int = 0,
    safety: float = 2.0,
    level: Optional[int] = None,
) -> List[BoundReport]:
    """Empirical ratios and calibrated bounds over a domain family.

    The scale is ``safety`` times the empirical ratio on the first domain
    and is reused for all others; the kappa floor applies throughout.
    """
    reports = [
        estimate_empirical_ratio(kind, d, l, ensemble_size, degree, seed, level=level)
        for d in domains
    ]
    scale = safety * reports[0].empirical_ratio
    for r in reports:
        r.scale = scale
        r.bound_value = scale * r.stats.ratio_diam * r.kappa
    return reports
