"""Chains of overlapping star-shaped links and the gluing of local primitives.

A chain is an ordered family of stadium-shaped links along one axis. Each
pair of neighbours overlaps in a shorter stadium, and links two or more
apart are disjoint. The partition of unity is built from quintic smoothstep
ramps across the overlap slabs. It depends only on the axial coordinate
``t = (x - origin) . axis`` and is polynomial between consecutive slab ends.

Two gluing procedures turn a closed ``l``-form ``u`` on the union into a
global primitive ``v`` with ``dv = u``:

* :func:`glue_no_bc` uses the exact polynomial Poincare path. The local
  primitives ``eta_i`` are corrected by ``d(phi w)`` terms, where
  ``dw = eta_i - eta_(i+1)`` on an overlap. For ``l = 1`` the correction is
  a constant per link.
* :func:`glue_bc` uses the Bogovskii operator. The overlap corrections are
  ``w = B(d phi_(i+1) ^ u)`` and the link pieces are
  ``v_i = B(phi_i u + w_(i+1/2) - w_(i-1/2))``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.linalg import eigh

from . import exterior as ext
from .bogovskii import BogovskiiConfig, apply_bogovskii
from .constants import (
    BoundRangeError,
    chain_bound,
    default_level,
    dirichlet_constant,
    estimate_empirical_ratio,
    h1_bound,
)
from .exterior import DegreeError
from .geometry import Ball, Cigar, Domain
from .mollifier import build_bump, multi_indices
from .poincare import PoincareConfig, apply_poincare_poly
from .polyform import FieldForm, PolyForm, fd_gradient, trace_pairing


class ChainError(ValueError):
    """A chain assumption fails; ``witness`` is a point where it fails (if any)."""

    def __init__(self, message: str, witness=None):
        super().__init__(message if witness is None else f"{message} (witness point {np.round(witness, 6).tolist()})")
        self.witness = None if witness is None else np.asarray(witness, dtype=float)


class NotClosedError(ValueError):
    """The input form is not closed."""


class TraceError(ValueError):
    """The input form has a nonvanishing boundary trace."""

    def __init__(self, message: str, value: float):
        super().__init__(message)
        self.value = value


# --- partition of unity -----------------------------------------------------------


def smoothstep(t):
    """``6t^5 - 15t^4 + 10t^3`` clipped to ``[0, 1]``; C^2 at both ends."""
    t = np.clip(t, 0.0, 1.0)
    return t**3 * (10.0 - 15.0 * t + 6.0 * t**2)


def _smoothstep_derivs(t, width: float):
    """Values, first and second derivatives of ``S((t - 0) / width)`` in ``t`` (``t`` already shifted)."""
    s = np.clip(t / width, 0.0, 1.0)
    inside = (t > 0) & (t < width)
    d1 = np.where(inside, 30.0 * s**2 * (1 - s) ** 2 / width, 0.0)
    d2 = np.where(inside, 60.0 * s * (1 - s) * (1 - 2 * s) / width**2, 0.0)
    return smoothstep(s), d1, d2


class PartitionOfUnity:
    """``phi_0 .. phi_(N-1)`` from ramps ``psi_j`` over the slabs ``[lo_j, hi_j]``.

    ``psi_j`` rises from 0 to 1 across slab ``j``; ``phi_i = psi_(i-1) - psi_i``
    with ``psi_(-1) = 1`` and ``psi_(N-1) = 0``, so the sum telescopes to one.
    """

    def __init__(self, slabs: Sequence[Tuple[float, float]], n: int, axis=None, origin=None):
        slabs = [(float(a), float(b)) for a, b in slabs]
        for j, (a, b) in enumerate(slabs):
            if not b > a:
                raise ChainError(f"ramp slab {j} is empty: [{a}, {b}]")
            if j and not a > slabs[j - 1][1]:
                raise ChainError(f"ramp slabs {j - 1} and {j} are out of order or overlap")
        self.slabs = slabs
        self.n = n
        self.N = len(slabs) + 1
        self.axis = _unit_axis(axis, n)
        self.origin = np.zeros(n) if origin is None else np.asarray(origin, dtype=float)
        self.breakpoints = np.array([x for s in slabs for x in s])

    def coordinate(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return (X - self.origin) @ self.axis

    def _psi(self, t):
        """Ramp values and t-derivatives, shape ``(3, len(t), N + 1)`` with the constant ends."""
        out = np.zeros((3, len(t), self.N + 1))
        out[0, :, 0] = 1.0
        for j, (a, b) in enumerate(self.slabs):
            v, d1, d2 = _smoothstep_derivs(t - a, b - a)
            out[:, :, j + 1] = v, d1, d2
        return out

    def derivatives_1d(self, t) -> np.ndarray:
        """``(3, len(t), N)``: ``phi_i`` and its first two derivatives in ``t``."""
        psi = self._psi(np.asarray(t, dtype=float).reshape(-1))
        return psi[:, :, :-1] - psi[:, :, 1:]

    def __call__(self, X) -> np.ndarray:
        """Values ``(len(X), N)``."""
        return self.derivatives_1d(self.coordinate(X))[0]

    def gradient(self, X) -> np.ndarray:
        """``(len(X), N, n)``."""
        d1 = self.derivatives_1d(self.coordinate(X))[1]
        return d1[..., None] * self.axis

    def hessian(self, X) -> np.ndarray:
        """``(len(X), N, n, n)``."""
        d2 = self.derivatives_1d(self.coordinate(X))[2]
        return d2[..., None, None] * np.outer(self.axis, self.axis)


def _unit_axis(axis, n: int) -> np.ndarray:
    if axis is None:
        e = np.zeros(n)
        e[0] = 1.0
        return e
    e = np.asarray(axis, dtype=float).reshape(-1)
    if e.size != n or not np.linalg.norm(e) > 0:
        raise ValueError("axis must be a nonzero vector of the ambient dimension")
    return e / np.linalg.norm(e)


def partition_of_unity(links: Sequence[Tuple[float, float]], radius: float, n: int, inset: float = 0.02,
                       axis=None, origin=None) -> PartitionOfUnity:
    """Partition subordinate to stadium links given by their axial segments ``[a_i, b_i]``.

    The ramp between links ``i`` and ``i+1`` runs across the axial overlap
    ``[a_(i+1), b_i]`` shrunk by ``inset`` times its width at both ends, so
    every ``phi_i`` vanishes near the part of the link boundary inside the union.
    """
    slabs = []
    for i in range(len(links) - 1):
        a, b = links[i + 1][0], links[i][1]
        if not b > a:
            raise ChainError(f"links {i} and {i + 1} do not overlap along the axis")
        delta = inset * (b - a)
        slabs.append((a + delta, b - delta))
    return PartitionOfUnity(slabs, n, axis, origin)


# --- chain geometry ---------------------------------------------------------------------


class ChainDomain(Domain):
    """Union of the links. Not star-shaped as a whole; the ball is that of the first link."""

    def __init__(self, links: Sequence[Domain], overlaps: Sequence[Domain]):
        self.links = list(links)
        self.overlaps = list(overlaps)
        self.n = self.links[0].n
        self._init_ball(self.links[0].ball_center, self.links[0].ball_radius)

    def contains(self, X):
        X = np.asarray(X, dtype=float)
        out = self.links[0].contains(X)
        for L in self.links[1:]:
            out = out | L.contains(X)
        return out

    def bounding_box(self):
        boxes = [L.bounding_box() for L in self.links]
        return np.min([b[0] for b in boxes], axis=0), np.max([b[1] for b in boxes], axis=0)

    def volume(self):
        return sum(L.volume() for L in self.links) - sum(O.volume() for O in self.overlaps)

    def exit_distance(self, X, D):
        raise NotImplementedError("the union of the links is not star-shaped")


@dataclass
class ChainDecomposition:
    """Links, overlaps, partition of unity and the measured constants.

    Attributes:
        links: stadium links ``Omega_i`` with their balls.
        overlaps: ``Omega_i cap Omega_(i+1)`` as stadiums with midpoint balls.
        pou: the partition of unity.
        d: per-link length scale, the smallest diameter of the adjacent overlaps.
        C_S: measured ``max_i sup |D^k phi_i| d_i^k`` over ``k <= 2``.
        domain: the union, for sampling and quadrature.
        checks: measured residuals of the sampled invariants.
    """

    n: int
    links: List[Cigar]
    overlaps: List[Cigar]
    pou: PartitionOfUnity
    d: np.ndarray
    C_S: float
    domain: ChainDomain
    segments: List[Tuple[float, float]]
    radius: float
    checks: Dict[str, float] = field(default_factory=dict)

    @property
    def N(self) -> int:
        return len(self.links)

    def pieces(self) -> List[Domain]:
        return list(self.links) + list(self.overlaps)

    def link_index(self, X) -> np.ndarray:
        """First link containing each point, ``-1`` outside the union."""
        X = np.atleast_2d(X)
        inside = np.stack([L.contains(X) for L in self.links], axis=1)
        return np.where(inside.any(axis=1), np.argmax(inside, axis=1), -1)

    def membership(self, X) -> np.ndarray:
        return np.stack([L.contains(np.atleast_2d(X)) for L in self.links], axis=1)


def measure_separation_constant(pou: PartitionOfUnity, d: Sequence[float], samples: int = 4001) -> float:
    """``max_i sup_t max(|phi_i|, d_i |phi_i'|, d_i^2 |phi_i''|)``.

    The suprema are taken on a uniform grid of ``samples`` points per slab
    plus the slab ends. ``phi_i`` depends on ``t`` only, so the full gradient
    and Hessian norms equal ``|phi_i'|`` and ``|phi_i''|``; these dominate
    every coordinate partial and do not change under rigid motions.
    """
    t = np.concatenate([np.linspace(a, b, samples) for a, b in pou.slabs] + [pou.breakpoints])
    der = np.abs(pou.derivatives_1d(t))  # (3, T, N)
    d = np.asarray(d, dtype=float)
    scaled = der * np.stack([np.ones_like(d), d, d**2])[:, None, :]
    return float(scaled.max())


def build_chain(
    N: int,
    n: int = 2,
    link_length: float = 3.0,
    radius: float = 0.5,
    overlap_fraction: float = 0.25,
    inset: float = 0.02,
    axis=None,
    origin=None,
    samples: int = 4000,
    seed: int = 0,
) -> ChainDecomposition:
    """Collinear chain of ``N`` congruent stadium links.

    Link ``i`` is the set of points within ``radius`` of the axial segment
    ``[a_i, a_i + link_length]``. Consecutive segments overlap in
    ``overlap_fraction * link_length`` and the chain is centered at
    ``origin``. Each link's ball sits at its midpoint; each overlap is the
    stadium over the shared segment with a ball of the full radius at its
    midpoint (the largest ball inscribed along the axis).

    Every invariant is checked on ``samples`` random points before return;
    a failure raises :class:`ChainError` with a witness point.
    """
    if N < 2:
        raise ChainError("a chain needs at least two links")
    if not 0.0 < overlap_fraction < 0.5:
        raise ChainError(f"overlap fraction must lie in (0, 1/2), got {overlap_fraction}")
    if not (link_length > 0 and radius > 0):
        raise ChainError("link length and radius must be positive")
    e = _unit_axis(axis, n)
    o = np.zeros(n) if origin is None else np.asarray(origin, dtype=float).reshape(-1)
    L = float(link_length)
    step = L * (1.0 - overlap_fraction)
    total = (N - 1) * step + L
    segs = [(-total / 2 + i * step, -total / 2 + i * step + L) for i in range(N)]
    gap = segs[2][0] - segs[0][1] if N > 2 else L * (1 - 2 * overlap_fraction)
    if N > 2 and not gap > 2 * radius:
        # a point on the axis halfway between the ends of links 0 and 2
        mid = 0.5 * (segs[0][1] + segs[2][0])
        raise ChainError(
            f"links 0 and 2 intersect: axial gap {gap:g} does not exceed the width {2 * radius:g}",
            o + mid * e,
        )

    def point(t):
        return o + t * e

    links = [Cigar(point(a), point(b), radius, ball=(point(0.5 * (a + b)), radius)) for a, b in segs]
    overlaps = []
    for i in range(N - 1):
        a, b = segs[i + 1][0], segs[i][1]
        overlaps.append(Cigar(point(a), point(b), radius, ball=(point(0.5 * (a + b)), radius)))
    pou = partition_of_unity(segs, radius, n, inset, e, o)
    odiam = np.array([O.diameter() for O in overlaps])
    d = np.array([min(odiam[max(i - 1, 0)], odiam[min(i, N - 2)]) for i in range(N)])
    chain = ChainDecomposition(
        n=n,
        links=links,
        overlaps=overlaps,
        pou=pou,
        d=d,
        C_S=measure_separation_constant(pou, d),
        domain=ChainDomain(links, overlaps),
        segments=segs,
        radius=float(radius),
    )
    chain.checks = verify_chain(chain, samples, seed)
    return chain


def verify_chain(chain: ChainDecomposition, samples: int = 4000, seed: int = 0, tol: float = 1e-12) -> Dict[str, float]:
    """Sampled check of the chain invariants; raises :class:`ChainError` on the first failure."""
    rng = np.random.default_rng(seed)
    N = chain.N
    X = chain.domain.sample(samples, rng)
    member = chain.membership(X)
    count = member.sum(axis=1)
    if count.max() > 2:
        raise ChainError("a point lies in more than two links", X[np.argmax(count)])
    for i in range(N):
        Y = chain.links[i].sample(max(64, samples // N), rng)
        for j in range(i + 2, N):
            hit = chain.links[j].contains(Y)
            if hit.any():
                raise ChainError(f"links {i} and {j} intersect", Y[np.argmax(hit)])
        if i < N - 1:
            O = chain.overlaps[i]
            star = O.verify_star_shape(samples=max(200, samples // 10), seed=seed + i)
            if not star.ok:
                raise ChainError(f"overlap {i} is not star-shaped with respect to its ball", star.witness[1])
            both = Y[chain.links[i + 1].contains(Y)]
            if len(both) == 0:
                raise ChainError(f"links {i} and {i + 1} do not overlap")
            wrong = O.contains(Y) != chain.links[i + 1].contains(Y)
            if wrong.any():
                raise ChainError(f"overlap {i} differs from the intersection of links {i} and {i + 1}", Y[np.argmax(wrong)])
    phi = chain.pou(X)
    low = -phi.min()
    high = phi.max() - 1.0
    if max(low, high) > tol:
        k = np.unravel_index(np.argmax(np.maximum(-phi, phi - 1.0)), phi.shape)[0]
        raise ChainError("partition function outside [0, 1]", X[k])
    sum_err = np.abs(phi.sum(axis=1) - 1.0)
    if sum_err.max() > tol:
        raise ChainError("partition functions do not sum to one", X[np.argmax(sum_err)])
    outside = np.abs(phi) * ~member
    if outside.max() > tol:
        raise ChainError("a partition function is nonzero outside its link", X[np.unravel_index(np.argmax(outside), outside.shape)[0]])
    # phi_i must vanish near the part of the link boundary inside the union
    t = chain.pou.coordinate(X)
    margin = 0.0
    for i in range(N - 1):
        a, b = chain.segments[i + 1][0], chain.segments[i][1]
        lo, hi = chain.pou.slabs[i]
        near_left = (t > a - chain.radius) & (t < 0.5 * (a + lo))
        near_right = (t < b + chain.radius) & (t > 0.5 * (b + hi))
        bad = np.abs(phi[:, i + 1]) * near_left + np.abs(phi[:, i]) * near_right
        margin = max(margin, float(bad.max()))
        if bad.max() > tol:
            raise ChainError(f"partition function does not vanish near the inner boundary of overlap {i}", X[np.argmax(bad)])
    return {
        "max_links_per_point": float(count.max()),
        "pou_sum_error": float(sum_err.max()),
        "pou_range_error": float(max(low, high, 0.0)),
        "pou_outside_link": float(outside.max()),
        "pou_inner_boundary": margin,
    }


# --- measured Poincare constant ------------------------------------------------------------


def mean_zero_poincare_constant(domain: Domain, degree: int = 4, level: Optional[int] = None) -> float:
    """Rayleigh-Ritz estimate of ``sup ||w - mean w|| / (diam |w|_{H^1})``.

    The trial space holds the mean-free polynomials of total degree
    ``<= degree`` centered at the ball and scaled by the diameter. The
    estimate is the exact value of the constant restricted to that space,
    so it approaches the true constant from below as ``degree`` grows.
    """
    n = domain.n
    if level is None:
        level = default_level(domain, 8)
    X, W = domain.quadrature_nodes(level)
    R = domain.diameter()
    Y = (X - domain.ball_center) / R
    exps = [a for a in multi_indices(n, degree) if sum(a)]
    vals = np.stack([np.prod(Y**np.array(a), axis=1) for a in exps], axis=1)
    grads = np.zeros((len(X), len(exps), n))
    for k, a in enumerate(exps):
        for j in range(n):
            if a[j]:
                b = np.array(a)
                b[j] -= 1
                grads[:, k, j] = a[j] * np.prod(Y**b, axis=1) / R
    vals = vals - (W @ vals) / W.sum()
    M = np.einsum("n,na,nb->ab", W, vals, vals)
    A = np.einsum("n,naj,nbj->ab", W, grads, grads)
    lam = eigh(A, M, eigvals_only=True, subset_by_index=[0, 0])[0]
    return float(1.0 / (R * np.sqrt(lam)))


# --- calibration ---------------------------------------------------------------------------


_SCALE_CACHE: Dict[tuple, float] = {}


def calibrated_scale(kind: str, n: int, l: int, ensemble_size: int = 8, degree: int = 2, seed: int = 0,
                     safety: float = 2.0) -> float:
    """``safety`` times the empirical H^1 ratio of the operator on the unit ball."""
    key = (kind, n, l, ensemble_size, degree, seed, safety)
    if key not in _SCALE_CACHE:
        ball = Ball(np.zeros(n), 1.0)
        rep = estimate_empirical_ratio(kind, ball, l, ensemble_size, degree, seed,
                                       level=None if kind == "poincare" else default_level(ball, 8))
        _SCALE_CACHE[key] = safety * rep.empirical_ratio
    return _SCALE_CACHE[key]


def piece_constant(chain: ChainDecomposition, kind: str, degrees: Sequence[int], scales: Dict[int, float]) -> float:
    """``C_T``: the largest calibrated H^1 bound over links, overlaps and degrees (at least one)."""
    best = 1.0
    for P in chain.pieces():
        st = P.stats()
        for l in degrees:
            best = max(best, h1_bound(kind, chain.n, l, st, scales[l], kappa_floor=True))
    return best


# --- gluing without boundary conditions --------------------------------------------------------


class GluedPrimitive:
    """Glued form ``v``; on link ``i`` it equals

        v_i = eta_i + c_i + d(phi_(i-1) w_(i-1)) - d(phi_(i+1) w_i),

    with polynomial ``eta``, ``w`` and ``dw`` and the products expanded by
    ``d(phi w) = dphi ^ w + phi dw``. Evaluating the ramps directly instead
    of expanding them as polynomials keeps the roundoff at the level of the
    polynomial data on long chains.
    """

    def __init__(self, chain: ChainDecomposition, eta: List[PolyForm], w: List[PolyForm], consts=None):
        self.chain = chain
        self.eta = eta
        self.w = w
        self.dw = [wi.d() for wi in w]
        self.consts = consts
        self.n = chain.n
        self.degree = eta[0].degree

    def _terms(self, i: int):
        """``(sign, partition index, overlap index)`` of the corrections of link ``i``."""
        out = []
        if self.w and i > 0:
            out.append((1.0, i - 1, i - 1))
        if self.w and i < self.chain.N - 1:
            out.append((-1.0, i + 1, i))
        return out

    def link_values(self, i: int, X) -> np.ndarray:
        """``v_i`` at ``X`` (defined on the whole space, meaningful on link ``i``)."""
        X = np.atleast_2d(X)
        n, k = self.n, self.degree
        out = self.eta[i](X)
        if self.consts is not None:
            out = out + self.consts[i]
        if not self.w:
            return out
        phi = self.chain.pou(X)
        dphi = self.chain.pou.gradient(X)
        for sgn, p, j in self._terms(i):
            out += sgn * (ext.wedge_coeffs(dphi[:, p], 1, self.w[j](X), k - 1, n) + phi[:, p:p + 1] * self.dw[j](X))
        return out

    def link_gradient(self, i: int, X) -> np.ndarray:
        """``(len(X), C(n, degree), n)`` partial derivatives of ``v_i``."""
        X = np.atleast_2d(X)
        n, k = self.n, self.degree
        out = self.eta[i].gradient(X)
        if not self.w:
            return out
        pou = self.chain.pou
        phi, dphi, hess = pou(X), pou.gradient(X), pou.hessian(X)
        for sgn, p, j in self._terms(i):
            wv, gw = self.w[j](X), self.w[j].gradient(X)
            dwv, gdw = self.dw[j](X), self.dw[j].gradient(X)
            for a in range(n):
                term = (
                    ext.wedge_coeffs(hess[:, p, a], 1, wv, k - 1, n)
                    + ext.wedge_coeffs(dphi[:, p], 1, gw[..., a], k - 1, n)
                    + dphi[:, p, a:a + 1] * dwv
                    + phi[:, p:p + 1] * gdw[..., a]
                )
                out[..., a] += sgn * term
        return out

    def link_derivative(self, i: int, X) -> np.ndarray:
        """``dv_i`` assembled from the analytic partial derivatives."""
        return ext.d_coeffs(self.link_gradient(i, X), self.degree, self.n)

    def _by_link(self, X, fn):
        X = np.atleast_2d(X)
        idx = self.chain.link_index(X)
        res = fn(0, X[:0])
        res = np.zeros((len(X),) + res.shape[1:])
        for i in np.unique(idx[idx >= 0]):
            sel = idx == i
            res[sel] = fn(int(i), X[sel])
        return res

    def __call__(self, X) -> np.ndarray:
        return self._by_link(X, self.link_values)

    def gradient(self, X) -> np.ndarray:
        return self._by_link(X, self.link_gradient)


@dataclass
class GluingReport:
    """Measured residuals and constants of a gluing run."""

    mode: str
    N: int
    l: int
    max_dv_residual: float
    max_interface_jump: float
    v_h1: float
    u_l2: float
    C_T: float
    C_S: float
    C_P: float
    D_T: float
    d_T: float
    chain_bound: float
    constancy_std: List[float] = field(default_factory=list)
    extra: Dict[str, object] = field(default_factory=dict)

    @property
    def bound_holds(self) -> bool:
        return self.v_h1 <= self.chain_bound * self.u_l2


def glue_no_bc(
    chain: ChainDecomposition,
    u: PolyForm,
    samples: int = 400,
    seed: int = 0,
    level: Optional[int] = None,
    moment_degree: Optional[int] = None,
    constancy_tol: float = 1e-8,
    closed_tol: float = 1e-12,
    scales: Optional[Dict[int, float]] = None,
    poincare_degree: int = 4,
) -> Tuple[GluedPrimitive, GluingReport]:
    """Global primitive of a closed polynomial ``l``-form on the chain.

    Returns ``v`` and a report with the sampled ``max |dv_i - u|`` over all
    links containing each point, the largest interface jump ``|v_i - v_(i+1)|``
    on the overlaps, ``|v|_{H^1}``, ``||u||_{L^2}`` and the chain bound from
    calibrated ``C_T`` and measured ``C_S``, ``C_P``.

    ``scales`` maps each degree to the Poincare bound scale; by default it is
    calibrated on the unit ball.
    """
    n, l = chain.n, u.degree
    if u.n != n:
        raise DegreeError("form and chain dimensions differ")
    if l < 1:
        raise DegreeError("the form degree must be at least one")
    if l < n:
        defect = u.d().max_abs_coeff()
        if defect > closed_tol * max(1.0, u.max_abs_coeff()):
            raise NotClosedError(f"du has a coefficient of size {defect:.3e}")
    if moment_degree is None:
        moment_degree = int(max(12, u.poly_degree + 4))
    rng = np.random.default_rng(seed)
    N = chain.N
    link_cfg = [PoincareConfig(build_bump(L.ball_center, L.ball_radius, moment_degree), l) for L in chain.links]
    eta = [apply_poincare_poly(c, u) for c in link_cfg]
    stds: List[float] = []
    if l == 1:
        c = [0.0]
        for i in range(N - 1):
            Y = chain.overlaps[i].sample(samples, rng)
            diff = (eta[i](Y) - eta[i + 1](Y))[:, 0]
            std = float(np.std(diff))
            stds.append(std)
            if std > constancy_tol:
                raise ChainError(f"eta_{i} - eta_{i + 1} is not constant on overlap {i} (std {std:.3e})", Y[np.argmax(np.abs(diff - diff.mean()))])
            c.append(c[-1] + float(diff.mean()))
        v = GluedPrimitive(chain, eta, [], np.array(c))
    else:
        w = []
        for i in range(N - 1):
            O = chain.overlaps[i]
            cfg = PoincareConfig(build_bump(O.ball_center, O.ball_radius, moment_degree), l - 1)
            w.append(apply_poincare_poly(cfg, eta[i] - eta[i + 1]))
        v = GluedPrimitive(chain, eta, w)

    # residuals
    X = chain.domain.sample(samples, rng)
    member = chain.membership(X)
    uX = u(X)
    res = 0.0
    for i in range(N):
        sel = member[:, i]
        if sel.any():
            res = max(res, float(np.max(np.abs(v.link_derivative(i, X[sel]) - uX[sel]))))
    # independent cross-check of the analytic derivative by central differences
    fd = 0.0
    for i in range(N):
        sel = member[:, i]
        if sel.any():
            hstep = 1e-4 * chain.radius
            dfd = ext.d_coeffs(fd_gradient(lambda Y, i=i: v.link_values(i, Y), X[sel], hstep), l - 1, n)
            fd = max(fd, float(np.max(np.abs(dfd - uX[sel]))))
    jump = 0.0
    for i in range(N - 1):
        Y = chain.overlaps[i].sample(samples, rng)
        jump = max(jump, float(np.max(np.abs(v.link_values(i, Y) - v.link_values(i + 1, Y)))))
    if level is None:
        level = default_level(chain.domain)
    Xq, Wq = chain.domain.quadrature_nodes(level)
    v_h1 = float(np.sqrt(Wq @ np.sum(v.gradient(Xq).reshape(len(Wq), -1) ** 2, axis=1)))
    u_l2 = float(np.sqrt(Wq @ np.sum(u(Xq) ** 2, axis=1)))

    degrees = [l] + ([l - 1] if l > 1 else [])
    if scales is None:
        scales = {k: calibrated_scale("poincare", n, k) for k in degrees}
    C_T = piece_constant(chain, "poincare", degrees, scales)
    C_P = max(mean_zero_poincare_constant(P, poincare_degree) for P in chain.pieces())
    diams = [P.diameter() for P in chain.pieces()]
    D_T, d_T = max(diams), min(diams)
    bound = chain_bound(False, l, C_T, C_P, chain.C_S, D_T, d_T)
    report = GluingReport(
        mode="no-bc", N=N, l=l, max_dv_residual=res, max_interface_jump=jump, v_h1=v_h1, u_l2=u_l2,
        C_T=C_T, C_S=chain.C_S, C_P=C_P, D_T=D_T, d_T=d_T, chain_bound=bound, constancy_std=stds,
        extra={"max_dv_residual_fd": fd},
    )
    return v, report


# --- gluing with vanishing trace --------------------------------------------------------------


class GridForm:
    """Form tabulated on a tensor grid and interpolated; zero off the grid.

    ``mask`` (a domain) zeroes values outside it, and ``support`` is an
    enclosing ball as in :class:`FieldForm`.
    """

    def __init__(self, n: int, degree: int, axes, values: np.ndarray, mask: Domain, method: str = "cubic"):
        self.n = n
        self.degree = degree
        self.mask = mask
        self._interp = RegularGridInterpolator(tuple(axes), values, method=method, bounds_error=False, fill_value=0.0)
        lo = np.array([a[0] for a in axes])
        hi = np.array([a[-1] for a in axes])
        self.support = (0.5 * (lo + hi), float(0.5 * np.linalg.norm(hi - lo)))

    def __call__(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.zeros((len(X), ext.dim(self.n, self.degree)))
        inside = self.mask.contains(X)
        if inside.any():
            out[inside] = self._interp(X[inside])
        return out


def tabulate(fn, domain: Domain, n: int, degree: int, spacing: float) -> GridForm:
    """Sample ``fn`` on a grid of the given spacing over the bounding box of ``domain``."""
    lo, hi = domain.bounding_box()
    axes = [np.linspace(a, b, max(4, int(np.ceil((b - a) / spacing)) + 1)) for a, b in zip(lo, hi)]
    grid = np.stack([g.reshape(-1) for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    vals = np.asarray(fn(grid)).reshape(tuple(len(a) for a in axes) + (ext.dim(n, degree),))
    return GridForm(n, degree, axes, vals, domain)


def _sum_forms(n: int, degree: int, terms, support=None) -> FieldForm:
    """``sum sign * form`` as a :class:`FieldForm`."""

    def fn(X):
        out = np.zeros((len(X), ext.dim(n, degree)))
        for sgn, f in terms:
            out += sgn * f(X)
        return out

    return FieldForm(n, degree, fn, support=support)


def overlap_source(chain: ChainDecomposition, j: int, u) -> FieldForm:
    """``d(phi_(j+1) u) = d phi_(j+1) ^ u`` for closed ``u``; closed itself."""
    n, l = chain.n, u.degree
    pou = chain.pou

    def fn(X):
        g = pou.gradient(X)[:, j + 1, :]
        return ext.wedge_coeffs(g, 1, u(X), l, n)

    deriv = FieldForm(n, l + 2, lambda X: np.zeros((len(X), ext.dim(n, l + 2)))) if l + 2 <= n else None
    return FieldForm(n, l + 1, fn, deriv, getattr(u, "support", None))


def check_trace(u, domain: Domain, count: int = 6, seed: int = 0, level: Optional[int] = None,
                poly_degree: int = 2) -> Tuple[float, float]:
    """Largest ``|<tr u, psi>|`` over random polynomial test forms and the matching scale."""
    n, l = u.n, u.degree
    rng = np.random.default_rng(seed)
    if level is None:
        level = default_level(domain, 16)
    worst, scale = 0.0, 0.0
    for _ in range(count):
        psi = PolyForm.random(n, n - l - 1, poly_degree, rng)
        val, sc = trace_pairing(u, psi, domain, level, full=True)
        if abs(val) >= worst:
            worst, scale = abs(val), sc
    return worst, scale


def glue_bc(
    chain: ChainDecomposition,
    u: FieldForm,
    spacing: float = 0.025,
    samples: int = 40,
    seed: int = 0,
    trace_tol: float = 1e-3,
    closed_tol: float = 1e-6,
    level: Optional[int] = None,
    bound_scale: Optional[float] = None,
    compute_h1: bool = False,
    h: Optional[float] = None,
) -> Tuple[FieldForm, GluingReport]:
    """Global primitive with vanishing trace of a closed ``l``-form with vanishing trace, ``1 <= l <= n-1``.

    ``u`` must expose ``d()``. The overlap corrections ``B(d phi_(j+1) ^ u)``
    are tabulated with the given grid ``spacing`` and interpolated; the link
    pieces ``B(phi_i u + w_i - w_(i-1))`` are evaluated on demand. The report
    holds the relative residual ``max |dv - u| / max |u|`` at ``samples``
    random points (central differences), the overlap zero-integral and
    vanishing-trace checks, and the ratio ``||w|| / (diam |w|_{H^1})`` of each
    correction next to the Dirichlet constant.
    """
    n, l = chain.n, u.degree
    if l >= n:
        raise BoundRangeError(f"bounded-trace gluing covers degrees 1..{n - 1}; got l = {l}")
    if l < 1:
        raise DegreeError("the form degree must be at least one")
    rng = np.random.default_rng(seed)
    R0 = chain.radius
    if h is None:
        h = 1e-4 * R0
    if level is None:
        level = default_level(chain.domain, 8)
    Xs = chain.domain.sample(4 * samples, rng)
    uX = u(Xs)
    scale_u = float(np.max(np.abs(uX))) or 1.0
    du = u.d()(Xs)
    if np.max(np.abs(du)) > closed_tol * scale_u:
        raise NotClosedError(f"du reaches {np.max(np.abs(du)):.3e}")
    tr, tr_scale = check_trace(u, chain.domain, seed=seed)
    if tr > trace_tol * max(tr_scale, 1e-300):
        raise TraceError(f"u has a nonvanishing trace: pairing {tr:.3e} (scale {tr_scale:.3e})", tr)

    N = chain.N
    zero_int, overlap_traces, poinc = [], [], []
    w: List[GridForm] = []
    for j in range(N - 1):
        O = chain.overlaps[j]
        g = overlap_source(chain, j, u)
        if l + 1 == n:
            Xo, Wo = O.quadrature_nodes(level + 1)
            gv = g(Xo)
            zero_int.append((float(abs(Wo @ gv[:, 0])), float(Wo @ np.abs(gv[:, 0]))))
        else:
            overlap_traces.append(check_trace(g, O, seed=seed + j))
        cfg = BogovskiiConfig(build_bump(O.ball_center, O.ball_radius), l + 1, O)
        wj = tabulate(lambda X: apply_bogovskii(cfg, g, X), O, n, l, spacing)
        w.append(wj)
        Xo, Wo = O.quadrature_nodes(level)
        wv = wj(Xo)
        gw = fd_gradient(wj, Xo, 1e-3 * R0, richardson=False)
        l2 = float(np.sqrt(Wo @ np.sum(wv**2, axis=1)))
        h1 = float(np.sqrt(Wo @ np.sum(gw.reshape(len(Wo), -1) ** 2, axis=1)))
        poinc.append(l2 / (O.diameter() * h1) if h1 > 0 else 0.0)

    pou = chain.pou
    parts = []
    for i in range(N):
        L = chain.links[i]
        terms = [(1.0, FieldForm(n, l, lambda X, i=i: pou(X)[:, i:i + 1] * u(X)))]
        if i < N - 1:
            terms.append((1.0, w[i]))
        if i > 0:
            terms.append((-1.0, w[i - 1]))
        f = _sum_forms(n, l, terms)
        cfg = BogovskiiConfig(build_bump(L.ball_center, L.ball_radius), l, L)
        parts.append((cfg, f))

    def v_fn(X):
        X = np.atleast_2d(X)
        out = np.zeros((len(X), ext.dim(n, l - 1)))
        member = chain.membership(X)
        for i, (cfg, f) in enumerate(parts):
            sel = member[:, i]
            if sel.any():
                out[sel] += apply_bogovskii(cfg, f, X[sel])
        return out

    v = FieldForm(n, l - 1, v_fn)
    Xr = Xs[:samples]
    dv = ext.d_coeffs(fd_gradient(v, Xr, h, richardson=False), l - 1, n)
    res = float(np.max(np.abs(dv - u(Xr)))) / scale_u

    # locality: every link piece vanishes off its link
    far = chain.domain.sample(samples, rng)
    loc = 0.0
    for i, (cfg, f) in enumerate(parts):
        off = far[~chain.links[i].contains(far)]
        if len(off):
            loc = max(loc, float(np.max(np.abs(apply_bogovskii(cfg, f, off)))))

    v_h1 = float("nan")
    u_l2 = float("nan")
    Xq, Wq = chain.domain.quadrature_nodes(level)
    u_l2 = float(np.sqrt(Wq @ np.sum(u(Xq) ** 2, axis=1)))
    if compute_h1:
        G = fd_gradient(v, Xq, h, richardson=False)
        v_h1 = float(np.sqrt(Wq @ np.sum(G.reshape(len(Wq), -1) ** 2, axis=1)))

    if bound_scale is None:
        bound_scale = calibrated_scale("bogovskii", n, l, ensemble_size=4)
    scales = {k: bound_scale for k in (l, l + 1)}
    C_T = piece_constant(chain, "bogovskii", [l, l + 1], scales)
    diams = [P.diameter() for P in chain.pieces()]
    D_T, d_T = max(diams), min(diams)
    bound = chain_bound(True, l, C_T, 1.0, chain.C_S, D_T, d_T, dirichlet_constant(n), n)
    report = GluingReport(
        mode="bc", N=N, l=l, max_dv_residual=res, max_interface_jump=0.0, v_h1=v_h1, u_l2=u_l2,
        C_T=C_T, C_S=chain.C_S, C_P=float("nan"), D_T=D_T, d_T=d_T, chain_bound=bound,
        extra={
            "trace_u": (tr, tr_scale),
            "zero_integral": zero_int,
            "vanishing_trace": overlap_traces,
            "poincare_ratio": poinc,
            "dirichlet_constant": dirichlet_constant(n),
            "locality": loc,
            "corrections": w,
        },
    )
    return v, report
