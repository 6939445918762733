"""Smooth unit-mass bump supported in a ball, with its monomial moments.

The profile is ``theta(x) = A exp(-1 / (1 - |x - c|^2 / r^2))`` inside the
ball and zero outside. Moments about the origin are assembled from the
centered moments of the radial profile by the binomial translation rule, so
only one-dimensional radial integrals need numerical quadrature.
"""

from __future__ import annotations

from functools import lru_cache
from itertools import product
from math import comb, gamma, prod
from typing import Dict, Iterator, Optional, Tuple

import numpy as np

from .polyform import MultiPoly
from .quadrature import cube_rule, gauss_legendre, sphere_area, sphere_rule

Multi = Tuple[int, ...]

DEFAULT_MOMENT_DEGREE = 12
DEFAULT_QUAD_ORDER = 128


class QuadratureError(RuntimeError):
    """A quadrature refinement check failed."""


def _radial_integrals(kmax: int, order: int) -> np.ndarray:
    """``J_k = int_0^1 t^k exp(-1/(1-t^2)) dt`` for ``k = 0..kmax``."""
    t, w = gauss_legendre(0.0, 1.0, order)
    prof = np.exp(-1.0 / (1.0 - t**2))
    return np.array([np.sum(w * t**k * prof) for k in range(kmax + 1)])


@lru_cache(maxsize=None)
def _sphere_monomial(beta: Multi) -> float:
    """``int_{S^{n-1}} w^beta dw`` (zero unless every exponent is even)."""
    if any(b % 2 for b in beta):
        return 0.0
    n = len(beta)
    return 2.0 * prod(gamma((b + 1) / 2) for b in beta) / gamma((sum(beta) + n) / 2)


def multi_indices(n: int, max_degree: int) -> Iterator[Multi]:
    """All multi-indices of length ``n`` with total degree ``<= max_degree``, graded."""
    for total in range(max_degree + 1):
        for alpha in product(range(total + 1), repeat=n):
            if sum(alpha) == total:
                yield alpha


class Mollifier:
    """Unit-mass bump on the ball ``B(center, radius)``.

    Attributes:
        center: ball center, shape ``(n,)``.
        radius: ball radius.
        A: normalization constant making the total mass one.
        moment_degree: highest total degree guaranteed in :attr:`moment_table`.
    """

    def __init__(self, center, radius: float, A: float, radial: np.ndarray, moment_degree: int):
        self.center = np.array(center, dtype=float).reshape(-1)
        self.center.setflags(write=False)
        self.n = self.center.size
        self.radius = float(radius)
        self.A = float(A)
        self.moment_degree = int(moment_degree)
        self._radial = radial  # J_k / J_{n-1}
        self._moments: Dict[Multi, float] = {}

    # pointwise values -------------------------------------------------------

    def __call__(self, X) -> np.ndarray:
        return eval_theta(self, X)

    def _q(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        Y = X - self.center
        return Y, np.sum(Y**2, axis=-1) / self.radius**2

    def gradient(self, X) -> np.ndarray:
        Y, q = self._q(X)
        th = eval_theta(self, X)
        inside = q < 1.0
        g = np.zeros_like(q)
        g[inside] = -1.0 / (1.0 - q[inside]) ** 2
        return (th * g * 2.0 / self.radius**2)[:, None] * Y

    def second_partial(self, X, j: int) -> np.ndarray:
        """``d_j^2 theta`` with a 0-based axis ``j``."""
        Y, q = self._q(X)
        th = eval_theta(self, X)
        inside = q < 1.0
        g = np.zeros_like(q)
        gp = np.zeros_like(q)
        s = 1.0 - q[inside]
        g[inside] = -1.0 / s**2
        gp[inside] = -2.0 / s**3
        r2 = self.radius**2
        dq = 2.0 * Y[:, j] / r2
        return th * ((g * dq) ** 2 + gp * dq**2 + g * 2.0 / r2)

    # moments -----------------------------------------------------------------

    def centered_moment(self, beta: Multi) -> float:
        """``int (z - c)^beta theta(z) dz``."""
        k = sum(beta)
        if k + self.n - 1 >= len(self._radial):
            raise ValueError(f"moment degree {k} exceeds the tabulated radial range")
        return (
            self.radius**k
            * self._radial[k + self.n - 1]
            * _sphere_monomial(tuple(beta))
            / sphere_area(self.n)
        )

    def moment(self, alpha) -> float:
        """``int z^alpha theta(z) dz`` for a multi-index ``alpha``."""
        alpha = tuple(int(a) for a in alpha)
        if len(alpha) != self.n or min(alpha) < 0:
            raise ValueError(f"bad multi-index {alpha} for n={self.n}")
        if alpha in self._moments:
            return self._moments[alpha]
        total = 0.0
        for beta in product(*(range(a + 1) for a in alpha)):
            cm = self.centered_moment(beta)
            if cm == 0.0:
                continue
            coef = 1.0
            for a, b, c in zip(alpha, beta, self.center):
                coef *= comb(a, b) * c ** (a - b)
            total += coef * cm
        self._moments[alpha] = total
        return total

    @property
    def moment_table(self) -> Dict[Multi, float]:
        """All moments up to :attr:`moment_degree`, computed on first access."""
        return {a: self.moment(a) for a in multi_indices(self.n, self.moment_degree)}

    def integrate_poly(self, p: MultiPoly) -> float:
        """``int p(z) theta(z) dz`` from the moment table."""
        return float(sum(c * self.moment(a) for a, c in p.terms.items()))

    def __repr__(self) -> str:
        return f"Mollifier(center={self.center.tolist()}, radius={self.radius:g})"


def build_bump(
    center,
    radius: float,
    moment_degree: int = DEFAULT_MOMENT_DEGREE,
    quad_order: int = DEFAULT_QUAD_ORDER,
) -> Mollifier:
    """Build the unit-mass bump on ``B(center, radius)``.

    Radial integrals are computed at ``quad_order`` and ``2 * quad_order``
    Gauss points. A relative disagreement above ``1e-10`` in the mass
    integral raises :class:`QuadratureError`.
    """
    if not radius > 0:
        raise ValueError(f"radius must be positive, got {radius}")
    center = np.asarray(center, dtype=float).reshape(-1)
    n = center.size
    kmax = moment_degree + n + 2
    coarse = _radial_integrals(kmax, quad_order)
    fine = _radial_integrals(kmax, 2 * quad_order)
    if abs(coarse[n - 1] - fine[n - 1]) > 1e-10 * fine[n - 1]:
        raise QuadratureError(
            f"radial mass integral not converged at order {quad_order}: "
            f"{coarse[n - 1]!r} vs {fine[n - 1]!r}"
        )
    A = 1.0 / (radius**n * sphere_area(n) * fine[n - 1])
    return Mollifier(center, radius, A, fine / fine[n - 1], moment_degree)


def eval_theta(m: Mollifier, x) -> np.ndarray | float:
    """Bump values at one point (scalar result) or at rows of ``x``."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    q = np.sum((X - m.center) ** 2, axis=-1) / m.radius**2
    out = np.zeros(len(X))
    inside = q < 1.0
    out[inside] = m.A * np.exp(-1.0 / (1.0 - q[inside]))
    return float(out[0]) if single else out


def _support_rule(m: Mollifier, panels: Optional[int], order: int):
    if panels is None:
        panels = {1: 256, 2: 64, 3: 24}.get(m.n, 8)
    lo = m.center - m.radius
    hi = m.center + m.radius
    return cube_rule(lo, hi, panels, order)


def derivative_l1_norm(
    m: Mollifier,
    j: int = 0,
    order: int = 2,
    variant: str = "theta",
    m_index: int = 0,
    panels: Optional[int] = None,
) -> float:
    """``|| d_j^order phi ||_{L^1}`` for ``phi = theta`` or ``phi = z_m theta``.

    Axes ``j`` and ``m_index`` are 0-based; ``order`` is 0, 1 or 2.
    """
    X, W = _support_rule(m, panels, 6)
    th = eval_theta(m, X)
    if order == 0:
        d0 = th
    elif order == 1:
        d0 = m.gradient(X)[:, j]
    elif order == 2:
        d0 = m.second_partial(X, j)
    else:
        raise ValueError("only derivative orders 0, 1, 2 are supported")
    if variant == "theta":
        vals = d0
    elif variant == "z_theta":
        zm = X[:, m_index]
        vals = zm * d0
        if order >= 1 and j == m_index:
            lower = th if order == 1 else m.gradient(X)[:, j]
            vals = vals + order * lower
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return float(np.sum(W * np.abs(vals)))


def c_phi_constant(
    m: Mollifier,
    variant: str = "theta",
    j: int = 0,
    rho: float = 1.0,
    m_index: int = 0,
    panels: Optional[int] = None,
) -> float:
    """``rho^{-1} ||phi||_{L^1} + rho ||d_j^2 phi||_{L^1}`` for the chosen variant.

    ``variant`` is ``"theta"`` or ``"z_theta"`` (the latter multiplies by the
    coordinate ``z_{m_index}``).
    """
    if not rho > 0:
        raise ValueError(f"rho must be positive, got {rho}")
    l1 = derivative_l1_norm(m, j, 0, variant, m_index, panels)
    l1_dd = derivative_l1_norm(m, j, 2, variant, m_index, panels)
    return l1 / rho + rho * l1_dd


def ball_rule(m: Mollifier, radial_order: int = 48, sphere_order: int = 16):
    """Nodes ``Z`` and weights ``W * theta(Z)`` for integrals against the bump.

    Polar product rule centered at the ball center: Gauss-Legendre in the
    radius (Jacobian included) times :func:`sphere_rule` in the direction.
    """
    rho, wr = gauss_legendre(0.0, m.radius, radial_order)
    dirs, wd = sphere_rule(m.n, sphere_order) if m.n > 1 else (np.array([[1.0], [-1.0]]), np.ones(2))
    Z = m.center + (rho[:, None, None] * dirs[None]).reshape(-1, m.n)
    W = (wr[:, None] * rho[:, None] ** (m.n - 1) * wd[None]).reshape(-1)
    return Z, W * eval_theta(m, Z)
