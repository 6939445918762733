"""Averaged Poincare (Cartan homotopy) operator in nonsingular variables.

For an ``l``-form ``u`` the operator is

    P u(x) = int theta(z) int_0^1 s^(l-1) (x - z) _| u(s x + (1 - s) z) ds dz,

a bump-weighted average of the radial homotopy operators centered at the
points of the ball. Polynomial inputs are mapped exactly: the ``s``
integral becomes a Beta function and the ``z`` integral a combination of
bump moments. General callables go through Gauss quadrature in ``s`` and a
polar rule on the ball in ``z``.

Each coefficient reduces to the scalar operators

    P_i^k f(x) = int_0^1 s^(k-1) int phi_i(z) f(s x + (1 - s) z) dz ds,

with ``phi_1 = theta`` and ``phi_2 = z_m theta``, through
``P f = x_m P_1^l f - P_2^l f``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from math import comb, factorial
from typing import Callable, Optional, Sequence

import numpy as np

from . import exterior as ext
from .exterior import DegreeError, FormValue
from .mollifier import Mollifier, ball_rule
from .polyform import MultiPoly, PolyForm
from .quadrature import gauss_legendre


class MomentTableError(ValueError):
    """The bump moment table is too small for an exact evaluation."""


@dataclass(frozen=True)
class PoincareConfig:
    """Operator data.

    Attributes:
        mollifier: bump defining the average over base points.
        degree: degree ``l`` of the input forms, ``1 <= l <= n``.
        s_quad_order: Gauss order in ``s`` for callable inputs.
        radial_order, sphere_order: polar rule on the ball for callable inputs.
    """

    mollifier: Mollifier
    degree: int
    s_quad_order: int = 16
    radial_order: int = 48
    sphere_order: int = 16
    _rule: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        n = self.mollifier.n
        if not 1 <= self.degree <= n:
            raise DegreeError(f"degree must be in 1..{n}, got {self.degree}")

    @property
    def n(self) -> int:
        return self.mollifier.n

    def z_rule(self):
        if "z" not in self._rule:
            self._rule["z"] = ball_rule(self.mollifier, self.radial_order, self.sphere_order)
        return self._rule["z"]

    def with_degree(self, degree: int) -> "PoincareConfig":
        return PoincareConfig(self.mollifier, degree, self.s_quad_order, self.radial_order, self.sphere_order, self._rule)


# --- exact scalar transport ---------------------------------------------------------------


def _beta(a: int, b: int) -> float:
    """``int_0^1 s^(a-1) (1-s)^(b-1) ds`` for positive integers."""
    return factorial(a - 1) * factorial(b - 1) / factorial(a + b - 1)


def transport_poly(f: MultiPoly, k: int, mol: Mollifier, weight: Optional[Sequence[int]] = None) -> MultiPoly:
    """Exact ``int_0^1 s^(k-1) int z^weight theta(z) f(s x + (1-s) z) dz ds`` as a polynomial in ``x``.

    ``weight`` is an exponent tuple multiplying the bump (``None`` for none).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    n = mol.n
    wexp = tuple(weight) if weight is not None else (0,) * n
    need = (f.degree if not f.is_zero() else 0) + sum(wexp)
    if need > mol.moment_degree:
        raise MomentTableError(
            f"moment table of degree {mol.moment_degree} too small; degree {int(need)} required"
        )
    out = {}
    for alpha, c in f.terms.items():
        total = sum(alpha)
        for b in product(*(range(a + 1) for a in alpha)):
            nb = sum(b)
            binom = 1
            for a_i, b_i in zip(alpha, b):
                binom *= comb(a_i, b_i)
            zexp = tuple(a_i - b_i + w_i for a_i, b_i, w_i in zip(alpha, b, wexp))
            val = c * binom * _beta(k + nb, total - nb + 1) * mol.moment(zexp)
            out[b] = out.get(b, 0.0) + val
    return MultiPoly(n, out)


def component_P_poly(mol: Mollifier, i: int, k: int, f: MultiPoly, m: int) -> MultiPoly:
    """``P_i^k f`` for polynomial ``f``; ``m`` is the 1-based coordinate of ``phi_2``."""
    if i == 1:
        return transport_poly(f, k, mol)
    if i == 2:
        w = [0] * mol.n
        w[m - 1] = 1
        return transport_poly(f, k, mol, w)
    raise ValueError("i must be 1 or 2")


def scalar_P_poly(mol: Mollifier, l: int, f: MultiPoly, m: int) -> MultiPoly:
    """``x_m P_1^l f - P_2^l f``: one coefficient of the form operator."""
    xm = MultiPoly.variable(mol.n, m - 1)
    return xm * component_P_poly(mol, 1, l, f, m) - component_P_poly(mol, 2, l, f, m)


def apply_poincare_poly(cfg: PoincareConfig, u: PolyForm) -> PolyForm:
    """Exact image of a polynomial ``l``-form, an ``(l-1)``-form with polynomial coefficients."""
    if u.degree != cfg.degree or u.n != cfg.n:
        raise DegreeError(f"expected a {cfg.degree}-form on R^{cfg.n}")
    out = {}
    for I, f in u.components.items():
        for pos in range(1, len(I) + 1):
            J = ext.suppress(I, pos)
            term = scalar_P_poly(cfg.mollifier, cfg.degree, f, I[pos - 1])
            if pos % 2 == 0:
                term = -term
            out[J] = out[J] + term if J in out else term
    return PolyForm(cfg.n, cfg.degree - 1, out)


# --- quadrature path -----------------------------------------------------------------


def apply_poincare_quad(cfg: PoincareConfig, u: Callable, x) -> np.ndarray | FormValue:
    """Quadrature evaluation at one point (returns :class:`FormValue`) or at rows of ``x``.

    ``u`` maps points ``(N, n)`` to coefficient arrays ``(N, C(n, l))``; it
    must be defined on the segments joining ``x`` to the ball.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    n, l = cfg.n, cfg.degree
    Z, Wz = cfg.z_rule()
    s, ws = gauss_legendre(0.0, 1.0, cfg.s_quad_order)
    ws = ws * s ** (l - 1)
    out = np.zeros((len(X), ext.dim(n, l - 1)))
    for a, xa in enumerate(X):
        # points s x + (1 - s) z on the (s, z) grid
        Y = s[:, None, None] * xa + (1.0 - s)[:, None, None] * Z[None]
        vals = np.asarray(u(Y.reshape(-1, n)), dtype=float).reshape(len(s), len(Z), -1)
        inner = np.einsum("s,z,szc->zc", ws, Wz, vals)
        out[a] = np.sum(ext.contract_coeffs(xa - Z, inner, l, n), axis=0)
    if single:
        return FormValue(n, l - 1, out[0])
    return out


def component_P(cfg: PoincareConfig, i: int, k: int, f, m: int, x, exact: Optional[bool] = None):
    """``P_i^k f(x)``; polynomial ``f`` is handled exactly unless ``exact=False``.

    ``m`` is the 1-based coordinate used by ``phi_2 = z_m theta``.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    x = np.asarray(x, dtype=float)
    if exact is None:
        exact = isinstance(f, MultiPoly)
    if exact:
        p = component_P_poly(cfg.mollifier, i, k, f, m)
        vals = p(np.atleast_2d(x))
    else:
        Z, Wz = cfg.z_rule()
        if i == 2:
            Wz = Wz * Z[:, m - 1]
        elif i != 1:
            raise ValueError("i must be 1 or 2")
        s, ws = gauss_legendre(0.0, 1.0, cfg.s_quad_order)
        ws = ws * s ** (k - 1)
        X = np.atleast_2d(x)
        vals = np.empty(len(X))
        for a, xa in enumerate(X):
            Y = s[:, None, None] * xa + (1.0 - s)[:, None, None] * Z[None]
            fv = np.asarray(f(Y.reshape(-1, cfg.n)), dtype=float).reshape(len(s), len(Z))
            vals[a] = ws @ fv @ Wz
    return float(vals[0]) if x.ndim == 1 else vals


def scalar_P_quad(cfg: PoincareConfig, f: Callable, m: int, x) -> np.ndarray:
    """``int theta(z) (x_m - z_m) int_0^1 s^(l-1) f(s x + (1-s) z) ds dz`` by quadrature."""
    Z, Wz = cfg.z_rule()
    s, ws = gauss_legendre(0.0, 1.0, cfg.s_quad_order)
    ws = ws * s ** (cfg.degree - 1)
    X = np.atleast_2d(np.asarray(x, dtype=float))
    out = np.empty(len(X))
    for a, xa in enumerate(X):
        Y = s[:, None, None] * xa + (1.0 - s)[:, None, None] * Z[None]
        fv = np.asarray(f(Y.reshape(-1, cfg.n)), dtype=float).reshape(len(s), len(Z))
        out[a] = ws @ fv @ (Wz * (xa[m - 1] - Z[:, m - 1]))
    return out


# --- derivative formulas ---------------------------------------------------------------


def derivative_formula(mol: Mollifier, l: int, f: MultiPoly, m: int, j: int, alpha: Sequence[int] = ()) -> MultiPoly:
    """``d_j d^alpha`` of ``x_m P_1^l f - P_2^l f`` assembled from shifted component operators.

    Uses ``d_j P_i^k g = P_i^(k+1)[d_j g]`` and Leibniz on ``x_m``:

        d_j d^a P f = delta_jm P_1^(l+|a|)[d^a f]
                      + sum_{v <= a} C(a, v) d^v(x_m) P_1^(l+|a-v|+1)[d_j d^(a-v) f]
                      - P_2^(l+|a|+1)[d_j d^a f]

    Only ``v = 0`` and ``v = e_m`` survive in the sum. ``j``, ``m`` are 1-based.
    """
    n = mol.n
    a = tuple(alpha) if len(alpha) else (0,) * n
    ka = sum(a)
    fa = f.partial_multi(a)
    total = MultiPoly(n)
    if j == m:
        total = total + component_P_poly(mol, 1, l + ka, fa, m)
    xm = MultiPoly.variable(n, m - 1)
    total = total + xm * component_P_poly(mol, 1, l + ka + 1, fa.partial(j - 1), m)
    if a[m - 1] > 0:
        rest = list(a)
        rest[m - 1] -= 1
        g = f.partial_multi(tuple(rest)).partial(j - 1)
        total = total + component_P_poly(mol, 1, l + ka, g, m) * float(a[m - 1])
    total = total - component_P_poly(mol, 2, l + ka + 1, fa.partial(j - 1), m)
    return total


def poincare_gradient_check(
    cfg: PoincareConfig, f: MultiPoly, m: int, j: int, x=None, alpha: Sequence[int] = ()
) -> float:
    """Residual between the derivative formula and direct differentiation of ``P f``.

    Returns the largest coefficient difference when ``x`` is ``None`` and the
    pointwise difference (max over rows) otherwise.
    """
    mol = cfg.mollifier
    direct = scalar_P_poly(mol, cfg.degree, f, m)
    if len(alpha):
        direct = direct.partial_multi(tuple(alpha))
    direct = direct.partial(j - 1)
    formula = derivative_formula(mol, cfg.degree, f, m, j, alpha)
    if x is None:
        return direct.max_abs_diff(formula)
    X = np.atleast_2d(np.asarray(x, dtype=float))
    return float(np.max(np.abs(direct(X) - formula(X))))


def homotopy_defect(cfg: PoincareConfig, u: PolyForm) -> float:
    """Largest coefficient of ``d P u + P du - u`` (``P du`` omitted for top degree)."""
    lhs = apply_poincare_poly(cfg, u).d()
    if u.degree < u.n:
        lhs = lhs + apply_poincare_poly(cfg.with_degree(u.degree + 1), u.d())
    return lhs.max_abs_diff(u)
