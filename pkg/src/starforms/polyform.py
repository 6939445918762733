"""Differential forms with polynomial coefficients.

:class:`MultiPoly` is a sparse multivariate polynomial (exponent tuple ->
coefficient). :class:`PolyForm` maps basis tuples to such polynomials and
supports the exact exterior derivative. Forms that are not polynomial (bump
cut-offs, operator outputs) are wrapped in :class:`FieldForm`, a callable
with an optional known exterior derivative; both kinds can be integrated
with :func:`trace_pairing` and :func:`sobolev_seminorm`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product
from math import comb
from typing import Callable, Dict, Iterable, Mapping, Optional, Tuple

import numpy as np

from . import exterior as ext
from .exterior import DegreeError, IndexTuple

Exponent = Tuple[int, ...]

DROP_TOL = 1e-14


@lru_cache(maxsize=None)
def _exponents(nvars: int, degree: int) -> Tuple[Exponent, ...]:
    """Exponents of total degree <= ``degree``, graded then lexicographic."""
    exps = [a for a in product(range(degree + 1), repeat=nvars) if sum(a) <= degree]
    exps.sort(key=lambda a: (sum(a), a))
    return tuple(exps)


class MultiPoly:
    """Sparse polynomial in ``nvars`` variables with float coefficients."""

    __slots__ = ("nvars", "terms")

    def __init__(self, nvars: int, terms: Optional[Mapping[Exponent, float]] = None):
        self.nvars = nvars
        clean: Dict[Exponent, float] = {}
        for alpha, c in (terms or {}).items():
            alpha = tuple(int(a) for a in alpha)
            if len(alpha) != nvars or min(alpha, default=0) < 0:
                raise ValueError(f"bad exponent {alpha} for {nvars} variables")
            clean[alpha] = clean.get(alpha, 0.0) + float(c)
        self.terms = {a: c for a, c in clean.items() if abs(c) > DROP_TOL}

    @classmethod
    def _from_clean(cls, nvars: int, terms: Dict[Exponent, float]) -> "MultiPoly":
        """Skip validation for exponent tuples produced by arithmetic on valid ones."""
        out = cls.__new__(cls)
        out.nvars = nvars
        out.terms = {a: c for a, c in terms.items() if abs(c) > DROP_TOL}
        return out

    # construction helpers
    @classmethod
    def constant(cls, nvars: int, c: float) -> "MultiPoly":
        return cls(nvars, {(0,) * nvars: c})

    @classmethod
    def variable(cls, nvars: int, i: int, c: float = 1.0) -> "MultiPoly":
        """The monomial ``c * x_i`` (``i`` is 0-based)."""
        alpha = [0] * nvars
        alpha[i] = 1
        return cls(nvars, {tuple(alpha): c})

    @classmethod
    def random(cls, nvars: int, degree: int, rng: np.random.Generator) -> "MultiPoly":
        """All monomials of total degree <= ``degree`` with U[-1, 1] coefficients."""
        exps = _exponents(nvars, degree)
        return cls._from_clean(nvars, dict(zip(exps, rng.uniform(-1.0, 1.0, len(exps)))))

    @property
    def degree(self) -> float:
        return max((sum(a) for a in self.terms), default=-np.inf)

    def is_zero(self) -> bool:
        return not self.terms

    def copy(self) -> "MultiPoly":
        return MultiPoly(self.nvars, dict(self.terms))

    def __add__(self, other: "MultiPoly") -> "MultiPoly":
        if isinstance(other, (int, float)):
            other = MultiPoly.constant(self.nvars, other)
        out = dict(self.terms)
        for a, c in other.terms.items():
            out[a] = out.get(a, 0.0) + c
        return MultiPoly._from_clean(self.nvars, out)

    __radd__ = __add__

    def __neg__(self) -> "MultiPoly":
        return MultiPoly._from_clean(self.nvars, {a: -c for a, c in self.terms.items()})

    def __sub__(self, other: "MultiPoly") -> "MultiPoly":
        return self + (-other)

    def __mul__(self, other) -> "MultiPoly":
        if isinstance(other, (int, float, np.floating)):
            return MultiPoly._from_clean(self.nvars, {a: float(other) * c for a, c in self.terms.items()})
        out: Dict[Exponent, float] = {}
        for a, c in self.terms.items():
            for b, d in other.terms.items():
                k = tuple(x + y for x, y in zip(a, b))
                out[k] = out.get(k, 0.0) + c * d
        return MultiPoly._from_clean(self.nvars, out)

    __rmul__ = __mul__

    def __pow__(self, k: int) -> "MultiPoly":
        out = MultiPoly.constant(self.nvars, 1.0)
        for _ in range(k):
            out = out * self
        return out

    def __eq__(self, other) -> bool:
        return isinstance(other, MultiPoly) and self.nvars == other.nvars and self.terms == other.terms

    def max_abs_diff(self, other: "MultiPoly") -> float:
        keys = set(self.terms) | set(other.terms)
        return max((abs(self.terms.get(a, 0.0) - other.terms.get(a, 0.0)) for a in keys), default=0.0)

    def max_abs_coeff(self) -> float:
        return max((abs(c) for c in self.terms.values()), default=0.0)

    def partial(self, i: int) -> "MultiPoly":
        out = {}
        for a, c in self.terms.items():
            if a[i]:
                b = list(a)
                b[i] -= 1
                out[tuple(b)] = c * a[i]
        return MultiPoly._from_clean(self.nvars, out)

    def partial_multi(self, alpha: Exponent) -> "MultiPoly":
        p = self
        for i, k in enumerate(alpha):
            for _ in range(k):
                p = p.partial(i)
        return p

    def __call__(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if not self.terms:
            return np.zeros(X.shape[0])
        E = np.array(list(self.terms), dtype=int)
        c = np.array(list(self.terms.values()))
        maxdeg = int(E.max())
        # powers[k, :, i] = X[:, i] ** k
        powers = np.ones((maxdeg + 1,) + X.shape)
        for k in range(1, maxdeg + 1):
            powers[k] = powers[k - 1] * X
        mono = np.ones((X.shape[0], len(c)))
        for i in range(self.nvars):
            mono *= powers[E[:, i], :, i].T
        return mono @ c

    def __repr__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for a, c in sorted(self.terms.items(), key=lambda t: (sum(t[0]), t[0])):
            mono = "*".join(f"x{i + 1}^{k}" if k > 1 else f"x{i + 1}" for i, k in enumerate(a) if k)
            parts.append(f"{c:+.6g}" + (f"*{mono}" if mono else ""))
        return " ".join(parts)


class PolyForm:
    """A differential form ``sum_I u_I(x) dx_I`` with polynomial ``u_I``."""

    __slots__ = ("n", "degree", "components")

    def __init__(self, n: int, degree: int, components: Optional[Mapping[IndexTuple, MultiPoly]] = None):
        ext.check_dimension(n)
        if not 0 <= degree <= n:
            raise DegreeError(f"degree {degree} outside 0..{n}")
        self.n = n
        self.degree = degree
        comps: Dict[IndexTuple, MultiPoly] = {}
        for I, p in (components or {}).items():
            I = tuple(I)
            if len(I) != degree or not ext.is_index_tuple(I, n):
                raise DegreeError(f"invalid index tuple {I} for degree {degree}")
            if p.nvars != n:
                raise ValueError("coefficient polynomial has wrong number of variables")
            comps[I] = comps[I] + p if I in comps else p
        self.components = {I: p for I, p in comps.items() if not p.is_zero()}

    @classmethod
    def zero(cls, n: int, degree: int) -> "PolyForm":
        return cls(n, degree, {})

    @classmethod
    def scalar(cls, p: MultiPoly) -> "PolyForm":
        return cls(p.nvars, 0, {(): p})

    @classmethod
    def random(cls, n: int, degree: int, poly_degree: int, rng: np.random.Generator) -> "PolyForm":
        return cls(n, degree, {I: MultiPoly.random(n, poly_degree, rng) for I in ext.basis(n, degree)})

    @property
    def poly_degree(self) -> float:
        return max((p.degree for p in self.components.values()), default=-np.inf)

    def component(self, I: IndexTuple) -> MultiPoly:
        return self.components.get(tuple(I), MultiPoly(self.n))

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, PolyForm)
            and (self.n, self.degree) == (other.n, other.degree)
            and self.components == other.components
        )

    def _check_same(self, other: "PolyForm") -> None:
        if (self.n, self.degree) != (other.n, other.degree):
            raise DegreeError("forms live in different spaces")

    def __add__(self, other: "PolyForm") -> "PolyForm":
        self._check_same(other)
        out = dict(self.components)
        for I, p in other.components.items():
            out[I] = out[I] + p if I in out else p
        return PolyForm(self.n, self.degree, out)

    def __neg__(self) -> "PolyForm":
        return PolyForm(self.n, self.degree, {I: -p for I, p in self.components.items()})

    def __sub__(self, other: "PolyForm") -> "PolyForm":
        return self + (-other)

    def __mul__(self, other) -> "PolyForm":
        """Multiplication by a scalar or by a scalar polynomial."""
        return PolyForm(self.n, self.degree, {I: p * other for I, p in self.components.items()})

    __rmul__ = __mul__

    def wedge(self, other: "PolyForm") -> "PolyForm":
        if self.degree + other.degree > self.n:
            raise DegreeError("wedge degree overflow")
        out: Dict[IndexTuple, MultiPoly] = {}
        for I, p in self.components.items():
            for J, q in other.components.items():
                sgn = ext.permutation_sign(I + J)
                if sgn:
                    K = tuple(sorted(I + J))
                    term = (p * q) * float(sgn)
                    out[K] = out[K] + term if K in out else term
        return PolyForm(self.n, self.degree + other.degree, out)

    def d(self) -> "PolyForm":
        """Exact exterior derivative."""
        if self.degree >= self.n:
            raise DegreeError(f"exterior derivative of a {self.degree}-form in dimension {self.n}")
        out: Dict[IndexTuple, MultiPoly] = {}
        for I, p in self.components.items():
            for j in range(1, self.n + 1):
                sgn = ext.permutation_sign((j,) + I)
                if not sgn:
                    continue
                dp = p.partial(j - 1)
                if dp.is_zero():
                    continue
                K = tuple(sorted((j,) + I))
                term = dp * float(sgn)
                out[K] = out[K] + term if K in out else term
        return PolyForm(self.n, self.degree + 1, out)

    exterior_derivative = d

    def partial(self, j: int) -> "PolyForm":
        """Componentwise derivative along ``x_{j+1}`` (``j`` 0-based)."""
        return PolyForm(self.n, self.degree, {I: p.partial(j) for I, p in self.components.items()})

    def is_zero(self) -> bool:
        return not self.components

    def max_abs_coeff(self) -> float:
        return max((p.max_abs_coeff() for p in self.components.values()), default=0.0)

    def max_abs_diff(self, other: "PolyForm") -> float:
        self._check_same(other)
        keys = set(self.components) | set(other.components)
        return max((self.component(I).max_abs_diff(other.component(I)) for I in keys), default=0.0)

    def __call__(self, X) -> np.ndarray:
        """Coefficient arrays of shape ``(N, C(n, degree))`` at the points ``X``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.zeros((X.shape[0], ext.dim(self.n, self.degree)))
        pos = ext.basis_position(self.n, self.degree)
        for I, p in self.components.items():
            out[:, pos[I]] = p(X)
        return out

    def evaluate(self, x) -> ext.FormValue:
        return ext.FormValue(self.n, self.degree, self(np.asarray(x, dtype=float)[None])[0])

    def gradient(self, X) -> np.ndarray:
        """Array ``(N, C(n, degree), n)`` of first partial derivatives."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.stack([self.partial(j)(X) for j in range(self.n)], axis=-1)

    def __repr__(self) -> str:
        body = "; ".join(f"({p}) dx{''.join(map(str, I))}" for I, p in self.components.items())
        return f"PolyForm(n={self.n}, deg={self.degree}: {body or '0'})"

    # serialization: one line per monomial, "l; I=(i1,...); α=(a1,...); coeff"
    def to_text(self) -> str:
        lines = []
        for I in ext.basis(self.n, self.degree):
            p = self.components.get(I)
            if p is None:
                continue
            for alpha, c in sorted(p.terms.items()):
                lines.append(
                    f"{self.degree}; I=({','.join(map(str, I))}); "
                    f"\u03b1=({','.join(map(str, alpha))}); {float(c)!r}"
                )
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def from_text(cls, text: str, n: int, degree: Optional[int] = None) -> "PolyForm":
        pattern = re.compile(r"^\s*(\d+)\s*;\s*I=\(([\d,\s]*)\)\s*;\s*(?:a|α)=\(([\d,\s]*)\)\s*;\s*(\S+)\s*$")
        comps: Dict[IndexTuple, Dict[Exponent, float]] = {}
        for line in text.splitlines():
            if not line.strip():
                continue
            m = pattern.match(line)
            if not m:
                raise ValueError(f"cannot parse line: {line!r}")
            deg = int(m.group(1))
            if degree is None:
                degree = deg
            elif deg != degree:
                raise DegreeError("mixed degrees in serialized form")
            I = tuple(int(t) for t in m.group(2).split(",") if t.strip())
            alpha = tuple(int(t) for t in m.group(3).split(",") if t.strip())
            comps.setdefault(I, {})[alpha] = float(m.group(4))
        if degree is None:
            raise ValueError("empty serialization needs an explicit degree")
        return cls(n, degree, {I: MultiPoly(n, t) for I, t in comps.items()})


def random_closed_form(n: int, degree: int, poly_degree: int, seed) -> PolyForm:
    """``d w`` for a random ``(degree-1)``-form ``w`` of polynomial degree ``poly_degree + 1``."""
    if not 1 <= degree <= n:
        raise DegreeError(f"closed-form generator needs 1 <= degree <= n, got {degree}")
    rng = np.random.default_rng(seed)
    w = PolyForm.random(n, degree - 1, poly_degree + 1, rng)
    return w.d()


# --- non-polynomial forms -----------------------------------------------------------


@dataclass(frozen=True)
class FieldForm:
    """A form given by a vectorized callable ``X -> (N, C(n, degree))``.

    ``derivative`` is the exterior derivative when it is known in closed form.
    ``support`` is an optional ball ``(center, radius)`` outside of which the
    form vanishes; ``fn`` is then only called on points inside it.
    """

    n: int
    degree: int
    fn: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    derivative: Optional["FieldForm"] = field(default=None, repr=False)
    support: Optional[Tuple[np.ndarray, float]] = field(default=None, repr=False)

    def __call__(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        m = ext.dim(self.n, self.degree)
        if self.support is None:
            return np.asarray(self.fn(X), dtype=float).reshape(X.shape[0], m)
        c, r = self.support
        keep = np.sum((X - c) ** 2, axis=1) < r * r
        out = np.zeros((X.shape[0], m))
        if keep.any():
            out[keep] = np.asarray(self.fn(X[keep]), dtype=float).reshape(-1, m)
        return out

    def d(self) -> "FieldForm":
        if self.derivative is None:
            raise ValueError("exterior derivative of this form is not available")
        return self.derivative


def zero_field(n: int, degree: int) -> FieldForm:
    def fn(X):
        return np.zeros((X.shape[0], ext.dim(n, degree)))

    return FieldForm(n, degree, fn)


def bump_profile(X, center, radius):
    """Unnormalized bump ``exp(-1/(1-q))``, ``q = |x-c|^2/r^2``, and its gradient."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    diff = X - np.asarray(center, dtype=float)
    q = np.sum(diff**2, axis=-1) / radius**2
    inside = q < 1.0
    val = np.zeros(X.shape[0])
    grad = np.zeros_like(X)
    qi = q[inside]
    v = np.exp(-1.0 / (1.0 - qi))
    val[inside] = v
    grad[inside] = (v * (-1.0 / (1.0 - qi) ** 2) * 2.0 / radius**2)[:, None] * diff[inside]
    return val, grad


def bump_cut_form(p: PolyForm, center, radius: float) -> FieldForm:
    """The compactly supported form ``beta * p`` with its exterior derivative.

    ``beta`` is the bump of :func:`bump_profile`; ``d(beta p) = d beta ^ p + beta dp``
    is exact and closed.
    """
    n, k = p.n, p.degree
    center = np.asarray(center, dtype=float)

    def w_fn(X):
        b, _ = bump_profile(X, center, radius)
        return b[:, None] * p(X)

    if k == n:
        return FieldForm(n, k, w_fn, support=(center, float(radius)))
    dp = p.d()

    def dw_fn(X):
        b, g = bump_profile(X, center, radius)
        return ext.wedge_coeffs(g, 1, p(X), k, n) + b[:, None] * dp(X)

    supp = (center, float(radius))
    closed = FieldForm(n, k + 1, dw_fn, zero_field(n, k + 2) if k + 2 <= n else None, supp)
    return FieldForm(n, k, w_fn, closed, supp)


# --- integrals over domains ------------------------------------------------------------


def _nodes(domain, level):
    X, W = domain.quadrature_nodes(level)
    if len(W) == 0:
        raise ValueError("quadrature produced no nodes inside the domain")
    return X, W


def trace_pairing(u, psi, domain, level: int = 4, *, du=None, full: bool = False):
    """Weak boundary trace ``<tr u, psi> = int du ^ psi + (-1)^l int u ^ dpsi``.

    ``u`` is any form object exposing ``n``, ``degree``, ``__call__`` and
    (unless ``du`` is passed) ``d()``. With ``full=True`` the L^1 norms of
    the two integrands are returned too (summed), as a scale for tolerances.
    """
    n, l = u.n, u.degree
    if not 0 <= l <= n - 1:
        raise DegreeError(f"trace pairing needs 0 <= degree <= n-1, got {l}")
    if psi.degree != n - l - 1:
        raise DegreeError(f"test form must have degree {n - l - 1}")
    du = u.d() if du is None else du
    X, W = _nodes(domain, level)
    dpsi = psi.d()
    f1 = ext.wedge_coeffs(du(X), l + 1, psi(X), n - l - 1, n)[:, 0]
    f2 = ext.wedge_coeffs(u(X), l, dpsi(X), n - l, n)[:, 0]
    value = float(W @ f1 + (-1) ** l * (W @ f2))
    if full:
        return value, float(W @ np.abs(f1) + W @ np.abs(f2))
    return value


def trace_residual(u, psi, domain, level: int, rel: float = 1e-3) -> Tuple[float, float]:
    """``(|<tr u, psi>|, tolerance)`` with the pairing taken on grid ``level``.

    The tolerance is ``rel`` times the L^1 size of the integrands plus the
    change from grid ``level - 1``, an estimate of the quadrature error.
    """
    coarse = trace_pairing(u, psi, domain, level - 1)
    fine, scale = trace_pairing(u, psi, domain, level, full=True)
    return abs(fine), rel * scale + abs(fine - coarse)


def integrate(form, domain, level: int = 4) -> np.ndarray:
    """Integral of every coefficient of ``form`` over ``domain``."""
    X, W = _nodes(domain, level)
    return W @ form(X)


def sobolev_seminorm(u, k: int, domain, level: int = 4, h: Optional[float] = None) -> float:
    """``|u|_{H^k(domain)}`` for ``k`` in {0, 1, 2}.

    Polynomial forms are differentiated symbolically; other callables use
    central differences with step ``h``. The ``k = 2`` seminorm sums all
    ordered second partials (Frobenius norm of the Hessian).
    """
    if k not in (0, 1, 2):
        raise ValueError("k must be 0, 1 or 2")
    X, W = _nodes(domain, level)
    n = u.n
    if k == 0:
        vals = u(X)
        return float(np.sqrt(W @ np.sum(vals**2, axis=1)))
    if isinstance(u, PolyForm):
        if k == 1:
            D = u.gradient(X)
        else:
            D = np.stack([u.partial(i).gradient(X) for i in range(n)], axis=-1)
    else:
        if h is None:
            h = 1e-4 * domain.stats().R
        D = fd_gradient(u, X, h)
        if k == 2:
            D = np.stack([fd_gradient(lambda Y, i=i: fd_gradient(u, Y, h)[..., i], X, h) for i in range(n)], axis=-1)
    return float(np.sqrt(W @ np.sum(D.reshape(len(W), -1) ** 2, axis=1)))


def fd_gradient(f, X, h: float, richardson: bool = True) -> np.ndarray:
    """Central-difference gradient of a vectorized map ``X -> (N, m)``; result ``(N, m, n)``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n = X.shape[1]

    def central(step):
        cols = []
        for j in range(n):
            e = np.zeros(n)
            e[j] = step
            cols.append((np.asarray(f(X + e)) - np.asarray(f(X - e))) / (2 * step))
        return np.stack(cols, axis=-1)

    g = central(h)
    if richardson:
        g2 = central(h / 2)
        g = (4 * g2 - g) / 3
    return g


def exterior_derivative_fd(u, X, h: float) -> np.ndarray:
    """``du`` at ``X`` by Richardson-extrapolated central differences."""
    return ext.d_coeffs(fd_gradient(u, X, h), u.degree, u.n)


def ellipsoidal_bump(center, semi_axes) -> FieldForm:
    """Scalar bump ``exp(-1/(1-q))``, ``q = sum ((x_i - c_i)/a_i)^2``, with its differential."""
    c = np.asarray(center, dtype=float)
    a = np.asarray(semi_axes, dtype=float)
    n = c.size
    supp = (c, float(a.max()))

    def parts(X):
        Y = (X - c) / a
        q = np.sum(Y**2, axis=1)
        inside = q < 1.0
        val = np.zeros(len(X))
        grad = np.zeros_like(X)
        qi = q[inside]
        v = np.exp(-1.0 / (1.0 - qi))
        val[inside] = v
        grad[inside] = (-v / (1.0 - qi) ** 2)[:, None] * 2.0 * Y[inside] / a
        return val, grad

    dw = FieldForm(n, 1, lambda X: parts(X)[1], zero_field(n, 2) if n >= 2 else None, supp)
    return FieldForm(n, 0, lambda X: parts(X)[0][:, None], dw, supp)
