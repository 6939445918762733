"""Finite-dimensional exterior algebra over R^n.

Basis ``e^I`` of the degree-``l`` part is indexed by strictly increasing
1-based tuples ``I``. Coefficients are stored densely in the lexicographic
order produced by :func:`itertools.combinations`.

The ``*_coeffs`` helpers act on coefficient arrays with arbitrary leading
batch axes, which is what the operator modules use when evaluating forms on
many points at once. :class:`FormValue` wraps a single coefficient vector.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from math import comb
from typing import Dict, Iterable, Mapping, Sequence, Tuple

import numpy as np

IndexTuple = Tuple[int, ...]

MAX_DIM = 6


class DegreeError(ValueError):
    """Raised when form degrees are incompatible with an operation."""


def check_dimension(n: int) -> None:
    if not 1 <= n <= MAX_DIM:
        raise ValueError(f"dimension n={n} outside supported range 1..{MAX_DIM}")


@lru_cache(maxsize=None)
def basis(n: int, degree: int) -> Tuple[IndexTuple, ...]:
    """Ordered basis tuples of the degree-``degree`` part of the algebra."""
    if not 0 <= degree <= n:
        raise DegreeError(f"degree {degree} outside 0..{n}")
    return tuple(combinations(range(1, n + 1), degree))


@lru_cache(maxsize=None)
def basis_position(n: int, degree: int) -> Dict[IndexTuple, int]:
    return {I: k for k, I in enumerate(basis(n, degree))}


def dim(n: int, degree: int) -> int:
    return comb(n, degree) if 0 <= degree <= n else 0


def is_index_tuple(I: Sequence[int], n: int) -> bool:
    return all(1 <= i <= n for i in I) and all(a < b for a, b in zip(I, I[1:]))


def suppress(I: IndexTuple, m: int) -> IndexTuple:
    """Drop the ``m``-th entry (1-based) of ``I``."""
    return I[: m - 1] + I[m:]


def complement(I: IndexTuple, n: int) -> IndexTuple:
    s = set(I)
    return tuple(i for i in range(1, n + 1) if i not in s)


def permutation_sign(seq: Sequence[int]) -> int:
    """Sign of the permutation sorting ``seq``; 0 if an entry repeats."""
    if len(set(seq)) != len(seq):
        return 0
    inversions = 0
    for a in range(len(seq)):
        for b in range(a + 1, len(seq)):
            if seq[a] > seq[b]:
                inversions += 1
    return -1 if inversions % 2 else 1


def sigma(I: IndexTuple, n: int) -> int:
    """Parity (0 even, 1 odd) of the concatenation ``I`` followed by ``I^c``."""
    return 0 if permutation_sign(I + complement(I, n)) == 1 else 1


# --- precomputed sparse tables -------------------------------------------------


@lru_cache(maxsize=None)
def _wedge_table(n: int, p: int, q: int):
    rows = []
    pos = basis_position(n, p + q)
    for a, I in enumerate(basis(n, p)):
        for b, J in enumerate(basis(n, q)):
            sgn = permutation_sign(I + J)
            if sgn:
                rows.append((a, b, pos[tuple(sorted(I + J))], sgn))
    if not rows:
        return tuple(np.zeros(0, dtype=int) for _ in range(3)) + (np.zeros(0),)
    a, b, c, s = map(np.array, zip(*rows))
    return a, b, c, s.astype(float)


@lru_cache(maxsize=None)
def _contract_table(n: int, p: int):
    rows = []
    pos = basis_position(n, p - 1)
    for a, I in enumerate(basis(n, p)):
        for m in range(1, p + 1):
            rows.append((a, I[m - 1] - 1, pos[suppress(I, m)], (-1.0) ** (m - 1)))
    a, j, c, s = map(np.array, zip(*rows))
    return a, j, c, s.astype(float)


@lru_cache(maxsize=None)
def _star_table(n: int, p: int):
    pos = basis_position(n, n - p)
    src = np.arange(dim(n, p))
    dst = np.array([pos[complement(I, n)] for I in basis(n, p)], dtype=int)
    sgn = np.array([(-1.0) ** sigma(I, n) for I in basis(n, p)])
    return src, dst, sgn


@lru_cache(maxsize=None)
def _d_table(n: int, p: int):
    """Rows (source, direction j, target, sign) for dx_j ^ dx_I."""
    rows = []
    pos = basis_position(n, p + 1)
    for a, I in enumerate(basis(n, p)):
        for j in range(1, n + 1):
            sgn = permutation_sign((j,) + I)
            if sgn:
                rows.append((a, j - 1, pos[tuple(sorted((j,) + I))], float(sgn)))
    return tuple(rows)


def wedge_coeffs(A: np.ndarray, p: int, B: np.ndarray, q: int, n: int) -> np.ndarray:
    """Batched wedge product of coefficient arrays of degrees ``p`` and ``q``."""
    if p + q > n:
        raise DegreeError(f"wedge of degrees {p}+{q} exceeds n={n}")
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    batch = np.broadcast_shapes(A.shape[:-1], B.shape[:-1])
    out = np.zeros(batch + (dim(n, p + q),))
    a, b, c, s = _wedge_table(n, p, q)
    for k in range(len(a)):
        out[..., c[k]] += s[k] * A[..., a[k]] * B[..., b[k]]
    return out


def contract_coeffs(Z: np.ndarray, A: np.ndarray, p: int, n: int) -> np.ndarray:
    """Batched interior product ``z _| a`` for a degree-``p`` coefficient array."""
    if p < 1:
        raise DegreeError("cannot contract a 0-form")
    Z = np.asarray(Z, dtype=float)
    A = np.asarray(A, dtype=float)
    batch = np.broadcast_shapes(Z.shape[:-1], A.shape[:-1])
    out = np.zeros(batch + (dim(n, p - 1),))
    a, j, c, s = _contract_table(n, p)
    for k in range(len(a)):
        out[..., c[k]] += s[k] * Z[..., j[k]] * A[..., a[k]]
    return out


def star_coeffs(A: np.ndarray, p: int, n: int) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    src, dst, sgn = _star_table(n, p)
    out = np.zeros(A.shape[:-1] + (dim(n, n - p),))
    out[..., dst] = A[..., src] * sgn
    return out


def d_coeffs(grad: np.ndarray, p: int, n: int) -> np.ndarray:
    """Exterior derivative from coefficient gradients.

    ``grad[..., a, j]`` holds ``d_j u_I`` for the ``a``-th basis tuple ``I``.
    """
    if p >= n:
        raise DegreeError(f"exterior derivative of a {p}-form in dimension {n}")
    grad = np.asarray(grad, dtype=float)
    out = np.zeros(grad.shape[:-2] + (dim(n, p + 1),))
    for a, j, c, s in _d_table(n, p):
        out[..., c] += s * grad[..., a, j]
    return out


# --- single values ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FormValue:
    """An element of the degree-``degree`` part of the exterior algebra of R^n."""

    n: int
    degree: int
    coeffs: np.ndarray

    def __post_init__(self):
        check_dimension(self.n)
        c = np.array(self.coeffs, dtype=float).reshape(-1)
        if c.size != dim(self.n, self.degree):
            raise DegreeError(
                f"expected {dim(self.n, self.degree)} coefficients, got {c.size}"
            )
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zero(cls, n: int, degree: int) -> "FormValue":
        return cls(n, degree, np.zeros(dim(n, degree)))

    @classmethod
    def from_dict(cls, n: int, degree: int, terms: Mapping[IndexTuple, float]) -> "FormValue":
        c = np.zeros(dim(n, degree))
        pos = basis_position(n, degree)
        for I, v in terms.items():
            I = tuple(I)
            if len(I) != degree or not is_index_tuple(I, n):
                raise DegreeError(f"invalid index tuple {I} for degree {degree}, n={n}")
            c[pos[I]] += v
        return cls(n, degree, c)

    @classmethod
    def basis_form(cls, n: int, I: Iterable[int]) -> "FormValue":
        I = tuple(I)
        return cls.from_dict(n, len(I), {I: 1.0})

    def to_dict(self) -> Dict[IndexTuple, float]:
        return {I: float(v) for I, v in zip(basis(self.n, self.degree), self.coeffs) if v != 0.0}

    def __getitem__(self, I: IndexTuple) -> float:
        return float(self.coeffs[basis_position(self.n, self.degree)[tuple(I)]])

    def _check_same(self, other: "FormValue") -> None:
        if (self.n, self.degree) != (other.n, other.degree):
            raise DegreeError("forms live in different spaces")

    def __add__(self, other: "FormValue") -> "FormValue":
        self._check_same(other)
        return FormValue(self.n, self.degree, self.coeffs + other.coeffs)

    def __sub__(self, other: "FormValue") -> "FormValue":
        self._check_same(other)
        return FormValue(self.n, self.degree, self.coeffs - other.coeffs)

    def __neg__(self) -> "FormValue":
        return FormValue(self.n, self.degree, -self.coeffs)

    def __mul__(self, scalar: float) -> "FormValue":
        return FormValue(self.n, self.degree, scalar * self.coeffs)

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        if not isinstance(other, FormValue):
            return NotImplemented
        return (self.n, self.degree) == (other.n, other.degree) and bool(
            np.all(self.coeffs == other.coeffs)
        )

    def __hash__(self):
        return hash((self.n, self.degree, self.coeffs.tobytes()))

    def allclose(self, other: "FormValue", atol: float = 1e-12) -> bool:
        self._check_same(other)
        return bool(np.allclose(self.coeffs, other.coeffs, rtol=0.0, atol=atol))

    def __repr__(self) -> str:
        terms = " + ".join(
            f"{v:g}*e{''.join(map(str, I))}" for I, v in self.to_dict().items()
        )
        return f"FormValue(n={self.n}, deg={self.degree}: {terms or '0'})"


def wedge(a: FormValue, b: FormValue) -> FormValue:
    if a.n != b.n:
        raise DegreeError("dimension mismatch")
    return FormValue(a.n, a.degree + b.degree, wedge_coeffs(a.coeffs, a.degree, b.coeffs, b.degree, a.n))


def hodge_star(a: FormValue) -> FormValue:
    return FormValue(a.n, a.n - a.degree, star_coeffs(a.coeffs, a.degree, a.n))


def contract(z: Sequence[float], a: FormValue) -> FormValue:
    """Interior product of the vector ``z`` with ``a``."""
    z = np.asarray(z, dtype=float)
    if z.shape != (a.n,):
        raise DegreeError(f"vector of shape {z.shape} for n={a.n}")
    return FormValue(a.n, a.degree - 1, contract_coeffs(z, a.coeffs, a.degree, a.n))


def inner_product(a: FormValue, b: FormValue) -> float:
    a._check_same(b)
    return float(a.coeffs @ b.coeffs)


def inner_product_via_star(a: FormValue, b: FormValue) -> float:
    """``<a, b>`` read off from ``a ^ *b = <a, b> e^{1..n}``."""
    a._check_same(b)
    return float(wedge(a, hodge_star(b)).coeffs[0])
