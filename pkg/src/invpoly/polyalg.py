"""Sparse multivariate polynomials over the reals.

A polynomial is a map from exponent tuples (multi-indices) to float
coefficients. Multi-indices are plain tuples of non-negative ints; the
global monomial order is graded lexicographic with ``x1 > x2 > ... > xn``,
so for two variables the degree-2 block is ordered ``x1^2, x1*x2, x2^2``.
"""

from __future__ import annotations

import itertools
from math import comb, prod
from typing import Iterable, Mapping, Sequence

import numpy as np

MultiIndex = tuple


def grlex_key(alpha: Sequence[int]) -> tuple:
    """Sort key realising the graded-lex order (total degree first)."""
    return (sum(alpha), tuple(-a for a in alpha))


def zero_index(n: int) -> MultiIndex:
    return (0,) * n


def unit_index(i: int, n: int, power: int = 1) -> MultiIndex:
    alpha = [0] * n
    alpha[i] = power
    return tuple(alpha)


def add_indices(a: Sequence[int], b: Sequence[int]) -> MultiIndex:
    return tuple(x + y for x, y in zip(a, b))


class Polynomial:
    """Immutable sparse polynomial in ``n`` variables.

    Exact zeros are dropped on construction; nothing else is rounded.
    """

    __slots__ = ("n", "_terms", "_hash")
    __array_ufunc__ = None  # make numpy scalars defer to our operators

    def __init__(self, n: int, terms: Mapping[Sequence[int], float] | None = None):
        if n < 1:
            raise ValueError("a polynomial needs at least one variable")
        clean: dict[MultiIndex, float] = {}
        for alpha, c in (terms or {}).items():
            alpha = tuple(int(a) for a in alpha)
            if len(alpha) != n:
                raise ValueError(f"multi-index {alpha} has length {len(alpha)}, expected {n}")
            if any(a < 0 for a in alpha):
                raise ValueError(f"negative exponent in {alpha}")
            c = float(c)
            if c != 0.0:
                clean[alpha] = clean.get(alpha, 0.0) + c
                if clean[alpha] == 0.0:
                    del clean[alpha]
        self.n = n
        self._terms = dict(sorted(clean.items(), key=lambda kv: grlex_key(kv[0])))
        self._hash = None

    # -- constructors -------------------------------------------------
    @classmethod
    def zero(cls, n: int) -> "Polynomial":
        return cls(n)

    @classmethod
    def constant(cls, c: float, n: int) -> "Polynomial":
        return cls(n, {zero_index(n): c})

    @classmethod
    def variable(cls, i: int, n: int) -> "Polynomial":
        """The coordinate polynomial ``x_{i+1}`` (``i`` is 0-based)."""
        return cls(n, {unit_index(i, n): 1.0})

    @classmethod
    def variables(cls, n: int) -> list["Polynomial"]:
        return [cls.variable(i, n) for i in range(n)]

    @classmethod
    def monomial(cls, alpha: Sequence[int], coeff: float = 1.0) -> "Polynomial":
        return cls(len(alpha), {tuple(alpha): coeff})

    # -- basic accessors ----------------------------------------------
    @property
    def terms(self) -> dict[MultiIndex, float]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def coeff(self, alpha: Sequence[int]) -> float:
        return self._terms.get(tuple(alpha), 0.0)

    def __getitem__(self, alpha: Sequence[int]) -> float:
        return self.coeff(alpha)

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self):
        return iter(self._terms)

    @property
    def degree(self) -> int:
        # zero polynomial has degree 0 by convention
        return max((sum(a) for a in self._terms), default=0)

    @property
    def constant_term(self) -> float:
        return self.coeff(zero_index(self.n))

    def is_zero(self) -> bool:
        return not self._terms

    def support(self) -> list[MultiIndex]:
        return list(self._terms)

    # -- arithmetic ---------------------------------------------------
    def _check(self, other: "Polynomial") -> None:
        if self.n != other.n:
            raise ValueError(f"dimension mismatch: {self.n} vs {other.n} variables")

    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            self._check(other)
            return other
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Polynomial.constant(float(other), self.n)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out = dict(self._terms)
        for a, c in other._terms.items():
            out[a] = out.get(a, 0.0) + c
        return Polynomial(self.n, out)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.n, {a: -c for a, c in self._terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other - self

    def __mul__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return self.scale(float(other))
        if not isinstance(other, Polynomial):
            return NotImplemented
        self._check(other)
        out: dict[MultiIndex, float] = {}
        for a, ca in self._terms.items():
            for b, cb in other._terms.items():
                k = add_indices(a, b)
                out[k] = out.get(k, 0.0) + ca * cb
        return Polynomial(self.n, out)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self.scale(1.0 / float(c))

    def __pow__(self, k: int):
        if int(k) != k or k < 0:
            raise ValueError("only non-negative integer powers are supported")
        result = Polynomial.constant(1.0, self.n)
        base = self
        k = int(k)
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def scale(self, c: float) -> "Polynomial":
        return Polynomial(self.n, {a: c * v for a, v in self._terms.items()})

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.n == other.n and self._terms == other._terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.n, tuple(self._terms.items())))
        return self._hash

    def allclose(self, other: "Polynomial", atol: float = 1e-9) -> bool:
        self._check(other)
        return (self - other).max_abs_coeff() <= atol

    def max_abs_coeff(self) -> float:
        return max((abs(c) for c in self._terms.values()), default=0.0)

    # -- evaluation and calculus --------------------------------------
    def __call__(self, x) -> float:
        return self.evaluate(x)

    def evaluate(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise ValueError(f"point has shape {x.shape}, expected ({self.n},)")
        return float(sum(c * prod(x[i] ** a[i] for i in range(self.n) if a[i])
                         for a, c in self._terms.items()))

    def evaluate_many(self, X) -> np.ndarray:
        """Evaluate at every row of an ``(N, n)`` array."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n:
            raise ValueError(f"points have {X.shape[1]} columns, expected {self.n}")
        out = np.zeros(X.shape[0])
        for a, c in self._terms.items():
            out += c * np.prod(X ** np.asarray(a), axis=1)
        return out

    def diff(self, i: int) -> "Polynomial":
        out = {}
        for a, c in self._terms.items():
            if a[i]:
                b = list(a)
                b[i] -= 1
                out[tuple(b)] = c * a[i]
        return Polynomial(self.n, out)

    def gradient(self) -> list["Polynomial"]:
        return [self.diff(i) for i in range(self.n)]

    def hessian(self) -> list[list["Polynomial"]]:
        g = self.gradient()
        H = [[None] * self.n for _ in range(self.n)]
        for i in range(self.n):
            for j in range(i, self.n):
                H[i][j] = H[j][i] = g[i].diff(j)
        return H

    def shift(self, y) -> "Polynomial":
        """Return ``u -> p(u + y)``."""
        y = np.asarray(y, dtype=float)
        if y.shape != (self.n,):
            raise ValueError(f"shift vector has shape {y.shape}, expected ({self.n},)")
        out: dict[MultiIndex, float] = {}
        for a, c in self._terms.items():
            # (u_i + y_i)^a_i expanded per coordinate, then multiplied out
            factors = [[(k, comb(ai, k) * y[i] ** (ai - k)) for k in range(ai + 1)]
                       for i, ai in enumerate(a)]
            for combo in itertools.product(*factors):
                w = c * prod(t[1] for t in combo)
                if w != 0.0:
                    b = tuple(t[0] for t in combo)
                    out[b] = out.get(b, 0.0) + w
        return Polynomial(self.n, out)

    def substitute_affine(self, center, scale) -> "Polynomial":
        """Return ``u -> p(center + scale * u)`` (coordinate-wise scale)."""
        scale = np.broadcast_to(np.asarray(scale, dtype=float), (self.n,))
        # p(center + s*u) = q(s*u) with q = p(. + center)
        q = self.shift(center)
        return Polynomial(self.n, {a: c * prod(scale[i] ** a[i] for i in range(self.n))
                                   for a, c in q._terms.items()})

    def truncate(self, max_degree: int) -> "Polynomial":
        return Polynomial(self.n, {a: c for a, c in self._terms.items() if sum(a) <= max_degree})

    def chop(self, tol: float) -> "Polynomial":
        """Drop coefficients with ``|c| <= tol``."""
        return Polynomial(self.n, {a: c for a, c in self._terms.items() if abs(c) > tol})

    def homogeneous_part(self, k: int) -> "Polynomial":
        return Polynomial(self.n, {a: c for a, c in self._terms.items() if sum(a) == k})

    def round(self, ndigits: int = 12) -> "Polynomial":
        return Polynomial(self.n, {a: round(c, ndigits) for a, c in self._terms.items()})

    # -- presentation -------------------------------------------------
    def to_string(self, names: Sequence[str] | None = None, digits: int = 12) -> str:
        names = list(names) if names is not None else [f"x{i + 1}" for i in range(self.n)]
        if not self._terms:
            return "0"
        parts = []
        for a, c in self._terms.items():
            mono = "*".join(f"{names[i]}^{e}" if e > 1 else names[i]
                            for i, e in enumerate(a) if e)
            mag = f"{abs(c):.{digits}g}"
            if mono:
                body = mono if mag == "1" else f"{mag}*{mono}"
            else:
                body = mag
            sign = "-" if c < 0 else "+"
            parts.append((sign, body))
        head_sign, head = parts[0]
        s = ("-" if head_sign == "-" else "") + head
        for sign, body in parts[1:]:
            s += f" {sign} {body}"
        return s

    def __repr__(self) -> str:
        return f"Polynomial({self.to_string()})"


def coeff_norm(p: Polynomial, k, exclude_constant: bool = True) -> float:
    """Coefficient norm; ``k=2`` is the *sum of squares* (no square root)."""
    vals = np.array([c for a, c in p.items() if not (exclude_constant and sum(a) == 0)])
    if vals.size == 0:
        return 0.0
    if k == 1:
        return float(np.abs(vals).sum())
    if k == 2:
        return float((vals ** 2).sum())
    if k in (np.inf, "inf", "linf"):
        return float(np.abs(vals).max())
    raise ValueError(f"unsupported norm {k!r}")


def shift_matrix(indices: Sequence[MultiIndex], y) -> np.ndarray:
    """Linear map sending coefficients over ``indices`` to those of ``p(u + y)``.

    Entry ``[r, c]`` is the coefficient of ``u^indices[r]`` in
    ``(u + y)^indices[c]``; the index set must be closed under taking
    smaller exponents (true for any full ``N^n_d``).
    """
    y = np.asarray(y, dtype=float)
    pos = {a: i for i, a in enumerate(indices)}
    T = np.zeros((len(indices), len(indices)))
    for c, alpha in enumerate(indices):
        for beta in itertools.product(*(range(a + 1) for a in alpha)):
            w = prod(comb(alpha[i], beta[i]) * y[i] ** (alpha[i] - beta[i]) for i in range(len(alpha)))
            T[pos[beta], c] += w
    return T


def from_vector(indices: Sequence[MultiIndex], values: Iterable[float], n: int) -> Polynomial:
    return Polynomial(n, dict(zip(indices, values)))
