"""Monomial bases, moment vectors, and moment/localizing structure maps.

``StructureMap.blocks[alpha]`` is the symmetric matrix multiplying ``x^alpha``
in ``g(x) v_d(x) v_d(x)^T``; with ``g = 1`` these are the moment matrices'
``B_alpha``. Assembling against a moment vector ``z`` gives ``M_d(g z)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations_with_replacement
from math import comb
from typing import Mapping, Sequence

import numpy as np

from .polyalg import MultiIndex, Polynomial, add_indices, grlex_key


@dataclass(frozen=True)
class MonomialBasis:
    n: int
    d: int
    monomials: tuple

    def __len__(self) -> int:
        return len(self.monomials)

    def __iter__(self):
        return iter(self.monomials)

    def __getitem__(self, i):
        return self.monomials[i]

    def index(self, alpha) -> int:
        return self._positions()[tuple(alpha)]

    def _positions(self) -> dict:
        pos = self.__dict__.get("_pos")
        if pos is None:
            pos = {a: i for i, a in enumerate(self.monomials)}
            object.__setattr__(self, "_pos", pos)
        return pos

    def __contains__(self, alpha) -> bool:
        return tuple(alpha) in self._positions()

    def evaluate(self, x) -> np.ndarray:
        """The vector ``v_d(x)``."""
        x = np.asarray(x, dtype=float)
        return np.array([np.prod(x ** np.asarray(a)) for a in self.monomials])


def basis_size(n: int, d: int) -> int:
    return comb(n + d, n) if d >= 0 else 0


@lru_cache(maxsize=None)
def _enumerate(n: int, d: int) -> tuple:
    out = []
    for k in range(d + 1):
        for combo in combinations_with_replacement(range(n), k):
            alpha = [0] * n
            for i in combo:
                alpha[i] += 1
            out.append(tuple(alpha))
    return tuple(sorted(out, key=grlex_key))


def enumerate_monomials(n: int, d: int) -> MonomialBasis:
    if n < 1:
        raise ValueError("n must be >= 1")
    if d < 0:
        raise ValueError("d must be >= 0")
    return MonomialBasis(n, d, _enumerate(n, d))


@dataclass
class MomentVector:
    """Moment sequence restricted to an explicit support; no implicit zeros."""

    n: int
    entries: dict = field(default_factory=dict)

    def __post_init__(self):
        self.entries = {tuple(a): float(v) for a, v in self.entries.items()}
        for a in self.entries:
            if len(a) != self.n:
                raise ValueError(f"multi-index {a} does not have length {self.n}")

    def __getitem__(self, alpha) -> float:
        alpha = tuple(alpha)
        try:
            return self.entries[alpha]
        except KeyError:
            raise KeyError(f"moment vector has no entry for multi-index {alpha}") from None

    def __contains__(self, alpha) -> bool:
        return tuple(alpha) in self.entries

    @property
    def mass(self) -> float:
        return self[(0,) * self.n]

    @property
    def order(self) -> int:
        return max((sum(a) for a in self.entries), default=0)

    def first_moments(self) -> np.ndarray:
        return np.array([self[tuple(int(i == j) for j in range(self.n))] for i in range(self.n)])

    @classmethod
    def from_points(cls, points, order: int, weights=None) -> "MomentVector":
        """Moments of a (weighted) atomic measure supported on ``points``."""
        X = np.atleast_2d(np.asarray(points, dtype=float))
        n = X.shape[1]
        w = np.ones(X.shape[0]) if weights is None else np.asarray(weights, dtype=float)
        entries = {a: float(w @ np.prod(X ** np.asarray(a), axis=1)) for a in _enumerate(n, order)}
        return cls(n, entries)

    @classmethod
    def dirac(cls, point, order: int) -> "MomentVector":
        return cls.from_points([point], order)


@dataclass(frozen=True)
class StructureMap:
    basis: MonomialBasis
    blocks: Mapping  # alpha -> list of (row, col, value) with row <= col

    @property
    def size(self) -> int:
        return len(self.basis)

    def support(self) -> list:
        return sorted(self.blocks, key=grlex_key)

    def dense(self, alpha) -> np.ndarray:
        M = np.zeros((self.size, self.size))
        for r, c, v in self.blocks.get(tuple(alpha), ()):
            M[r, c] += v
            if r != c:
                M[c, r] += v
        return M

    def polynomial_matrix(self, x) -> np.ndarray:
        """``sum_alpha blocks[alpha] * x^alpha`` evaluated at ``x``."""
        x = np.asarray(x, dtype=float)
        M = np.zeros((self.size, self.size))
        for alpha in self.blocks:
            M += self.dense(alpha) * np.prod(x ** np.asarray(alpha))
        return M


def localizing_structure(g: Polynomial, d: int) -> StructureMap:
    if d < 0:
        raise ValueError("d must be >= 0")
    basis = enumerate_monomials(g.n, d)
    acc: dict = {}
    mons = basis.monomials
    for r in range(len(mons)):
        for c in range(r, len(mons)):
            base = add_indices(mons[r], mons[c])
            for gamma, gc in g.items():
                key = (add_indices(base, gamma), r, c)
                acc[key] = acc.get(key, 0.0) + gc
    blocks: dict = {}
    for (alpha, r, c), v in acc.items():
        if v != 0.0:
            blocks.setdefault(alpha, []).append((r, c, v))
    return StructureMap(basis, blocks)


def moment_structure(n: int, d: int) -> StructureMap:
    return localizing_structure(Polynomial.constant(1.0, n), d)


def assemble(smap: StructureMap, z) -> np.ndarray:
    """Dense symmetric ``sum_alpha z_alpha * blocks[alpha]``."""
    M = np.zeros((smap.size, smap.size))
    for alpha, trip in smap.blocks.items():
        za = z[alpha]
        for r, c, v in trip:
            M[r, c] += za * v
            if r != c:
                M[c, r] += za * v
    return M


def riesz(z, p: Polynomial) -> float:
    """``L_z(p) = sum_alpha p_alpha z_alpha``."""
    return float(sum(c * z[a] for a, c in p.items()))
