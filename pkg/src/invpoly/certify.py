"""Putinar certificates: construction, extraction and independent checking.

A certificate for ``p`` on ``K = {g_j >= 0, h_i = 0}`` with degree bound
``d`` is an identity ::

    p = sigma_0 + sum_j sigma_j g_j + sum_i phi_i h_i

with ``sigma_j = v(x - c)^T G_j v(x - c)`` for PSD Gram matrices ``G_j`` over
monomials of degree ``<= d - v_j`` and free polynomials ``phi_i`` of degree
``<= 2 (d - v_i)``. The basis centre ``c`` lets solvers work in recentred
coordinates while the certificate is checked in the caller's coordinates.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from math import ceil
from typing import Sequence

import numpy as np

from . import conic
from .basis import MonomialBasis, enumerate_monomials, localizing_structure
from .polyalg import Polynomial, add_indices, grlex_key

logger = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-6
EIG_FLOOR = -1e-8


def half_degree(g: Polynomial) -> int:
    return ceil(g.degree / 2)


@dataclass(frozen=True)
class FeasibleSet:
    """``{x : g_j(x) >= 0, h_i(x) = 0}``."""

    n: int
    inequalities: tuple = ()
    equalities: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "inequalities", tuple(self.inequalities))
        object.__setattr__(self, "equalities", tuple(self.equalities))
        for p in self.inequalities + self.equalities:
            if p.n != self.n:
                raise ValueError(f"constraint {p} has {p.n} variables, expected {self.n}")

    @property
    def m(self) -> int:
        return len(self.inequalities)

    @property
    def half_degrees(self) -> list:
        return [half_degree(g) for g in self.inequalities]

    @property
    def equality_half_degrees(self) -> list:
        return [half_degree(h) for h in self.equalities]

    def min_order(self) -> int:
        return max(self.half_degrees + self.equality_half_degrees + [0])

    def violation(self, x) -> float:
        worst = 0.0
        for g in self.inequalities:
            worst = max(worst, -g(x))
        for h in self.equalities:
            worst = max(worst, abs(h(x)))
        return worst

    def contains(self, x, tol: float = 1e-8) -> bool:
        return self.violation(x) <= tol

    def mask(self, X, tol: float = 1e-8) -> np.ndarray:
        """Row-wise membership for an ``(N, n)`` array."""
        X = np.atleast_2d(X)
        ok = np.ones(X.shape[0], dtype=bool)
        for g in self.inequalities:
            ok &= g.evaluate_many(X) >= -tol
        for h in self.equalities:
            ok &= np.abs(h.evaluate_many(X)) <= tol
        return ok

    def active_set(self, y, tol: float = 1e-8) -> list:
        return [j for j, g in enumerate(self.inequalities) if abs(g(y)) <= tol]

    def shift(self, y) -> "FeasibleSet":
        """The set in coordinates ``u = x - y``."""
        return FeasibleSet(self.n, [g.shift(y) for g in self.inequalities],
                           [h.shift(y) for h in self.equalities])

    def affine(self, center, scale) -> "FeasibleSet":
        """The set in coordinates ``u`` with ``x = center + scale * u``."""
        return FeasibleSet(self.n, [g.substitute_affine(center, scale) for g in self.inequalities],
                           [h.substitute_affine(center, scale) for h in self.equalities])

    def with_box(self) -> "FeasibleSet":
        """Append the redundant constraints ``1 - x_i^2 >= 0``."""
        extra = [1.0 - Polynomial.variable(i, self.n) ** 2 for i in range(self.n)]
        return FeasibleSet(self.n, list(self.inequalities) + extra, self.equalities)


@dataclass
class PutinarCertificate:
    n: int
    d: int
    sos: list  # (j, Gram matrix); j = 0 is the constant constraint, j >= 1 is inequality j-1
    free: list = field(default_factory=list)  # (i, Polynomial in the caller's coordinates)
    center: np.ndarray | None = None

    def __post_init__(self):
        self.center = np.zeros(self.n) if self.center is None else np.asarray(self.center, dtype=float)
        self.sos = [(int(j), np.asarray(G, dtype=float)) for j, G in self.sos]

    def gram_basis(self, j: int, K: FeasibleSet) -> MonomialBasis:
        v = 0 if j == 0 else half_degree(K.inequalities[j - 1])
        return enumerate_monomials(self.n, self.d - v)

    def multiplier(self, j: int, K: FeasibleSet) -> Polynomial:
        """The SOS polynomial ``sigma_j`` in the caller's coordinates."""
        for jj, G in self.sos:
            if jj == j:
                return gram_polynomial(G, self.gram_basis(j, K)).shift(-self.center)
        return Polynomial.zero(self.n)

    def min_eig(self) -> float:
        return min((float(np.linalg.eigvalsh(G).min()) for _, G in self.sos), default=0.0)

    def block_sizes(self) -> list:
        return [G.shape[0] for _, G in self.sos]


def gram_polynomial(G: np.ndarray, basis: MonomialBasis) -> Polynomial:
    """``v^T G v`` over the given monomial basis."""
    if G.shape != (len(basis), len(basis)):
        raise ValueError(f"Gram matrix is {G.shape}, basis has {len(basis)} monomials")
    terms: dict = {}
    mons = basis.monomials
    for r in range(len(mons)):
        for c in range(len(mons)):
            if G[r, c] != 0.0:
                k = add_indices(mons[r], mons[c])
                terms[k] = terms.get(k, 0.0) + G[r, c]
    return Polynomial(basis.n, terms)


def reconstruct(cert: PutinarCertificate, K: FeasibleSet) -> Polynomial:
    if cert.n != K.n:
        raise ValueError("certificate and feasible set disagree on the number of variables")
    total = Polynomial.zero(K.n)
    for j, G in cert.sos:
        if j < 0 or j > K.m:
            raise ValueError(f"certificate references inequality {j} but K has {K.m}")
        basis = cert.gram_basis(j, K)
        if G.shape != (len(basis), len(basis)):
            raise ValueError(f"Gram matrix {j} is {G.shape}; degree bound {cert.d} needs "
                             f"{len(basis)}x{len(basis)}")
        sigma = gram_polynomial(G, basis).shift(-cert.center)
        total = total + (sigma if j == 0 else sigma * K.inequalities[j - 1])
    for i, phi in cert.free:
        if i < 0 or i >= len(K.equalities):
            raise ValueError(f"certificate references equality {i} but K has {len(K.equalities)}")
        total = total + phi * K.equalities[i]
    return total


@dataclass
class CertificateReport:
    residual_poly: Polynomial
    residual_norm: float
    min_gram_eig: float
    verdict: str
    tol: float = RESIDUAL_TOL
    eig_floor: float = EIG_FLOOR

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"


def verify(target: Polynomial, cert: PutinarCertificate, K: FeasibleSet,
           tol: float = RESIDUAL_TOL, eig_floor: float = EIG_FLOOR) -> CertificateReport:
    if target.n != K.n:
        raise ValueError("target and feasible set disagree on the number of variables")
    residual = target - reconstruct(cert, K)
    # measured in the certificate's own basis (powers of x - center); shifting
    # back to x inflates coefficient errors by up to (1 + |center|)^deg
    rnorm = residual.shift(cert.center).max_abs_coeff()
    mineig = cert.min_eig()
    verdict = "pass" if (rnorm <= tol and mineig >= eig_floor) else "fail"
    return CertificateReport(residual, rnorm, mineig, verdict, tol, eig_floor)


def project_psd(G: np.ndarray) -> np.ndarray:
    G = 0.5 * (G + G.T)
    w, V = np.linalg.eigh(G)
    return (V * np.clip(w, 0.0, None)) @ V.T


def sos_decomposition(G: np.ndarray, basis: MonomialBasis, center=None, drop: float = 1e-10) -> list:
    """Factor ``v^T G v`` as ``sum_k w_k q_k^2``; returns ``[(w_k, q_k), ...]``."""
    w, V = np.linalg.eigh(0.5 * (G + G.T))
    center = np.zeros(basis.n) if center is None else center
    out = []
    for k in np.argsort(-w):
        if w[k] < drop:
            continue
        q = Polynomial(basis.n, dict(zip(basis.monomials, V[:, k]))).shift(-np.asarray(center))
        out.append((float(w[k]), q))
    return out


def format_sos(terms: list, names: Sequence[str] | None = None, digits: int = 6) -> str:
    if not terms:
        return "0"
    return " + ".join(f"{w:.{digits}g}*({q.to_string(names, digits)})^2" for w, q in terms)


# ---------------------------------------------------------------------------
# SDP side: a template of Gram blocks and free multipliers inside a builder

class CertificateTemplate:
    """Decision variables of a degree-``d`` certificate over ``K``.

    ``coeff_terms[alpha]`` holds the linear terms (builder keys) of the
    coefficient of ``x^alpha`` in the certificate polynomial. ``K`` is taken
    in whatever coordinates the caller builds in; ``center`` records where
    those coordinates' origin sits so that extraction maps back.
    """

    def __init__(self, builder: conic.ConicBuilder, K: FeasibleSet, d: int, center=None,
                 vanish: frozenset = frozenset()):
        if d < 0:
            raise ValueError("degree bound must be >= 0")
        self.K = K
        self.d = d
        self.n = K.n
        self.center = np.zeros(K.n) if center is None else np.asarray(center, dtype=float)
        self.blocks: list = []  # (j, block id, kept positions in the full basis, full size)
        self.multipliers: list = []  # (i, [(gamma, key)])
        self.coeff_terms: dict = {}
        gs = [Polynomial.constant(1.0, K.n)] + list(K.inequalities)
        for j, g in enumerate(gs):
            dj = d - half_degree(g)
            if dj < 0:
                continue  # multiplier forced to zero at this degree bound
            smap = localizing_structure(g, dj)
            # sigma_j(0) = 0 is implied for j in vanish: drop the constant monomial
            # (position 0 in graded order) so the block keeps an interior
            keep = list(range(1 if j in vanish else 0, smap.size))
            if not keep:
                continue
            where = {full: k for k, full in enumerate(keep)}
            blk = builder.add_psd(len(keep))
            self.blocks.append((j, blk, keep, smap.size))
            for alpha, trip in smap.blocks.items():
                for r, c, v in trip:
                    if r not in where or c not in where:
                        continue
                    terms = self.coeff_terms.setdefault(alpha, {})
                    key = builder.entry(blk, where[r], where[c])
                    terms[key] = terms.get(key, 0.0) + (v if r == c else 2.0 * v)
        for i, h in enumerate(K.equalities):
            dm = 2 * (d - half_degree(h))
            if dm < 0:
                continue
            gammas = enumerate_monomials(K.n, dm).monomials
            keys = builder.add_free(len(gammas))
            self.multipliers.append((i, list(zip(gammas, keys))))
            for gamma, key in zip(gammas, keys):
                for beta, hc in h.items():
                    alpha = add_indices(gamma, beta)
                    terms = self.coeff_terms.setdefault(alpha, {})
                    terms[key] = terms.get(key, 0.0) + hc

    def support(self) -> list:
        return sorted(self.coeff_terms, key=grlex_key)

    def extract(self, builder: conic.ConicBuilder, x: np.ndarray, project: bool = True) -> PutinarCertificate:
        sos = []
        for j, blk, keep, size in self.blocks:
            m = len(keep)
            Gk = np.empty((m, m))
            for r in range(m):
                for c in range(r, m):
                    Gk[r, c] = Gk[c, r] = builder.value(builder.entry(blk, r, c), x)
            if project:
                Gk = project_psd(Gk)
            G = np.zeros((size, size))
            G[np.ix_(keep, keep)] = Gk
            sos.append((j, G))
        free = []
        for i, pairs in self.multipliers:
            phi = Polynomial(self.n, {gamma: builder.value(key, x) for gamma, key in pairs})
            free.append((i, phi.shift(-self.center)))
        return PutinarCertificate(self.n, self.d, sos, free, self.center.copy())


@dataclass
class MembershipResult:
    status: str  # feasible | infeasible | unknown
    certificate: PutinarCertificate | None = None
    report: CertificateReport | None = None
    solution: conic.ConicSolution | None = None


def membership(p: Polynomial, K: FeasibleSet, d: int, cfg: conic.SolverConfig | None = None,
               center=None, tol: float = RESIDUAL_TOL) -> MembershipResult:
    """Search for a degree-``d`` Putinar certificate of ``p`` on ``K``."""
    if p.n != K.n:
        raise ValueError("polynomial and feasible set disagree on the number of variables")
    cfg = cfg or conic.SolverConfig()
    center = np.zeros(K.n) if center is None else np.asarray(center, dtype=float)
    Kc = K.shift(center)
    pc = p.shift(center)
    B = conic.ConicBuilder("min")
    tmpl = CertificateTemplate(B, Kc, d, center)
    rows = set(tmpl.coeff_terms) | set(pc.support())
    for alpha in sorted(rows, key=grlex_key):
        B.add_row(tmpl.coeff_terms.get(alpha, {}), pc.coeff(alpha), name=alpha)
    B.set_objective({})
    problem = B.build()
    try:
        sol = conic.solve(problem, cfg)
    except conic.ConicError:
        logger.info("membership SDP could not be solved", exc_info=True)
        return MembershipResult("unknown")
    if sol.status == conic.INFEASIBLE:
        return MembershipResult("infeasible", solution=sol)
    if sol.status != conic.OPTIMAL:
        return MembershipResult("unknown", solution=sol)
    cert = tmpl.extract(B, sol.x)
    rep = verify(p, cert, K, tol=tol)
    status = "feasible" if rep.passed else "unknown"
    return MembershipResult(status, cert, rep, sol)


# ---------------------------------------------------------------------------
# JSON document

def _terms_to_json(p: Polynomial) -> list:
    return [[list(a), c] for a, c in p.items()]


def _terms_from_json(n: int, data) -> Polynomial:
    return Polynomial(n, {tuple(a): c for a, c in data})


def certificate_to_json(cert: PutinarCertificate) -> dict:
    """Plain-dict form; see ``schemas/certificate.schema.json``."""
    return {
        "n": cert.n,
        "d": cert.d,
        "center": [float(v) for v in cert.center],
        "sos": [{"constraint": j, "gram": G.tolist()} for j, G in cert.sos],
        "free": [{"equality": i, "terms": _terms_to_json(phi)} for i, phi in cert.free],
    }


def certificate_from_json(doc: dict) -> PutinarCertificate:
    n = int(doc["n"])
    return PutinarCertificate(
        n, int(doc["d"]),
        [(e["constraint"], np.array(e["gram"], dtype=float).reshape(len(e["gram"]), -1)
          if e["gram"] else np.zeros((0, 0))) for e in doc["sos"]],
        [(e["equality"], _terms_from_json(n, e["terms"])) for e in doc.get("free", [])],
        np.array(doc.get("center", [0.0] * n), dtype=float))
