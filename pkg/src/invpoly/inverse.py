"""Inverse polynomial optimization.

Given ``min {f(x) : x in K}`` and a feasible ``y``, find ``f~`` of degree
``D`` closest to ``f`` in a coefficient norm such that ``f~ - f~(y) + eps``
has a degree-``d`` Putinar certificate on ``K``. Then ``y`` is a global
(``eps``-)minimizer of ``f~`` on ``K``.

Coordinates
-----------
Certificates are always assembled in ``u = x - y`` so that the constant row
is the pinning ``f~(y)`` row. Decision variables are the coefficients of
``f~`` in the *norm frame*:

* ``"original"`` (default): coefficients in ``x``. The distance is measured
  in the caller's coordinates and structural pins refer to monomials of
  ``x``. A triangular shift matrix maps them to ``u``.
* ``"centered"``: coefficients in ``u`` directly. This is the y = 0
  convention, where distances are measured after recentring.

Both coincide when ``y = 0``.
"""

from __future__ import annotations

import dataclasses
import logging
import time
import warnings
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy.optimize import linprog, nnls

from . import conic
from .basis import MomentVector, basis_size, enumerate_monomials, localizing_structure
from .certify import (CertificateReport, CertificateTemplate, FeasibleSet, MembershipResult,
                      PutinarCertificate, half_degree, membership, verify)
from .polyalg import Polynomial, coeff_norm, grlex_key, shift_matrix, unit_index, zero_index

logger = logging.getLogger(__name__)

NORMS = ("l1", "l2", "linf")
FRAMES = ("original", "centered")
ACTIVE_TOL = 1e-8
RHO_ZERO = 1e-6
RHO_AGREE = 1e-6
Y_FEAS_TOL = 1e-8
RANK1_TOL = 1e-4
CONVEXITY_CAP = 120

_NORM_ALIASES = {"l1": "l1", "1": "l1", "l2": "l2", "2": "l2", "linf": "linf", "inf": "linf",
                 "l_inf": "linf", "max": "linf"}


def canonical_norm(norm) -> str:
    if norm in (1, 2):
        return f"l{norm}"
    if norm == np.inf:
        return "linf"
    try:
        return _NORM_ALIASES[str(norm).lower()]
    except KeyError:
        raise ValueError(f"unknown norm {norm!r}; use one of {NORMS}") from None


def _norm_key(norm: str):
    return {"l1": 1, "l2": 2, "linf": "inf"}[norm]


def lift(p: Polynomial, n_total: int, offset: int = 0) -> Polynomial:
    """Embed ``p`` into ``n_total`` variables starting at ``offset``."""
    pad_l, pad_r = (0,) * offset, (0,) * (n_total - offset - p.n)
    return Polynomial(n_total, {pad_l + a + pad_r: c for a, c in p.items()})


def hessian_form(p: Polynomial) -> Polynomial:
    """``u^T (nabla^2 p)(x) u`` as a polynomial in ``(x, u)``."""
    n = p.n
    H = p.hessian()
    u = [Polynomial.variable(n + i, 2 * n) for i in range(n)]
    out = Polynomial.zero(2 * n)
    for i in range(n):
        for j in range(n):
            if not H[i][j].is_zero():
                out = out + lift(H[i][j], 2 * n) * u[i] * u[j]
    return out


def lifted_set(K: FeasibleSet) -> FeasibleSet:
    """``K`` in ``(x, u)`` space together with the sphere ``1 - |u|^2 = 0``."""
    n = K.n
    sphere = 1.0 - sum((Polynomial.variable(n + i, 2 * n) ** 2 for i in range(n)),
                       Polynomial.zero(2 * n))
    return FeasibleSet(2 * n, [lift(g, 2 * n) for g in K.inequalities],
                       [lift(h, 2 * n) for h in K.equalities] + [sphere])


@dataclass
class InverseProblem:
    f: Polynomial
    K: FeasibleSet
    y: np.ndarray
    d: int
    norm: str = "l1"
    epsilon: float = 0.0
    structural: frozenset = frozenset()
    assume_box: bool = False
    require_convex: bool = False
    target_degree: int | None = None
    norm_frame: str = "original"
    convexity_cap: int = CONVEXITY_CAP

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float)
        n = self.K.n
        if self.f.n != n:
            raise ValueError(f"f has {self.f.n} variables but K has {n}")
        if self.y.shape != (n,):
            raise ValueError(f"y has shape {self.y.shape}, expected ({n},)")
        self.norm = canonical_norm(self.norm)
        if self.norm_frame not in FRAMES:
            raise ValueError(f"norm_frame must be one of {FRAMES}")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if self.target_degree is None:
            self.target_degree = max(self.f.degree, 1)
        if self.f.degree > self.target_degree:
            raise ValueError(f"f has degree {self.f.degree} > target degree {self.target_degree}; "
                             "truncate f or use solve_convex_quadratic")
        pins = {tuple(int(v) for v in a) for a in self.structural}
        for a in pins:
            if len(a) != n or sum(a) > self.target_degree:
                raise ValueError(f"structural index {a} is outside N^{n}_{self.target_degree}")
        pins.add(zero_index(n))
        self.structural = frozenset(pins)
        Keff = self.effective_set()
        viol = Keff.violation(self.y)
        if viol > Y_FEAS_TOL:
            raise ValueError(f"y violates the constraints of K by {viol:.3g}")
        need = Keff.min_order()
        if self.d < need:
            raise ValueError(f"degree bound d={self.d} is below max v_j = {need}")
        if 2 * self.d < self.target_degree:
            raise ValueError(f"2d = {2 * self.d} cannot match target degree {self.target_degree}")

    @property
    def n(self) -> int:
        return self.K.n

    def effective_set(self) -> FeasibleSet:
        return self.K.with_box() if self.assume_box else self.K

    def replace(self, **kw) -> "InverseProblem":
        fields_ = dict(f=self.f, K=self.K, y=self.y, d=self.d, norm=self.norm, epsilon=self.epsilon,
                       structural=self.structural, assume_box=self.assume_box,
                       require_convex=self.require_convex, target_degree=self.target_degree,
                       norm_frame=self.norm_frame, convexity_cap=self.convexity_cap)
        fields_.update(kw)
        return InverseProblem(**fields_)


def quadratic_form_pins(n: int, degree: int = 2) -> frozenset:
    """Pin every coefficient except the degree-2 ones (f~ is a quadratic form)."""
    return frozenset(a for a in enumerate_monomials(n, degree).monomials if sum(a) != 2)


def structural_preset(name: str, n: int, degree: int) -> frozenset:
    if name in ("quadratic-form", "quadratic_form"):
        return quadratic_form_pins(n, degree)
    if name == "none":
        return frozenset()
    if name == "homogeneous":
        return frozenset(a for a in enumerate_monomials(n, degree).monomials if sum(a) != degree)
    raise ValueError(f"unknown structural preset {name!r}")


# ---------------------------------------------------------------------------
# frame bookkeeping

@dataclass
class _Frame:
    idx: list           # N^n_D in grlex order
    pos: dict
    T: np.ndarray       # frame coefficients -> centred coefficients
    f_ref: Polynomial   # f in the frame
    free: list          # non-pinned indices (never the zero index)
    K_frame: FeasibleSet  # K in frame coordinates (for the Hessian certificate)


def _frame(p: InverseProblem) -> _Frame:
    idx = list(enumerate_monomials(p.n, p.target_degree).monomials)
    pos = {a: i for i, a in enumerate(idx)}
    Keff = p.effective_set()
    if p.norm_frame == "original":
        T = shift_matrix(idx, p.y)
        f_ref, K_frame = p.f, Keff
    else:
        T = np.eye(len(idx))
        f_ref, K_frame = p.f.shift(p.y), Keff.shift(p.y)
    free = [a for a in idx if a not in p.structural]
    return _Frame(idx, pos, T, f_ref, free, K_frame)


def _frame_to_original(p: InverseProblem, fr: _Frame, coeffs: dict) -> Polynomial:
    """Assemble f~ from frame coefficients; constant pinned to f's."""
    vals = {a: fr.f_ref.coeff(a) for a in fr.idx if a in p.structural}
    vals.update(coeffs)
    g = Polynomial(p.n, vals)
    if p.norm_frame == "centered":
        g = g.shift(-p.y)
    return g - g.constant_term + p.f.constant_term


def distance(p: InverseProblem, f_tilde: Polynomial) -> float:
    """``||f~ - f||_k`` over non-constant coefficients in the problem's frame."""
    diff = f_tilde - p.f
    if p.norm_frame == "centered":
        diff = diff.shift(p.y)
    return coeff_norm(diff, _norm_key(p.norm), exclude_constant=True)


# ---------------------------------------------------------------------------
# primal

def centered_set(K: FeasibleSet, y, tol: float = ACTIVE_TOL) -> FeasibleSet:
    """``K`` in ``u = x - y``; constants of constraints active at ``y`` are snapped to 0."""
    Kc = K.shift(y)

    def snap(g):
        return g - g.constant_term if abs(g.constant_term) <= tol else g

    return FeasibleSet(K.n, [snap(g) for g in Kc.inequalities], [snap(h) for h in Kc.equalities])


def vanishing_multipliers(Kc: FeasibleSet, epsilon: float) -> frozenset:
    """Multipliers forced to vanish at the origin by the constant row.

    With ``eps = 0`` the constant coefficient reads ``sum_j sigma_j(0) g_j(0) = 0``;
    every term is nonnegative, so ``sigma_j(0) = 0`` whenever ``g_j(0) > 0``
    (always for ``g_0 = 1``).
    """
    if epsilon:
        return frozenset()
    return frozenset([0] + [j + 1 for j, g in enumerate(Kc.inequalities) if g.constant_term > 0])


@dataclass
class PrimalMap:
    builder: conic.ConicBuilder
    frame: _Frame
    coeff_keys: dict      # alpha -> builder key
    template: CertificateTemplate
    match_rows: dict      # beta -> row index of the coefficient-matching equality
    convexity: CertificateTemplate | None = None
    hessian_block: int | None = None


def _norm_rows(B: conic.ConicBuilder, norm: str, fr: _Frame, keys: dict) -> dict:
    obj: dict = {}
    if not fr.free:
        return obj
    if norm == "l1":
        for a in fr.free:
            pk, qk = B.add_nonneg(2)
            B.add_row({keys[a]: 1.0, pk: -1.0, qk: 1.0}, fr.f_ref.coeff(a), name=("l1", a))
            obj[pk] = obj[qk] = 1.0
    elif norm == "linf":
        (t,) = B.add_nonneg(1)
        for a in fr.free:
            sp_, sm = B.add_nonneg(2)
            B.add_row({t: 1.0, keys[a]: -1.0, sp_: -1.0}, -fr.f_ref.coeff(a), name=("linf+", a))
            B.add_row({t: 1.0, keys[a]: 1.0, sm: -1.0}, fr.f_ref.coeff(a), name=("linf-", a))
        obj[t] = 1.0
    else:
        for a in fr.free:
            blk = B.add_psd(2)
            B.add_row({B.entry(blk, 0, 1): 1.0, keys[a]: -1.0}, -fr.f_ref.coeff(a), name=("l2", a))
            B.add_row({B.entry(blk, 1, 1): 1.0}, 1.0, name=("l2w", a))
            obj[B.entry(blk, 0, 0)] = 1.0
    return obj


def _hessian_lmi(B: conic.ConicBuilder, p: InverseProblem, fr: _Frame, keys: dict) -> int:
    """Constant-Hessian LMI for quadratic targets."""
    n = p.n
    blk = B.add_psd(n)
    for i in range(n):
        for j in range(i, n):
            a = tuple(np.add(unit_index(i, n), unit_index(j, n)))
            w = 2.0 if i == j else 1.0
            terms = {B.entry(blk, i, j): 1.0}
            rhs = 0.0
            if a in keys:
                terms[keys[a]] = -w
            else:
                rhs = w * fr.f_ref.coeff(a)
            B.add_row(terms, rhs, name=("hess", i, j))
    return blk


def _convexity_template(B: conic.ConicBuilder, p: InverseProblem, fr: _Frame, keys: dict):
    n2 = 2 * p.n
    size = basis_size(n2, p.d)
    if size > p.convexity_cap:
        raise ValueError(f"convexity certificate needs a {size}x{size} Gram block over (x, u); "
                         f"cap is {p.convexity_cap}")
    K2 = lifted_set(fr.K_frame)
    tmpl = CertificateTemplate(B, K2, p.d)
    forms = {a: hessian_form(Polynomial.monomial(a)) for a in fr.idx if sum(a) >= 2}
    rows = set(tmpl.coeff_terms)
    for P in forms.values():
        rows |= set(P.support())
    for gamma in sorted(rows, key=grlex_key):
        terms = dict(tmpl.coeff_terms.get(gamma, {}))
        rhs = 0.0
        for a, P in forms.items():
            v = P.coeff(gamma)
            if v == 0.0:
                continue
            if a in keys:
                terms[keys[a]] = terms.get(keys[a], 0.0) - v
            else:
                rhs += v * fr.f_ref.coeff(a)
        B.add_row(terms, rhs, name=("cvx", gamma))
    return tmpl


def build_primal(p: InverseProblem) -> tuple:
    """Assemble the primal SDP; returns ``(ConicProblem, PrimalMap)``."""
    fr = _frame(p)
    B = conic.ConicBuilder("min")
    Kc = centered_set(p.effective_set(), p.y)
    tmpl = CertificateTemplate(B, Kc, p.d, center=p.y, vanish=vanishing_multipliers(Kc, p.epsilon))
    keys = dict(zip(fr.free, B.add_free(len(fr.free))))
    zero = zero_index(p.n)
    rows = sorted(set(tmpl.coeff_terms) | set(fr.idx), key=grlex_key)
    match_rows = {}
    for beta in rows:
        terms = dict(tmpl.coeff_terms.get(beta, {}))
        if beta == zero:
            rhs = p.epsilon
        else:
            rhs = 0.0
            if beta in fr.pos:
                r = fr.pos[beta]
                for a in fr.idx:
                    t = fr.T[r, fr.pos[a]]
                    if t == 0.0 or a == zero:
                        continue
                    if a in keys:
                        terms[keys[a]] = terms.get(keys[a], 0.0) - t
                    else:
                        rhs += t * fr.f_ref.coeff(a)
        if not terms and rhs == 0.0:
            continue
        match_rows[beta] = B.add_row(terms, rhs, name=("match", beta))
    obj = _norm_rows(B, p.norm, fr, keys)
    pmap = PrimalMap(B, fr, keys, tmpl, match_rows)
    if p.require_convex:
        if p.target_degree <= 2:
            pmap.hessian_block = _hessian_lmi(B, p, fr, keys)
        else:
            pmap.convexity = _convexity_template(B, p, fr, keys)
    B.set_objective(obj)
    return B.build(), pmap


# ---------------------------------------------------------------------------
# dual

def build_dual(p: InverseProblem) -> conic.ConicProblem:
    """Moment-side SDP; its optimal value equals the primal's (no duality gap).

    Variables are moments ``z_beta`` of ``u = x - y``. With
    ``m_alpha = L_z((u + y)^alpha - y^alpha)`` in the original frame (or
    ``z_alpha`` in the centred frame) the objective is
    ``L_z(f(y) - f(u + y) - eps) = -eps z_0 - sum_alpha f_alpha m_alpha``.

    This is the exact dual of the program :func:`build_primal` assembles, so
    for ``eps = 0`` the moment and localizing matrices of multipliers that
    must vanish at ``y`` lose their constant row and column.
    """
    if p.require_convex:
        raise NotImplementedError("the moment-side program is not built for convexity constraints")
    fr = _frame(p)
    n = p.n
    zero = zero_index(n)
    Kc = centered_set(p.effective_set(), p.y)
    vanish = vanishing_multipliers(Kc, p.epsilon)
    B = conic.ConicBuilder("max")
    zkeys: dict = {}

    def z(beta):
        if beta not in zkeys:
            zkeys[beta] = B.add_free(1)[0]
        return zkeys[beta]

    def m_terms(a) -> dict:
        col = fr.pos[a]
        return {z(b): fr.T[fr.pos[b], col] for b in fr.idx
                if b != zero and fr.T[fr.pos[b], col] != 0.0}

    # localizing matrices: S_j = sum_beta z_beta C^j_beta, S_j PSD
    gs = [Polynomial.constant(1.0, n)] + list(Kc.inequalities)
    for j, g in enumerate(gs):
        dj = p.d - half_degree(g)
        if dj < 0:
            continue
        smap = localizing_structure(g, dj)
        keep = list(range(1 if j in vanish else 0, smap.size))
        if not keep:
            continue
        where = {full: k for k, full in enumerate(keep)}
        blk = B.add_psd(len(keep))
        acc: dict = {}
        for beta, trip in smap.blocks.items():
            for r, c, v in trip:
                if r in where and c in where:
                    cell = acc.setdefault((where[r], where[c]), {})
                    cell[z(beta)] = cell.get(z(beta), 0.0) - v
        for r in range(len(keep)):
            for c in range(r, len(keep)):
                terms = acc.get((r, c), {})
                terms[B.entry(blk, r, c)] = 1.0
                B.add_row(terms, 0.0, name=("loc", j, r, c))
    # equality constraints: L_z(h u^gamma) = 0
    for i, h in enumerate(Kc.equalities):
        dm = 2 * (p.d - half_degree(h))
        if dm < 0:
            continue
        for gamma in enumerate_monomials(n, dm).monomials:
            terms: dict = {}
            for beta, hc in h.items():
                k = z(tuple(np.add(gamma, beta)))
                terms[k] = terms.get(k, 0.0) + hc
            B.add_row(terms, 0.0, name=("eq", i, gamma))

    obj: dict = {}
    if p.epsilon:
        obj[z(zero)] = -p.epsilon
    for a in fr.idx:
        fa = fr.f_ref.coeff(a)
        if a == zero or not fa:
            continue
        for k, v in m_terms(a).items():
            obj[k] = obj.get(k, 0.0) - fa * v
    if p.norm == "l1":
        for a in fr.free:
            s1, s2 = B.add_nonneg(2)
            mt = m_terms(a)
            B.add_row({**mt, s1: 1.0}, 1.0, name=("ub", a))
            B.add_row({**{k: -v for k, v in mt.items()}, s2: 1.0}, 1.0, name=("lb", a))
    elif p.norm == "linf":
        total: dict = {}
        for a in fr.free:
            uk, vk = B.add_nonneg(2)
            terms = {uk: 1.0, vk: -1.0}
            for k, v in m_terms(a).items():
                terms[k] = terms.get(k, 0.0) + v
            B.add_row(terms, 0.0, name=("uv", a))
            total[uk] = total[vk] = 1.0
        if total:
            (sl,) = B.add_nonneg(1)
            total[sl] = 1.0
            B.add_row(total, 1.0, name=("budget",))
    else:
        for a in fr.free:
            blk = B.add_psd(2)
            B.add_row({B.entry(blk, 0, 0): 1.0}, 1.0, name=("d00", a))
            terms = {B.entry(blk, 0, 1): 2.0}
            terms.update(m_terms(a))
            B.add_row(terms, 0.0, name=("d01", a))
            # -f_a m_a is already in obj through z; the block adds -Delta11
            obj[B.entry(blk, 1, 1)] = -1.0
    B.set_objective(obj)
    return B.build()


# ---------------------------------------------------------------------------
# solutions

@dataclass
class GapBound:
    lower: float | None
    upper: float
    factor: float | None
    source: str
    note: str = ""

    def contains(self, value: float, tol: float = 0.0) -> bool:
        lo = -np.inf if self.lower is None else self.lower
        return lo - tol <= value <= self.upper + tol


@dataclass
class InverseSolution:
    status: str
    f_tilde: Polynomial | None = None
    rho: float | None = None
    rho_objective: float | None = None
    certificate: PutinarCertificate | None = None
    report: CertificateReport | None = None
    dual_moments: MomentVector | None = None
    dual_objective: float | None = None
    gap_bound: GapBound | None = None
    convexity_certificate: PutinarCertificate | None = None
    convexity_report: CertificateReport | None = None
    conic_solution: conic.ConicSolution | None = None
    seconds: float = 0.0
    notes: list = field(default_factory=list)

    @property
    def verified(self) -> bool:
        ok = self.report is not None and self.report.passed
        if self.convexity_report is not None:
            ok = ok and self.convexity_report.passed
        return ok

    @property
    def rho_consistent(self) -> bool:
        return (self.rho is not None and self.rho_objective is not None
                and abs(self.rho - self.rho_objective) <= RHO_AGREE * (1 + abs(self.rho)))

    @property
    def y_optimal(self) -> bool:
        return self.rho is not None and self.rho <= RHO_ZERO

    @property
    def z0(self) -> float | None:
        """Mass of the dual moment vector (absent when the constant row was reduced away)."""
        z = self.dual_moments
        return z.mass if z is not None and zero_index(z.n) in z else None


def _dual_moments(pmap: PrimalMap, sol: conic.ConicSolution, n: int) -> MomentVector:
    return MomentVector(n, {beta: -float(sol.y[r]) for beta, r in pmap.match_rows.items()})


def solve_inverse(p: InverseProblem, cfg: conic.SolverConfig | None = None,
                  cross_check: bool = True) -> InverseSolution:
    cfg = cfg or conic.SolverConfig()
    t0 = time.perf_counter()
    problem, pmap = build_primal(p)
    sol = conic.solve(problem, cfg)
    out = InverseSolution(sol.status, conic_solution=sol)
    if sol.status == conic.INFEASIBLE:
        out.notes.append("no f~ admits a certificate at this degree bound")
        out.seconds = time.perf_counter() - t0
        return out
    B, fr = pmap.builder, pmap.frame
    coeffs = {a: B.value(k, sol.x) for a, k in pmap.coeff_keys.items()}
    f_tilde = _frame_to_original(p, fr, coeffs)
    out.f_tilde = f_tilde
    out.rho = distance(p, f_tilde)
    out.rho_objective = sol.objective_value
    out.certificate = pmap.template.extract(B, sol.x)
    target = f_tilde - f_tilde(p.y) + p.epsilon
    out.report = verify(target, out.certificate, p.effective_set())
    out.dual_moments = _dual_moments(pmap, sol, p.n)
    if pmap.convexity is not None:
        cert = pmap.convexity.extract(B, sol.x)
        g = f_tilde if p.norm_frame == "original" else f_tilde.shift(p.y)
        out.convexity_certificate = cert
        out.convexity_report = verify(hessian_form(g), cert, lifted_set(fr.K_frame))
    if not out.rho_consistent:
        out.notes.append(f"recomputed distance {out.rho:.6g} differs from objective "
                         f"{out.rho_objective:.6g}")
    if not out.verified:
        out.notes.append("certificate failed independent verification")
    if cross_check and sol.status == conic.OPTIMAL and not p.require_convex:
        dual = build_dual(p)
        dsol = conic.solve(dual, cfg)
        if dsol.status != conic.OPTIMAL:
            # one retry on the other interior point code, tolerances x10
            other = "cvxopt" if cfg.backend == "clarabel" else "clarabel"
            alt = conic.solve(dual, dataclasses.replace(cfg, backend=other, gap_tol=10 * cfg.gap_tol,
                                                        feas_tol=10 * cfg.feas_tol))
            if alt.status == conic.OPTIMAL:
                out.notes.append(f"dual solved by {other} after {dsol.status} from {cfg.backend}")
                dsol = alt
        if dsol.status == conic.OPTIMAL:
            out.dual_objective = dsol.objective_value
        else:
            out.notes.append(f"dual program ended with status {dsol.status}")
    out.seconds = time.perf_counter() - t0
    return out


def solve_structural(p: InverseProblem, cfg: conic.SolverConfig | None = None) -> InverseSolution:
    """Same as :func:`solve_inverse`; pinned coefficients come from ``p.structural``."""
    if p.structural == {zero_index(p.n)}:
        logger.info("structural set holds only the constant; this is the unconstrained problem")
    return solve_inverse(p, cfg)


def quadratic_matrix(f: Polynomial) -> np.ndarray:
    """Symmetric ``A`` with ``x^T A x`` equal to the degree-2 part of ``f``."""
    n = f.n
    A = np.zeros((n, n))
    for a, c in f.homogeneous_part(2).items():
        nz = [i for i in range(n) if a[i]]
        if len(nz) == 1:
            A[nz[0], nz[0]] = c
        else:
            A[nz[0], nz[1]] = A[nz[1], nz[0]] = c / 2.0
    return A


# ---------------------------------------------------------------------------
# canonical l1 form and boolean programs

@dataclass
class CanonicalSolution:
    b: np.ndarray
    lam: np.ndarray
    theta: np.ndarray
    active_set: list
    cone_residual: float
    lower: list = field(default_factory=list)   # 0/1 path: indices at the lower value
    upper: list = field(default_factory=list)


def active_set(K: FeasibleSet, y, tol: float = ACTIVE_TOL) -> list:
    return K.active_set(y, tol)


def cone_condition(f: Polynomial, K: FeasibleSet, y, b) -> tuple:
    """NNLS fit of ``b + grad f(y)`` by active constraint gradients."""
    J = active_set(K, y)
    rhs = np.asarray(b, dtype=float) + np.array([g(y) for g in f.gradient()])
    if not J:
        return np.zeros(0), J, float(np.linalg.norm(rhs))
    G = np.array([[d(y) for d in K.inequalities[j].gradient()] for j in J]).T
    theta, res = nnls(G, rhs)
    return theta, J, float(res)


@dataclass
class BoxMap:
    """``x = center + scale * u``; maps problems into ``[-1, 1]^n``."""

    center: np.ndarray
    scale: np.ndarray

    def to_original(self, q: Polynomial) -> Polynomial:
        return q.substitute_affine(-self.center / self.scale, 1.0 / self.scale)

    def point_to_original(self, u) -> np.ndarray:
        return self.center + self.scale * np.asarray(u, dtype=float)


def box_scaled(p: InverseProblem, lower, upper) -> tuple:
    """Recentre at ``y`` and scale so that ``K`` (inside ``[lower, upper]``) lies in the unit box."""
    lower, upper = np.asarray(lower, float), np.asarray(upper, float)
    if np.any(p.y < lower) or np.any(p.y > upper):
        raise ValueError("y is outside the supplied box")
    scale = np.maximum(upper - p.y, p.y - lower)
    if np.any(scale <= 0):
        raise ValueError("box is degenerate in some coordinate")
    bm = BoxMap(p.y.copy(), scale)
    q = p.replace(f=p.f.substitute_affine(p.y, scale), K=p.K.affine(p.y, scale),
                  y=np.zeros(p.n), assume_box=True)
    return q, bm


def solve_canonical_l1(p: InverseProblem, cfg: conic.SolverConfig | None = None) -> tuple:
    """Canonical l1 program: ``f~ = f + b'x + sum lam_i x_i^2`` with ``y = 0`` and the box added."""
    cfg = cfg or conic.SolverConfig()
    if p.norm != "l1":
        raise ValueError("the canonical form holds for the l1 norm only")
    if not p.assume_box:
        raise ValueError("canonical form needs assume_box=True (K inside [-1, 1]^n)")
    if np.any(p.y != 0.0):
        raise ValueError("canonical form is stated at y = 0; map the problem with box_scaled() first")
    if p.structural != {zero_index(p.n)}:
        raise ValueError("structural pins are not supported by the canonical program")
    t0 = time.perf_counter()
    n = p.n
    Keff = p.effective_set()
    Kc = centered_set(Keff, p.y)
    B = conic.ConicBuilder("min")
    tmpl = CertificateTemplate(B, Kc, p.d, vanish=vanishing_multipliers(Kc, p.epsilon))
    bp = B.add_nonneg(n)
    bm = B.add_nonneg(n)
    quad = p.target_degree > 1
    lam = B.add_nonneg(n) if quad else []
    extra: dict = {}
    for i in range(n):
        extra.setdefault(unit_index(i, n), {}).update({bp[i]: -1.0, bm[i]: 1.0})
        if quad:
            extra.setdefault(unit_index(i, n, 2), {})[lam[i]] = -1.0
    zero = zero_index(n)
    for beta in sorted(set(tmpl.coeff_terms) | set(p.f.support()) | set(extra), key=grlex_key):
        terms = dict(tmpl.coeff_terms.get(beta, {}))
        terms.update(extra.get(beta, {}))
        rhs = p.epsilon if beta == zero else p.f.coeff(beta)
        if terms or rhs:
            B.add_row(terms, rhs, name=("match", beta))
    B.set_objective({k: 1.0 for k in bp + bm + lam})
    sol = conic.solve(B.build(), cfg)
    out = InverseSolution(sol.status, conic_solution=sol)
    if sol.status == conic.INFEASIBLE:
        out.seconds = time.perf_counter() - t0
        return out, None
    b = np.array([B.value(bp[i], sol.x) - B.value(bm[i], sol.x) for i in range(n)])
    lv = np.array([B.value(k, sol.x) for k in lam]) if quad else np.zeros(n)
    xs = Polynomial.variables(n)
    f_tilde = p.f + sum((b[i] * xs[i] + lv[i] * xs[i] ** 2 for i in range(n)), Polynomial.zero(n))
    out.f_tilde = f_tilde
    out.rho = distance(p, f_tilde)
    out.rho_objective = sol.objective_value
    out.certificate = tmpl.extract(B, sol.x)
    out.report = verify(f_tilde - f_tilde(p.y) + p.epsilon, out.certificate, Keff)
    theta, J, res = cone_condition(p.f, Keff, p.y, b)
    out.seconds = time.perf_counter() - t0
    return out, CanonicalSolution(b, lv, theta, J, res)


def _boolean_kind(K: FeasibleSet):
    """Detect ``x_i^2 - x_i = 0`` or ``x_i^2 - 1 = 0`` per variable; returns 'zero_one' or 'pm_one'."""
    n = K.n
    if K.inequalities or len(K.equalities) != n:
        return None
    kinds = {}
    for h in K.equalities:
        hh = h / h.coeff(max(h.support(), key=grlex_key)) if not h.is_zero() else h
        for i in range(n):
            x = Polynomial.variable(i, n)
            if hh == x ** 2 - x:
                kinds[i] = "zero_one"
            elif hh == x ** 2 - 1.0:
                kinds[i] = "pm_one"
    if len(kinds) != n or len(set(kinds.values())) != 1:
        return None
    return next(iter(kinds.values()))


def solve_zero_one(p: InverseProblem, cfg: conic.SolverConfig | None = None) -> tuple:
    """Boolean programs: ``f~ = f + b'(x - y)`` with sign-constrained ``b``."""
    cfg = cfg or conic.SolverConfig()
    kind = _boolean_kind(p.K)
    if kind is None:
        raise ValueError("K must consist of exactly one boolean equality x_i^2 - x_i = 0 "
                         "(or x_i^2 - 1 = 0) per variable")
    if p.norm != "l1":
        raise ValueError("the boolean form is stated for the l1 norm")
    lo_val = 0.0 if kind == "zero_one" else -1.0
    hi_val = 1.0
    n = p.n
    lower = [i for i in range(n) if abs(p.y[i] - lo_val) <= 1e-12]
    upper = [i for i in range(n) if abs(p.y[i] - hi_val) <= 1e-12]
    if len(lower) + len(upper) != n:
        raise ValueError(f"y = {p.y} is not a vertex of the boolean cube")
    sign = np.array([1.0 if i in lower else -1.0 for i in range(n)])
    t0 = time.perf_counter()
    Kc = centered_set(p.K, p.y)
    fc = p.f.shift(p.y)
    B = conic.ConicBuilder("min")
    tmpl = CertificateTemplate(B, Kc, p.d, center=p.y, vanish=vanishing_multipliers(Kc, p.epsilon))
    s = B.add_nonneg(n)
    zero = zero_index(n)
    extra = {unit_index(i, n): {s[i]: -sign[i]} for i in range(n)}
    for beta in sorted(set(tmpl.coeff_terms) | set(fc.support()) | set(extra), key=grlex_key):
        terms = dict(tmpl.coeff_terms.get(beta, {}))
        terms.update(extra.get(beta, {}))
        rhs = p.epsilon if beta == zero else fc.coeff(beta)
        if terms or rhs:
            B.add_row(terms, rhs, name=("match", beta))
    B.set_objective({k: 1.0 for k in s})
    sol = conic.solve(B.build(), cfg)
    out = InverseSolution(sol.status, conic_solution=sol)
    if sol.status == conic.INFEASIBLE:
        out.seconds = time.perf_counter() - t0
        return out, None
    b = sign * np.array([B.value(k, sol.x) for k in s])
    xs = Polynomial.variables(n)
    f_tilde = p.f + sum((b[i] * (xs[i] - p.y[i]) for i in range(n)), Polynomial.zero(n))
    f_tilde = f_tilde - f_tilde.constant_term + p.f.constant_term
    out.f_tilde = f_tilde
    out.rho = distance(p, f_tilde)
    out.rho_objective = sol.objective_value
    out.certificate = tmpl.extract(B, sol.x)
    out.report = verify(f_tilde - f_tilde(p.y) + p.epsilon, out.certificate, p.K)
    out.seconds = time.perf_counter() - t0
    return out, CanonicalSolution(b, np.zeros(n), np.zeros(0), [], 0.0, lower, upper)


# ---------------------------------------------------------------------------
# convexity

@dataclass
class QuadraticModel:
    """``f(x) = 1/2 x^T A x + b^T x + c``."""

    A: np.ndarray
    b: np.ndarray
    c: float

    def polynomial(self) -> Polynomial:
        n = len(self.b)
        xs = Polynomial.variables(n)
        p = Polynomial.constant(self.c, n)
        for i in range(n):
            p = p + self.b[i] * xs[i] + 0.5 * self.A[i, i] * xs[i] ** 2
            for j in range(i + 1, n):
                p = p + self.A[i, j] * xs[i] * xs[j]
        return p

    @classmethod
    def from_polynomial(cls, f: Polynomial, at=None) -> "QuadraticModel":
        """Second-order part of ``f`` around ``at`` (terms above degree 2 dropped)."""
        n = f.n
        g = f.shift(np.zeros(n) if at is None else at)
        A = 2.0 * quadratic_matrix(g)
        b = np.array([g.coeff(unit_index(i, n)) for i in range(n)])
        return cls(A, b, g.constant_term)


@dataclass
class ConvexQuadraticResult:
    model: QuadraticModel          # around y: f~(x) = 1/2 (x-y)'A(x-y) + b'(x-y) + c
    f_tilde: Polynomial
    rho: float
    rho_b: float
    rho_A: float
    lam: np.ndarray
    active_set: list
    lagrangian_grad: float
    min_eig: float


def _is_concave(g: Polynomial) -> bool:
    if g.degree <= 1:
        return True
    if g.degree > 2:
        return False
    H = 2.0 * quadratic_matrix(g)
    return float(np.linalg.eigvalsh(H).max()) <= 1e-12


def _lp_norm_fit(G: np.ndarray, b: np.ndarray, norm: str) -> tuple:
    """``min_{lam >= 0} ||b - G lam||_k``; returns ``(lam, value)``."""
    n, m = G.shape
    if m == 0:
        return np.zeros(0), coeff_norm(Polynomial(1, {(i,): v for i, v in enumerate(b)}), _norm_key(norm), False)
    if norm == "l2":
        lam, r = nnls(G, b)
        return lam, float(r ** 2)
    if norm == "l1":
        # vars: lam (m), e (n); min sum e, -e <= b - G lam <= e
        c = np.r_[np.zeros(m), np.ones(n)]
        A = np.block([[-G, -np.eye(n)], [G, -np.eye(n)]])
        rhs = np.r_[-b, b]
        bounds = [(0, None)] * (m + n)
    else:
        c = np.r_[np.zeros(m), 1.0]
        A = np.block([[-G, -np.ones((n, 1))], [G, -np.ones((n, 1))]])
        rhs = np.r_[-b, b]
        bounds = [(0, None)] * (m + 1)
    res = linprog(c, A_ub=A, b_ub=rhs, bounds=bounds, method="highs")
    if res.status != 0:
        raise RuntimeError(f"linear program failed: {res.message}")
    return res.x[:m], float(res.fun)


def psd_projection(A: np.ndarray, norm: str, cfg: conic.SolverConfig | None = None) -> tuple:
    """Nearest PSD matrix in the entry-wise norm; returns ``(A~, distance)``."""
    A = 0.5 * (A + A.T)
    n = A.shape[0]
    if n == 0 or np.linalg.eigvalsh(A).min() >= 0.0:
        return A.copy(), 0.0
    if norm == "l2":
        w, V = np.linalg.eigh(A)
        At = (V * np.clip(w, 0, None)) @ V.T
        return At, float(((At - A) ** 2).sum())
    B = conic.ConicBuilder("min")
    blk = B.add_psd(n)
    obj: dict = {}
    t = B.add_nonneg(1)[0] if norm == "linf" else None
    for i in range(n):
        for j in range(i, n):
            key = B.entry(blk, i, j)
            p_, q_ = B.add_nonneg(2)
            B.add_row({key: 1.0, p_: -1.0, q_: 1.0}, A[i, j])
            w = 1.0 if i == j else 2.0
            if norm == "l1":
                obj[p_] = obj.get(p_, 0.0) + w
                obj[q_] = obj.get(q_, 0.0) + w
            else:
                s_ = B.add_nonneg(1)[0]
                B.add_row({t: 1.0, p_: -1.0, q_: -1.0, s_: -1.0}, 0.0)
    if norm == "linf":
        obj = {t: 1.0}
    B.set_objective(obj)
    sol = conic.solve(B.build(), cfg or conic.SolverConfig())
    if sol.status != conic.OPTIMAL:
        raise RuntimeError(f"PSD projection ended with status {sol.status}")
    At = np.array([[B.value(B.entry(blk, i, j), sol.x) for j in range(n)] for i in range(n)])
    At = 0.5 * (At + At.T)
    diff = np.abs(At - A)
    return At, float(diff.sum() if norm == "l1" else diff.max())


def solve_convex_quadratic(p: InverseProblem, cfg: conic.SolverConfig | None = None) -> tuple:
    """Two-step method for concave ``K``: LP for ``b~`` then PSD projection of ``A``."""
    cfg = cfg or conic.SolverConfig()
    bad = [j for j, g in enumerate(p.K.inequalities) if not _is_concave(g)]
    bad += [f"eq{i}" for i, h in enumerate(p.K.equalities) if h.degree > 1]
    if bad:
        raise ValueError(f"constraints {bad} are not concave; use require_convex=True with "
                         "solve_inverse (Hessian certificate) instead")
    t0 = time.perf_counter()
    model = QuadraticModel.from_polynomial(p.f, p.y)
    J = p.K.active_set(p.y)
    G = np.array([[d(p.y) for d in p.K.inequalities[j].gradient()] for j in J]).reshape(len(J), p.n).T
    lam, rho_b = _lp_norm_fit(G, model.b, p.norm)
    bt = G @ lam if J else np.zeros(p.n)
    At, rho_A = psd_projection(model.A, p.norm, cfg)
    rho = max(rho_A, rho_b) if p.norm == "linf" else rho_A + rho_b
    tm = QuadraticModel(At, bt, model.c)
    f_tilde = tm.polynomial().shift(-p.y)
    L = f_tilde - sum((lam[k] * p.K.inequalities[j] for k, j in enumerate(J)), Polynomial.zero(p.n))
    grad = float(np.abs([dL(p.y) for dL in L.gradient()]).max())
    min_eig = float(np.linalg.eigvalsh(At).min()) if p.n else 0.0
    res = ConvexQuadraticResult(tm, f_tilde, rho, rho_b, rho_A, lam, J, grad, min_eig)
    sol = InverseSolution(conic.OPTIMAL, f_tilde=f_tilde, rho=rho, rho_objective=rho,
                          seconds=time.perf_counter() - t0)
    return sol, res


def convexity_certificate(g: Polynomial, K: FeasibleSet, d: int,
                          cfg: conic.SolverConfig | None = None, cap: int = CONVEXITY_CAP) -> MembershipResult:
    """Search for ``u' hess(g)(x) u = sum psi_j g_j + psi (1 - |u|^2)`` at degree ``d``."""
    size = basis_size(2 * K.n, d)
    if size > cap:
        raise ValueError(f"Gram block would be {size}x{size}; cap is {cap}")
    return membership(hessian_form(g), lifted_set(K), d, cfg)


def convexity_constraints(p: InverseProblem) -> conic.ConicProblem:
    """The primal program with the convexity rows merged in (``require_convex`` forced on)."""
    q = p if p.require_convex else p.replace(require_convex=True)
    return build_primal(q)[0]


# ---------------------------------------------------------------------------
# gap bounds

def _interval_pow(lo: float, hi: float, k: int) -> tuple:
    if k == 0:
        return 1.0, 1.0
    a, b = lo ** k, hi ** k
    if k % 2 == 0 and lo < 0 < hi:
        return 0.0, max(a, b)
    return min(a, b), max(a, b)


def _interval_monomial(alpha, lo, hi) -> tuple:
    out = (1.0, 1.0)
    for i, k in enumerate(alpha):
        a, b = _interval_pow(lo[i], hi[i], k)
        prods = [out[0] * a, out[0] * b, out[1] * a, out[1] * b]
        out = (min(prods), max(prods))
    return out


def optimality_gap_bound(sol: InverseSolution, p: InverseProblem, xstar_hint=None,
                         box=None) -> GapBound:
    """Interval ``[f(y) - eps - rho * factor, f(y)]`` that contains ``f*``.

    ``factor`` bounds ``|x*^a - y^a|`` (original frame) or ``|(x* - y)^a|``
    (centred frame) over the free monomials; for ``linf`` the sum over
    monomials is used. Sources in order of preference: ``xstar_hint``,
    ``box=(lower, upper)``, ``assume_box`` (the unit box).
    """
    fy = p.f(p.y)
    if sol.rho is None:
        raise ValueError("solution carries no distance")
    if p.norm == "l2":
        return GapBound(None, fy, None, "none", "no gap bound is known for the l2 norm")
    fr = _frame(p)
    mons = fr.free
    if xstar_hint is not None:
        x = np.asarray(xstar_hint, dtype=float)
        if p.norm_frame == "original":
            vals = [abs(np.prod(x ** np.array(a)) - np.prod(p.y ** np.array(a))) for a in mons]
        else:
            vals = [abs(np.prod((x - p.y) ** np.array(a))) for a in mons]
        source = "hint"
    else:
        if box is not None:
            lo, hi = (np.asarray(v, dtype=float) for v in box)
            source = "box"
        elif p.assume_box:
            lo, hi = -np.ones(p.n), np.ones(p.n)
            source = "unit-box"
        else:
            raise ValueError("need xstar_hint, an explicit box, or assume_box")
        if p.norm_frame == "centered":
            lo, hi = lo - p.y, hi - p.y
        vals = []
        for a in mons:
            a_lo, a_hi = _interval_monomial(a, lo, hi)
            shift = np.prod(p.y ** np.array(a)) if p.norm_frame == "original" else 0.0
            vals.append(max(abs(a_lo - shift), abs(a_hi - shift)))
    if not vals:
        factor = 0.0
    elif p.norm == "l1":
        factor = float(max(vals))
    else:
        factor = float(sum(vals))
        if source == "unit-box" and not np.any(p.y):
            # classical count; dominates the monomial sum when y = 0
            factor = float(basis_size(p.n, p.target_degree))
    lower = fy - p.epsilon - sol.rho * factor
    return GapBound(lower, fy, factor, source)


# ---------------------------------------------------------------------------
# forward relaxation and sweeps

@dataclass
class ForwardResult:
    status: str
    lower_bound: float | None
    minimizer: np.ndarray | None
    moments: MomentVector | None
    rank1_residual: float | None


def forward_solve(f: Polynomial, K: FeasibleSet, d: int, cfg: conic.SolverConfig | None = None,
                  rank_tol: float = RANK1_TOL) -> ForwardResult:
    """Order-``d`` moment relaxation of ``min f`` on ``K`` (solved via its SOS side)."""
    cfg = cfg or conic.SolverConfig()
    if 2 * d < f.degree or d < K.min_order():
        raise ValueError(f"relaxation order {d} too small for the data")
    n = f.n
    B = conic.ConicBuilder("max")
    tmpl = CertificateTemplate(B, K, d)
    (lam,) = B.add_free(1)
    zero = zero_index(n)
    rows = {}
    for beta in sorted(set(tmpl.coeff_terms) | set(f.support()), key=grlex_key):
        terms = dict(tmpl.coeff_terms.get(beta, {}))
        if beta == zero:
            terms[lam] = 1.0
        rows[beta] = B.add_row(terms, f.coeff(beta), name=("match", beta))
    B.set_objective({lam: 1.0})
    sol = conic.solve(B.build(), cfg)
    if sol.status != conic.OPTIMAL:
        return ForwardResult(sol.status, None, None, None, None)
    z = MomentVector(n, {beta: float(sol.y[r]) for beta, r in rows.items()})
    w = np.array([z[zero]] + [z[unit_index(i, n)] if unit_index(i, n) in z else 0.0
                              for i in range(n)])
    mons = enumerate_monomials(n, 1).monomials
    M1 = np.array([[z[tuple(np.add(a, b))] if tuple(np.add(a, b)) in z else 0.0 for b in mons]
                   for a in mons])
    res = float(np.linalg.norm(M1 - np.outer(w, w)))
    xmin = w[1:].copy() if res <= rank_tol else None
    return ForwardResult(sol.status, sol.objective_value, xmin, z, res)


@dataclass
class SweepEntry:
    d: int
    rho: float | None
    status: str
    z0: float | None = None
    dual_objective: float | None = None
    solution: InverseSolution | None = None


@dataclass
class SweepResult:
    entries: list
    monotone: bool

    @property
    def rhos(self) -> list:
        return [e.rho for e in self.entries]

    def z0_trajectory(self) -> list:
        return [e.z0 for e in self.entries]


def hierarchy_sweep(p: InverseProblem, d_range: Iterable[int], cfg: conic.SolverConfig | None = None,
                    cross_check: bool = True) -> SweepResult:
    entries = []
    for d in d_range:
        try:
            sol = solve_inverse(p.replace(d=d), cfg, cross_check=cross_check)
        except (ValueError, conic.ConicError) as exc:
            entries.append(SweepEntry(d, None, f"error: {exc}"))
            continue
        entries.append(SweepEntry(d, sol.rho, sol.status, sol.z0, sol.dual_objective, sol))
    monotone = True
    last = None
    for e in entries:
        if e.rho is None:
            continue
        if last is not None and e.rho > last + RHO_AGREE:
            monotone = False
            warnings.warn(f"distance increased along the hierarchy at d={e.d}: {e.rho} > {last}")
        last = e.rho
    return SweepResult(entries, monotone)
