"""Block-structured semidefinite programs and their solution.

Variables come in three kinds, laid out in this order in the flat vector:
free scalars, nonnegative scalars, and symmetric PSD blocks. PSD blocks are
stored in *svec* form: upper triangle, column-major, off-diagonal entries
scaled by sqrt(2), so that ``<X, C> = svec(X) @ svec(C)``.

Standard form::

    min / max  c @ x   s.t.  A x = b,  x in R^f x R_+^l x S_+^{k1} x ...

The dual vector ``y`` reported in :class:`ConicSolution` always satisfies
``dual objective = b @ y``; for a minimisation ``c - A^T y`` lies in the cone,
for a maximisation ``A^T y - c`` does.

Two backends implement :func:`solve`: ``"clarabel"`` (default) and
``"cvxopt"``. Both are interior-point methods and deterministic.
"""

from __future__ import annotations

import io
import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import Hashable

import numpy as np
import scipy.sparse as sp

logger = logging.getLogger(__name__)

SQRT2 = math.sqrt(2.0)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
MAX_ITER = "max_iter"
NUMERICAL_TROUBLE = "numerical_trouble"


class ConicError(ValueError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    gap_tol: float = 1e-8
    feas_tol: float = 1e-8
    max_iter: int = 200
    psd_eig_floor: float = -1e-8
    backend: str = "clarabel"
    verbose: bool = False
    equilibrate: bool = True

    def __post_init__(self):
        if self.gap_tol <= 0 or self.feas_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.psd_eig_floor >= 0:
            raise ValueError("psd_eig_floor must be negative")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")


def svec_size(k: int) -> int:
    return k * (k + 1) // 2


def svec_index(i: int, j: int) -> int:
    """Position of entry (i, j) in a block's svec (upper triangle, column-major)."""
    if i > j:
        i, j = j, i
    return j * (j + 1) // 2 + i


def svec(X: np.ndarray) -> np.ndarray:
    k = X.shape[0]
    out = np.empty(svec_size(k))
    for j in range(k):
        for i in range(j + 1):
            out[svec_index(i, j)] = X[i, j] if i == j else SQRT2 * X[i, j]
    return out


def smat(v: np.ndarray) -> np.ndarray:
    k = int(round((math.sqrt(8 * len(v) + 1) - 1) / 2))
    X = np.empty((k, k))
    for j in range(k):
        for i in range(j + 1):
            val = v[svec_index(i, j)]
            if i != j:
                val /= SQRT2
            X[i, j] = X[j, i] = val
    return X


@dataclass
class ConicProblem:
    n_free: int
    n_nonneg: int
    psd_sizes: list
    c: np.ndarray
    A: sp.csr_matrix
    b: np.ndarray
    sense: str = "min"
    row_names: list = field(default_factory=list)

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        self.A = sp.csr_matrix(self.A, dtype=float)
        self.psd_sizes = [int(k) for k in self.psd_sizes]
        if self.sense not in ("min", "max"):
            raise ConicError(f"sense must be 'min' or 'max', got {self.sense!r}")
        if self.c.shape != (self.n_vars,):
            raise ConicError(f"objective has length {self.c.size}, expected {self.n_vars}")
        if self.A.shape != (self.b.size, self.n_vars):
            raise ConicError(f"constraint matrix has shape {self.A.shape}, "
                             f"expected ({self.b.size}, {self.n_vars})")

    @property
    def n_vars(self) -> int:
        return self.n_free + self.n_nonneg + sum(svec_size(k) for k in self.psd_sizes)

    @property
    def n_eq(self) -> int:
        return self.b.size

    def block_offsets(self) -> list:
        off = self.n_free + self.n_nonneg
        out = []
        for k in self.psd_sizes:
            out.append(off)
            off += svec_size(k)
        return out

    def block(self, x: np.ndarray, i: int) -> np.ndarray:
        """Block ``i`` of a primal (or dual-slack) vector as a dense matrix."""
        off = self.block_offsets()[i]
        return smat(x[off:off + svec_size(self.psd_sizes[i])])

    def is_empty(self) -> bool:
        return self.n_vars == 0


@dataclass
class ConicSolution:
    status: str
    x: np.ndarray
    y: np.ndarray
    objective_value: float
    dual_objective: float
    gap: float
    primal_residual: float
    dual_residual: float
    iterations: int = 0
    backend: str = ""

    @property
    def primal(self) -> np.ndarray:
        return self.x

    @property
    def dual(self) -> np.ndarray:
        return self.y

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


class ConicBuilder:
    """Incremental construction of a :class:`ConicProblem`.

    Variables are referred to by keys: ``("f", i)``, ``("n", i)`` and
    ``("s", block, i, j)`` for entry ``X[i, j]`` of a PSD block. A row
    coefficient ``a`` on a PSD key contributes ``a * X[i, j]`` (one entry,
    not the symmetric pair).
    """

    def __init__(self, sense: str = "min"):
        self.sense = sense
        self.n_free = 0
        self.n_nonneg = 0
        self.psd_sizes: list = []
        self.rows: list = []
        self.rhs: list = []
        self.row_names: list = []
        self.objective: dict = {}

    def add_free(self, k: int = 1) -> list:
        keys = [("f", self.n_free + i) for i in range(k)]
        self.n_free += k
        return keys

    def add_nonneg(self, k: int = 1) -> list:
        keys = [("n", self.n_nonneg + i) for i in range(k)]
        self.n_nonneg += k
        return keys

    def add_psd(self, size: int) -> int:
        if size < 1:
            raise ConicError("PSD block size must be >= 1")
        self.psd_sizes.append(size)
        return len(self.psd_sizes) - 1

    @staticmethod
    def entry(block: int, i: int, j: int) -> tuple:
        return ("s", block, min(i, j), max(i, j))

    def add_row(self, terms: dict, rhs: float, name: Hashable = None) -> int:
        self.rows.append(dict(terms))
        self.rhs.append(float(rhs))
        self.row_names.append(name)
        return len(self.rows) - 1

    def frobenius_terms(self, block: int, triplets) -> dict:
        """Terms for ``<X_block, C>`` given upper-triangle triplets of ``C``."""
        terms: dict = {}
        for r, c, v in triplets:
            key = self.entry(block, r, c)
            terms[key] = terms.get(key, 0.0) + (v if r == c else 2.0 * v)
        return terms

    def set_objective(self, terms: dict, sense: str | None = None) -> None:
        self.objective = dict(terms)
        if sense is not None:
            self.sense = sense

    def column(self, key) -> tuple:
        """Column index and scale for a key (value = scale * x[col])."""
        kind = key[0]
        if kind == "f":
            return key[1], 1.0
        if kind == "n":
            return self.n_free + key[1], 1.0
        _, blk, i, j = key
        off = self.n_free + self.n_nonneg + sum(svec_size(k) for k in self.psd_sizes[:blk])
        return off + svec_index(i, j), (1.0 if i == j else 1.0 / SQRT2)

    def value(self, key, x: np.ndarray) -> float:
        col, scale = self.column(key)
        return scale * x[col]

    def build(self) -> ConicProblem:
        n_vars = self.n_free + self.n_nonneg + sum(svec_size(k) for k in self.psd_sizes)
        data, ri, ci = [], [], []
        for r, terms in enumerate(self.rows):
            for key, v in terms.items():
                if v == 0.0:
                    continue
                col, scale = self.column(key)
                data.append(v * scale)
                ri.append(r)
                ci.append(col)
        A = sp.csr_matrix((data, (ri, ci)), shape=(len(self.rows), n_vars))
        A.sum_duplicates()
        c = np.zeros(n_vars)
        for key, v in self.objective.items():
            col, scale = self.column(key)
            c[col] += v * scale
        return ConicProblem(self.n_free, self.n_nonneg, list(self.psd_sizes), c, A,
                            np.array(self.rhs), self.sense, list(self.row_names))


# ---------------------------------------------------------------------------
# backends

def _solve_clarabel(p: ConicProblem, cfg: SolverConfig):
    import clarabel

    nv = p.n_vars
    nn0 = p.n_free
    blocks = [p.A]
    cones = []
    b = [p.b]
    if p.n_eq:
        cones.append(clarabel.ZeroConeT(p.n_eq))
    if p.n_nonneg:
        blocks.append(-sp.eye(p.n_nonneg, nv, k=nn0, format="csr"))
        b.append(np.zeros(p.n_nonneg))
        cones.append(clarabel.NonnegativeConeT(p.n_nonneg))
    for off, k in zip(p.block_offsets(), p.psd_sizes):
        m = svec_size(k)
        blocks.append(-sp.eye(m, nv, k=off, format="csr"))
        b.append(np.zeros(m))
        cones.append(clarabel.PSDTriangleConeT(k))
    Aall = sp.vstack(blocks, format="csc")
    q = p.c if p.sense == "min" else -p.c
    P = sp.csc_matrix((nv, nv))
    st = clarabel.DefaultSettings()
    st.verbose = cfg.verbose
    st.max_iter = cfg.max_iter
    # tighter than the contract so the recomputed residuals clear it
    st.tol_gap_abs = cfg.gap_tol * 0.1
    st.tol_gap_rel = cfg.gap_tol * 0.1
    st.tol_feas = cfg.feas_tol * 0.1
    st.tol_infeas_abs = cfg.feas_tol
    st.tol_infeas_rel = cfg.feas_tol
    st.max_threads = 1
    st.presolve_enable = False
    st.equilibrate_enable = cfg.equilibrate
    solver = clarabel.DefaultSolver(P, q, Aall, np.concatenate(b), cones, st)
    sol = solver.solve()
    x = np.array(sol.x)
    z = np.array(sol.z)
    y = -z[:p.n_eq]
    if p.sense == "max":
        y = -y
    name = str(sol.status)
    if name == "Solved":
        status = OPTIMAL
    elif name == "AlmostSolved":
        status = "almost"
    elif name in ("PrimalInfeasible", "AlmostPrimalInfeasible"):
        status = INFEASIBLE
    elif name in ("DualInfeasible", "AlmostDualInfeasible"):
        status = UNBOUNDED
    elif name == "MaxIterations":
        status = MAX_ITER
    else:
        status = NUMERICAL_TROUBLE
    return status, x, y, int(sol.iterations)


def _solve_cvxopt(p: ConicProblem, cfg: SolverConfig):
    import cvxopt
    from cvxopt import solvers

    nv = p.n_vars
    Grows, h = [], []
    if p.n_nonneg:
        Grows.append(-sp.eye(p.n_nonneg, nv, k=p.n_free, format="csr"))
        h.append(np.zeros(p.n_nonneg))
    for off, k in zip(p.block_offsets(), p.psd_sizes):
        # cvxopt wants the full k*k matrix, column-major
        data, ri, ci = [], [], []
        for j in range(k):
            for i in range(k):
                col = off + svec_index(i, j)
                data.append(-1.0 if i == j else -1.0 / SQRT2)
                ri.append(j * k + i)
                ci.append(col)
        Grows.append(sp.csr_matrix((data, (ri, ci)), shape=(k * k, nv)))
        h.append(np.zeros(k * k))

    def tosp(M):
        M = sp.coo_matrix(M)
        return cvxopt.spmatrix(M.data.tolist(), M.row.tolist(), M.col.tolist(), M.shape)

    G = tosp(sp.vstack(Grows)) if Grows else cvxopt.spmatrix([], [], [], (0, nv))
    hh = cvxopt.matrix(np.concatenate(h) if h else np.zeros(0))
    q = p.c if p.sense == "min" else -p.c
    opts = {"show_progress": cfg.verbose, "maxiters": cfg.max_iter,
            "abstol": cfg.gap_tol * 0.1, "reltol": cfg.gap_tol * 0.1,
            "feastol": cfg.feas_tol * 0.1}
    dims = {"l": p.n_nonneg, "q": [], "s": list(p.psd_sizes)}
    try:
        res = solvers.conelp(cvxopt.matrix(q), G, hh, dims, tosp(p.A), cvxopt.matrix(p.b),
                             options=opts)
    except (ArithmeticError, ValueError) as exc:
        # cvxopt raises from inside its scaling update on degenerate problems
        logger.info("cvxopt failed: %s", exc)
        return NUMERICAL_TROUBLE, np.zeros(nv), np.zeros(p.n_eq), 0
    status = {"optimal": OPTIMAL, "primal infeasible": INFEASIBLE,
              "dual infeasible": UNBOUNDED}.get(res["status"], NUMERICAL_TROUBLE)
    if res["status"] == "unknown" and res.get("iterations", 0) >= cfg.max_iter:
        status = MAX_ITER
    if res["x"] is None:
        x = np.zeros(nv)
        y = np.zeros(p.n_eq)
    else:
        x = np.array(res["x"]).ravel()
        y = -np.array(res["y"]).ravel()
    if status == NUMERICAL_TROUBLE and res["x"] is not None:
        status = "almost"
    if p.sense == "max":
        y = -y
    return status, x, y, int(res.get("iterations", 0))


_BACKENDS = {"clarabel": _solve_clarabel, "cvxopt": _solve_cvxopt}


def solve(p: ConicProblem, cfg: SolverConfig | None = None) -> ConicSolution:
    cfg = cfg or SolverConfig()
    if p.is_empty():
        raise ConicError("problem has no variables")
    try:
        backend = _BACKENDS[cfg.backend]
    except KeyError:
        raise ConicError(f"unknown backend {cfg.backend!r}; choose from {sorted(_BACKENDS)}") from None
    status, x, y, iters = backend(p, cfg)
    pobj = float(p.c @ x)
    dobj = float(p.b @ y)
    pres, dres = _residuals(p, x, y)
    gap = abs(pobj - dobj)
    if status in (OPTIMAL, "almost"):
        good = (gap <= cfg.gap_tol * (1 + abs(pobj)) * 10
                and pres <= cfg.feas_tol * 10 and dres <= cfg.feas_tol * 10)
        status = OPTIMAL if good else NUMERICAL_TROUBLE
        if not good:
            logger.info("solver finished but gap=%.2e pres=%.2e dres=%.2e exceed tolerances",
                        gap, pres, dres)
    if status in (NUMERICAL_TROUBLE, MAX_ITER) and cfg.backend == "clarabel" and cfg.equilibrate:
        # scaling sometimes stalls on degenerate faces; the raw data usually converges
        logger.info("clarabel ended with %s; retrying without equilibration", status)
        return solve(p, dataclasses.replace(cfg, equilibrate=False))
    return ConicSolution(status, x, y, pobj, dobj, gap, pres, dres, iters, cfg.backend)


def _cone_violation(p: ConicProblem, v: np.ndarray) -> float:
    """Largest violation of membership of ``v`` in the (self-dual) cone."""
    worst = 0.0
    nn = v[p.n_free:p.n_free + p.n_nonneg]
    if nn.size:
        worst = max(worst, float(-nn.min()))
    for i in range(len(p.psd_sizes)):
        ev = np.linalg.eigvalsh(p.block(v, i))
        worst = max(worst, float(-ev.min()))
    return max(worst, 0.0)


def _residuals(p: ConicProblem, x: np.ndarray, y: np.ndarray) -> tuple:
    """Relative primal and dual infeasibility (cone membership included)."""
    r = p.A @ x - p.b
    pres = float(np.abs(r).max(initial=0.0)) / (1.0 + float(np.abs(p.b).max(initial=0.0)))
    pres = max(pres, _cone_violation(p, x))
    slack = p.c - p.A.T @ y
    if p.sense == "max":
        slack = -slack
    dres = float(np.abs(slack[:p.n_free]).max(initial=0.0))
    dres = max(dres, _cone_violation(p, slack))
    dres /= (1.0 + float(np.abs(p.c).max(initial=0.0)))
    return pres, dres


@dataclass
class CheckReport:
    equality_residual: float
    nonneg_min: float
    psd_min_eigs: list
    dual_slack_violation: float
    stationarity_residual: float
    primal_objective: float
    dual_objective: float
    gap: float
    violations: list

    @property
    def ok(self) -> bool:
        return not self.violations


def check_solution(p: ConicProblem, s: ConicSolution, cfg: SolverConfig | None = None) -> CheckReport:
    """Recompute residuals, eigenvalues and gap of a solution from scratch."""
    cfg = cfg or SolverConfig()
    x, y = s.x, s.y
    eq = float(np.abs(p.A @ x - p.b).max(initial=0.0))
    nn = x[p.n_free:p.n_free + p.n_nonneg]
    nnmin = float(nn.min()) if nn.size else 0.0
    eigs = [float(np.linalg.eigvalsh(p.block(x, i)).min()) for i in range(len(p.psd_sizes))]
    slack = p.c - p.A.T @ y
    if p.sense == "max":
        slack = -slack
    stat = float(np.abs(slack[:p.n_free]).max(initial=0.0))
    dviol = _cone_violation(p, slack)
    pobj = float(p.c @ x)
    dobj = float(p.b @ y)
    gap = abs(pobj - dobj)

    scale_b = 1.0 + float(np.abs(p.b).max(initial=0.0))
    scale_c = 1.0 + float(np.abs(p.c).max(initial=0.0))
    problems = []
    if eq > 10 * cfg.feas_tol * scale_b:
        problems.append(f"equality residual {eq:.3e}")
    if nnmin < -10 * cfg.feas_tol:
        problems.append(f"nonnegative variable at {nnmin:.3e}")
    for i, e in enumerate(eigs):
        if e < cfg.psd_eig_floor * 10 * max(1.0, p.psd_sizes[i]):
            problems.append(f"PSD block {i} has eigenvalue {e:.3e}")
    if stat > 10 * cfg.feas_tol * scale_c:
        problems.append(f"stationarity residual {stat:.3e}")
    if dviol > 10 * cfg.feas_tol * scale_c:
        problems.append(f"dual slack outside cone by {dviol:.3e}")
    if gap > 10 * cfg.gap_tol * (1 + abs(pobj)):
        problems.append(f"duality gap {gap:.3e}")
    return CheckReport(eq, nnmin, eigs, dviol, stat, pobj, dobj, gap, problems)


# ---------------------------------------------------------------------------
# text dump: a plain, line-oriented format for cross-checking elsewhere

def dump(p: ConicProblem) -> str:
    """Serialise a problem.

    Format (one record per line)::

        conic-v1
        sense min|max
        free <n>
        nonneg <n>
        psd <k1> <k2> ...
        rows <m>
        c <col> <value>           (nonzeros of the objective, svec columns)
        A <row> <col> <value>     (nonzeros of the constraint matrix)
        b <row> <value>
    """
    out = io.StringIO()
    out.write("conic-v1\n")
    out.write(f"sense {p.sense}\nfree {p.n_free}\nnonneg {p.n_nonneg}\n")
    out.write("psd " + " ".join(str(k) for k in p.psd_sizes) + "\n")
    out.write(f"rows {p.n_eq}\n")
    for j in np.flatnonzero(p.c):
        out.write(f"c {j} {float(p.c[j])!r}\n")
    A = p.A.tocoo()
    for r, c, v in zip(A.row, A.col, A.data):
        out.write(f"A {r} {c} {float(v)!r}\n")
    for r, v in enumerate(p.b):
        out.write(f"b {r} {float(v)!r}\n")
    return out.getvalue()


def load(text: str) -> ConicProblem:
    lines = [ln.split() for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != ["conic-v1"]:
        raise ConicError("not a conic-v1 dump")
    head = {}
    cs, As, bs = [], [], []
    for parts in lines[1:]:
        tag = parts[0]
        if tag in ("sense", "free", "nonneg", "rows"):
            head[tag] = parts[1]
        elif tag == "psd":
            head["psd"] = [int(k) for k in parts[1:]]
        elif tag == "c":
            cs.append((int(parts[1]), float(parts[2])))
        elif tag == "A":
            As.append((int(parts[1]), int(parts[2]), float(parts[3])))
        elif tag == "b":
            bs.append((int(parts[1]), float(parts[2])))
        else:
            raise ConicError(f"unknown record {tag!r}")
    nf, nn, psd, m = int(head["free"]), int(head["nonneg"]), head.get("psd", []), int(head["rows"])
    nv = nf + nn + sum(svec_size(k) for k in psd)
    c = np.zeros(nv)
    for j, v in cs:
        c[j] = v
    b = np.zeros(m)
    for r, v in bs:
        b[r] = v
    A = sp.csr_matrix(([v for _, _, v in As], ([r for r, _, _ in As], [c_ for _, c_, _ in As])),
                      shape=(m, nv))
    return ConicProblem(nf, nn, psd, c, A, b, head["sense"])
