"""Brute-force ground truth: grid scans, enumeration and quasi-random sampling.

These are verification aids. They never call a conic solver, so they give
an independent check on anything the SDP code reports.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .certify import FeasibleSet
from .polyalg import Polynomial

SOBOL_SEED = 20240607
FEAS_TOL = 1e-8
CHUNK = 200_000


@dataclass
class OracleResult:
    value: float
    argmin: np.ndarray
    resolution: float | None = None
    samples: int = 0
    feasible: int = 0
    warnings: list = field(default_factory=list)


def _box_arrays(box, n: int) -> tuple:
    box = np.asarray(box, dtype=float)
    if box.shape == (n, 2):
        lo, hi = box[:, 0], box[:, 1]
    elif box.shape == (2,):
        lo, hi = np.full(n, box[0]), np.full(n, box[1])
    else:
        raise ValueError(f"box must be (lo, hi) or one (lo, hi) pair per variable, got shape {box.shape}")
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise ValueError("box must be finite")
    if np.any(hi < lo):
        raise ValueError("box has hi < lo")
    return lo, hi


def _axes(lo, hi, step: float) -> list:
    out = []
    for a, b in zip(lo, hi):
        k = int(np.floor((b - a) / step + 1e-9)) + 1
        ax = a + step * np.arange(k)
        if b - ax[-1] > 1e-12:
            ax = np.append(ax, b)
        out.append(ax)
    return out


def _scan(f: Polynomial, K: FeasibleSet, axes: list, tol: float) -> tuple:
    """Minimum over the product grid; ties go to the lexicographically first point."""
    best, arg, count, feas = np.inf, None, 0, 0
    sizes = [len(a) for a in axes]
    total = int(np.prod(sizes))
    for start in range(0, total, CHUNK):
        flat = np.arange(start, min(total, start + CHUNK))
        idx = np.unravel_index(flat, sizes)
        X = np.column_stack([axes[i][idx[i]] for i in range(len(axes))])
        count += len(X)
        ok = K.mask(X, tol)
        if not ok.any():
            continue
        X = X[ok]
        feas += len(X)
        vals = f.evaluate_many(X)
        i = int(np.argmin(vals))
        if vals[i] < best:
            best, arg = float(vals[i]), X[i].copy()
    return best, arg, count, feas


def grid_min(f: Polynomial, K: FeasibleSet, box=None, step: float = 0.01, values=None,
             tol: float = FEAS_TOL) -> OracleResult:
    """Grid minimum of ``f`` over ``K``, with one refinement at ``step/10``.

    With ``values`` (e.g. ``(0, 1)``) the scan is an exact enumeration of
    ``values^n`` and no refinement happens.
    """
    n = f.n
    if K.n != n:
        raise ValueError("f and K have different variable counts")
    if values is not None:
        axes = [np.asarray(sorted(values), dtype=float)] * n
        best, arg, count, feas = _scan(f, K, axes, tol)
        if arg is None:
            raise ValueError("no enumerated point lies in K")
        return OracleResult(best, arg, None, count, feas)
    if step <= 0:
        raise ValueError("step must be positive")
    if box is None:
        raise ValueError("grid_min needs a finite box")
    lo, hi = _box_arrays(box, n)
    best, arg, count, feas = _scan(f, K, _axes(lo, hi, step), tol)
    if arg is None:
        raise ValueError(f"no grid point in K at step {step}; try a finer step")
    # single local pass around the incumbent
    fine = step / 10
    rlo, rhi = np.maximum(lo, arg - step), np.minimum(hi, arg + step)
    b2, a2, c2, f2 = _scan(f, K, _axes(rlo, rhi, fine), tol)
    count += c2
    feas += f2
    if a2 is not None and b2 < best:
        best, arg = b2, a2
    return OracleResult(best, arg, fine, count, feas)


def sample_min(p: Polynomial, K: FeasibleSet, box, N: int = 10_000, seed: int = SOBOL_SEED,
               tol: float = FEAS_TOL) -> OracleResult:
    """Minimum of ``p`` over ``N`` scrambled Sobol points of ``box`` that lie in ``K``.

    The sequence is deterministic for a fixed seed. Sets with equality
    constraints are measure zero and should use ``grid_min(values=...)``.
    """
    n = p.n
    lo, hi = _box_arrays(box, n)
    if N < 1:
        raise ValueError("N must be positive")
    sob = qmc.Sobol(d=n, scramble=True, seed=seed)
    U = sob.random_base2(int(np.ceil(np.log2(N))))[:N]
    X = qmc.scale(U, lo, hi) if np.all(hi > lo) else lo + U * (hi - lo)
    ok = K.mask(X, tol)
    res = OracleResult(np.inf, np.full(n, np.nan), None, N, int(ok.sum()))
    if res.feasible < max(1, N // 100):
        msg = f"only {res.feasible} of {N} samples lie in K"
        res.warnings.append(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    if res.feasible:
        vals = p.evaluate_many(X[ok])
        i = int(np.argmin(vals))
        res.value, res.argmin = float(vals[i]), X[ok][i]
    return res


def enumerate_min(f: Polynomial, K: FeasibleSet, values=(0.0, 1.0)) -> OracleResult:
    return grid_min(f, K, values=values)


def points(values, n: int):
    """All points of ``values^n`` in lexicographic order."""
    return (np.array(pt, dtype=float) for pt in itertools.product(values, repeat=n))
