"""Command line front end: ``invpoly {solve,sweep,certify,forward,convexq,oracle} FILE``.

The JSON report goes to stdout, a short human summary to stderr.
Exit codes: 0 success, 1 infeasible, 2 parse or validation error, 3 solver trouble.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np

from . import conic, inverse, oracle
from .certify import certificate_to_json, membership
from .parser import ParseError, ProblemFile, load_problem, parse_number, parse_polynomial
from .polyalg import Polynomial

EXIT_OK, EXIT_INFEASIBLE, EXIT_PARSE, EXIT_SOLVER = 0, 1, 2, 3
SIG_DIGITS = 12
COMMANDS = ("solve", "sweep", "certify", "forward", "convexq", "oracle")
SCHEMA_VERSION = "invpoly-report-1"

log = logging.getLogger("invpoly")


class UsageError(ValueError):
    pass


# ---------------------------------------------------------------------------
# serialisation helpers

def _num(x):
    if x is None:
        return None
    x = float(x)
    if not math.isfinite(x):
        return None
    return float(f"{x:.{SIG_DIGITS}g}")


def clean(obj):
    """Round floats to 12 significant digits, recursively; numpy to plain Python."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    return obj


def monomial_name(alpha, names) -> str:
    parts = [f"{names[i]}^{e}" if e > 1 else names[i] for i, e in enumerate(alpha) if e]
    return "*".join(parts) if parts else "1"


def term_map(p: Polynomial | None, names, drop: float = 0.0) -> dict | None:
    if p is None:
        return None
    return {monomial_name(a, names): c for a, c in p.items() if abs(c) > drop}


def cert_summary(cert, rep) -> dict | None:
    if cert is None:
        return None
    return {
        "block_sizes": cert.block_sizes(),
        "min_eigenvalues": [float(np.linalg.eigvalsh(G).min()) if G.size else 0.0 for _, G in cert.sos],
        "free_multipliers": len(cert.free),
        "residual_norm": None if rep is None else rep.residual_norm,
        "verdict": None if rep is None else rep.verdict,
    }


# ---------------------------------------------------------------------------
# problem assembly

def resolve_path(arg: str) -> Path:
    """A path on disk, else a bundled fixture with the same base name."""
    p = Path(arg)
    if p.exists():
        return p
    name = p.name if p.suffix else p.name + ".prob"
    data = resources.files("invpoly") / "data" / name
    if data.is_file():
        return Path(str(data))
    raise UsageError(f"no such problem file: {arg} (bundled: {', '.join(bundled_names())})")


def bundled_names() -> list:
    return sorted(e.name[:-5] for e in (resources.files("invpoly") / "data").iterdir()
                  if e.name.endswith(".prob"))


def parse_degree(text: str) -> list:
    text = str(text).strip()
    if ".." in text:
        a, b = text.split("..", 1)
        lo, hi = int(a), int(b)
        if hi < lo:
            raise UsageError(f"empty degree range {text}")
        return list(range(lo, hi + 1))
    return [int(text)]


def _flag(val) -> bool:
    if isinstance(val, bool):
        return val
    v = str(val).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"expected a boolean, got {val!r}")


def _vector(text: str) -> np.ndarray:
    parts = text.split(",") if "," in text else text.split()
    return np.array([parse_number(t) for t in parts])


def parse_box(text: str, n: int) -> tuple:
    v = _vector(text)
    if v.size == 2:
        return np.full(n, v[0]), np.full(n, v[1])
    if v.size == 2 * n:
        return v[0::2].copy(), v[1::2].copy()
    raise UsageError(f"box needs 2 or {2 * n} numbers, got {v.size}")


def parse_structural(text: str, names, degree: int) -> frozenset:
    text = text.strip()
    if not text or text == "none":
        return frozenset()
    try:
        return inverse.structural_preset(text, len(names), degree)
    except ValueError:
        pass
    pins = set()
    for item in text.split(","):
        m = parse_polynomial(item, names)
        if len(m.support()) != 1:
            raise UsageError(f"structural entry {item.strip()!r} is not a single monomial")
        pins.add(m.support()[0])
    return frozenset(pins)


def settings(pf: ProblemFile, args) -> dict:
    """Merge file options with command line flags (flags win)."""
    o = dict(pf.options)
    for key in ("norm", "epsilon", "structural", "frame", "step", "backend", "method"):
        val = getattr(args, key, None)
        if val is not None:
            o[key] = val
    if getattr(args, "d", None) is not None:
        o["d"] = args.d
    if getattr(args, "assume_box", False):
        o["assume_box"] = "true"
    if getattr(args, "convex", False):
        o["convex"] = "true"
    return o


def make_problem(pf: ProblemFile, o: dict, d: int | None = None) -> inverse.InverseProblem:
    if pf.point is None:
        raise UsageError("the problem file has no 'point:' line")
    K = pf.feasible_set()
    target = int(o["target_degree"]) if "target_degree" in o else None
    deg = target or max(pf.objective.degree, 1)
    if d is None:
        ds = parse_degree(o["d"]) if "d" in o else [max(K.min_order(), -(-deg // 2), 1)]
        d = ds[0]
    structural = parse_structural(o.get("structural", ""), pf.variables, deg)
    return inverse.InverseProblem(
        pf.objective, K, pf.point, d,
        norm=o.get("norm", "l1"),
        epsilon=parse_number(str(o.get("epsilon", "0"))),
        structural=structural,
        assume_box=_flag(o.get("assume_box", False)),
        require_convex=_flag(o.get("convex", False)),
        target_degree=target,
        norm_frame=o.get("frame", "original"))


def solver_config(o: dict) -> conic.SolverConfig:
    return conic.SolverConfig(backend=o.get("backend", "clarabel"))


def gap_bound(sol, p, pf: ProblemFile, o: dict):
    if sol.rho is None:
        return None
    hint = _vector(o["xstar"]) if "xstar" in o else None
    box = parse_box(o["box"], pf.n) if "box" in o else None
    if hint is None and box is None and not p.assume_box:
        return None
    return inverse.optimality_gap_bound(sol, p, xstar_hint=hint, box=box)


def _gap_json(g) -> dict | None:
    if g is None:
        return None
    return {"lower": g.lower, "upper": g.upper, "factor": g.factor, "source": g.source, "note": g.note}


def _status_code(status: str) -> int:
    if status in (conic.OPTIMAL, "feasible"):
        return EXIT_OK
    if status in (conic.INFEASIBLE, "infeasible"):
        return EXIT_INFEASIBLE
    return EXIT_SOLVER


def _solution_json(sol, p, pf: ProblemFile) -> dict:
    out = {
        "rho": sol.rho,
        "rho_objective": sol.rho_objective,
        "f_tilde": term_map(sol.f_tilde, pf.variables),
        "certificate": cert_summary(sol.certificate, sol.report),
        "dual_objective": sol.dual_objective,
        "z0": sol.z0,
        "y_optimal": sol.y_optimal if sol.rho is not None else None,
        "notes": list(sol.notes),
    }
    if sol.f_tilde is not None and sol.f_tilde.degree <= 2:
        out["quadratic_matrix"] = inverse.quadratic_matrix(sol.f_tilde)
    if sol.convexity_certificate is not None:
        out["convexity_certificate"] = cert_summary(sol.convexity_certificate, sol.convexity_report)
    return out


# ---------------------------------------------------------------------------
# commands

def cmd_solve(pf, o, args) -> tuple:
    p = make_problem(pf, o)
    cfg = solver_config(o)
    method = o.get("method", "general")
    extra = {}
    if method == "general":
        sol = inverse.solve_inverse(p, cfg)
    elif method == "canonical":
        if "box" not in o:
            raise UsageError("method canonical needs 'option box = lo, hi'")
        q, bm = inverse.box_scaled(p, *parse_box(o["box"], pf.n))
        sol, can = inverse.solve_canonical_l1(q, cfg)
        if sol.f_tilde is not None:
            sol.f_tilde = bm.to_original(sol.f_tilde)
        if can is not None:
            extra = {"b": can.b, "lambda": can.lam, "active_set": can.active_set,
                     "cone_residual": can.cone_residual, "scaled": True}
    elif method == "boolean":
        sol, can = inverse.solve_zero_one(p, cfg)
        if can is not None:
            extra = {"b": can.b, "lower": can.lower, "upper": can.upper}
    else:
        raise UsageError(f"unknown method {method!r}; use general, canonical or boolean")
    rep = {"d": p.d, "norm": p.norm, "epsilon": p.epsilon, "frame": p.norm_frame, "method": method}
    rep.update(_solution_json(sol, p, pf))
    rep.update(extra)
    rep["gap_bound"] = _gap_json(gap_bound(sol, p, pf, o)) if method == "general" else None
    code = _status_code(sol.status)
    if code == EXIT_OK and not sol.verified:
        code = EXIT_SOLVER
    lines = [f"status {sol.status}, d={p.d}, norm {p.norm}"]
    if sol.rho is not None:
        lines.append(f"rho = {sol.rho:.6g}")
        lines.append(f"f~ = {sol.f_tilde.to_string(pf.variables, 6)}")
        if sol.report is not None:
            lines.append(f"certificate residual {sol.report.residual_norm:.2e} ({sol.report.verdict})")
    lines += sol.notes
    return sol.status, rep, code, lines


def cmd_sweep(pf, o, args) -> tuple:
    ds = parse_degree(o.get("d", "1..3"))
    p = make_problem(pf, o, d=max(ds))
    res = inverse.hierarchy_sweep(p, ds, solver_config(o))
    entries = [{"d": e.d, "rho": e.rho, "status": e.status, "z0": e.z0, "dual_objective": e.dual_objective,
                "f_tilde": term_map(e.solution.f_tilde, pf.variables) if e.solution else None}
               for e in res.entries]
    rep = {"d": ds, "norm": p.norm, "epsilon": p.epsilon, "frame": p.norm_frame,
           "rho": res.rhos[-1] if res.rhos else None, "rhos": res.rhos, "sweep": entries,
           "z0_trajectory": res.z0_trajectory(), "monotone": res.monotone}
    stats = [e.status for e in res.entries]
    if all(s == conic.OPTIMAL for s in stats):
        status, code = conic.OPTIMAL, EXIT_OK
    elif all(s in (conic.OPTIMAL, conic.INFEASIBLE) for s in stats):
        status, code = conic.INFEASIBLE, EXIT_INFEASIBLE
    else:
        status, code = "partial", EXIT_SOLVER
    lines = [f"d={e.d}: rho={e.rho if e.rho is None else format(e.rho, '.6g')} ({e.status})"
             for e in res.entries]
    if not res.monotone:
        lines.append("warning: distances are not monotone along the hierarchy")
    return status, rep, code, lines


def cmd_certify(pf, o, args) -> tuple:
    p = make_problem(pf, o)
    target = p.f - p.f(p.y) + p.epsilon
    K = p.effective_set()
    res = membership(target, K, p.d, solver_config(o), center=p.y)
    rep = {"d": p.d, "epsilon": p.epsilon, "target": term_map(target, pf.variables),
           "certificate": cert_summary(res.certificate, res.report),
           "certificate_data": certificate_to_json(res.certificate) if res.certificate else None}
    code = _status_code(res.status)
    lines = [f"certificate search at d={p.d}: {res.status}"]
    if res.report is not None:
        lines.append(f"residual {res.report.residual_norm:.2e}, min Gram eigenvalue {res.report.min_gram_eig:.2e}")
    return res.status, rep, code, lines


def cmd_forward(pf, o, args) -> tuple:
    K = pf.feasible_set()
    ds = parse_degree(o["d"]) if "d" in o else [max(K.min_order(), -(-pf.objective.degree // 2), 1)]
    res = inverse.forward_solve(pf.objective, K, ds[0], solver_config(o))
    rep = {"d": ds[0], "lower_bound": res.lower_bound, "minimizer": res.minimizer,
           "rank1_residual": res.rank1_residual}
    lines = [f"relaxation order {ds[0]}: {res.status}"]
    if res.lower_bound is not None:
        lines.append(f"lower bound {res.lower_bound:.8g}")
        lines.append("minimizer " + ("not extracted (moment matrix not rank one)" if res.minimizer is None
                                     else ", ".join(f"{v:.6g}" for v in res.minimizer)))
    return res.status, rep, _status_code(res.status), lines


def cmd_convexq(pf, o, args) -> tuple:
    o = dict(o, target_degree=o.get("target_degree", "2"), convex="true")
    p = make_problem(pf, o, d=1)
    sol, res = inverse.solve_convex_quadratic(p, solver_config(o))
    rep = {"norm": p.norm, "rho": sol.rho, "rho_b": res.rho_b, "rho_A": res.rho_A,
           "f_tilde": term_map(sol.f_tilde, pf.variables), "A": res.model.A, "b": res.model.b,
           "lambda": res.lam, "active_set": res.active_set, "lagrangian_gradient": res.lagrangian_grad,
           "min_eigenvalue": res.min_eig}
    lines = [f"rho = {sol.rho:.6g} (b-step {res.rho_b:.6g}, A-step {res.rho_A:.6g})",
             f"f~ = {sol.f_tilde.to_string(pf.variables, 6)}"]
    return sol.status, rep, EXIT_OK, lines


def cmd_oracle(pf, o, args) -> tuple:
    K = pf.feasible_set()
    f = pf.objective
    if "values" in o:
        res = oracle.grid_min(f, K, values=_vector(o["values"]))
    else:
        if "box" not in o:
            raise UsageError("oracle needs 'option box = lo, hi' (or 'option values = 0, 1')")
        step = parse_number(str(o.get("step", "0.01")))
        res = oracle.grid_min(f, K, np.column_stack(parse_box(o["box"], pf.n)), step)
    rep = {"value": res.value, "argmin": res.argmin, "resolution": res.resolution,
           "samples": res.samples, "feasible": res.feasible}
    if pf.point is not None:
        rep["f_y"] = f(pf.point)
        rep["suboptimality"] = f(pf.point) - res.value
    lines = [f"grid minimum {res.value:.8g} at " + ", ".join(f"{v:.6g}" for v in res.argmin)]
    return "optimal", rep, EXIT_OK, lines


_DISPATCH = {"solve": cmd_solve, "sweep": cmd_sweep, "certify": cmd_certify,
             "forward": cmd_forward, "convexq": cmd_convexq, "oracle": cmd_oracle}


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="invpoly", description="Inverse polynomial optimization with "
                                 "sum-of-squares certificates.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("file", help="problem file, or the name of a bundled fixture (e.g. ex2)")
    ap.add_argument("--norm", choices=("l1", "l2", "linf"))
    ap.add_argument("-d", dest="d", help="degree bound, INT or A..B")
    ap.add_argument("--epsilon", help="epsilon-optimality slack")
    ap.add_argument("--assume-box", action="store_true", help="K lies in [-1, 1]^n")
    ap.add_argument("--structural", help="preset (quadratic-form, homogeneous) or monomial list")
    ap.add_argument("--convex", action="store_true", help="require f~ convex on K")
    ap.add_argument("--frame", choices=inverse.FRAMES, help="coordinates of the coefficient norm")
    ap.add_argument("--backend", choices=("clarabel", "cvxopt"))
    ap.add_argument("--method", choices=("general", "canonical", "boolean"),
                    help="solve: full program, canonical l1 form, or boolean form")
    ap.add_argument("--step", help="oracle grid step")
    ap.add_argument("--json-only", action="store_true", help="suppress the summary on stderr")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def run(argv=None) -> tuple:
    """Execute one command; returns ``(report dict, exit code)``."""
    args = build_parser().parse_args(argv)
    t0 = time.perf_counter()
    report = {"schema": SCHEMA_VERSION, "command": args.command, "file": args.file}
    try:
        path = resolve_path(args.file)
        pf = load_problem(path)
        o = settings(pf, args)
        status, body, code, lines = _DISPATCH[args.command](pf, o, args)
        report.update(body)
        report["status"] = status
    except (ParseError, UsageError, ValueError) as exc:
        status, code, lines = "error", EXIT_PARSE, [f"error: {exc}"]
        report.update(status="error", error=str(exc))
    except conic.ConicError as exc:
        status, code, lines = "solver_error", EXIT_SOLVER, [f"solver error: {exc}"]
        report.update(status="solver_error", error=str(exc))
    report["exit_code"] = code
    report["timings"] = {"total_seconds": time.perf_counter() - t0}
    report = clean(report)
    if not args.json_only:
        for line in lines:
            print(line, file=sys.stderr)
    return report, code


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    verbose = "-v" in argv or "--verbose" in argv
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    report, code = run(argv)
    json.dump(report, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
