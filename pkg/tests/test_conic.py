import numpy as np
import pytest

from invpoly import conic
from invpoly.conic import ConicBuilder, SolverConfig, check_solution, dump, load, solve

BACKENDS = ["clarabel", "cvxopt"]


def psd_boundary():
    # min x s.t. [[x, 1], [1, x]] psd, written as X psd with X01 = 1, X00 = X11
    B = ConicBuilder("min")
    blk = B.add_psd(2)
    B.add_row({B.entry(blk, 0, 1): 1.0}, 1.0)
    B.add_row({B.entry(blk, 0, 0): 1.0, B.entry(blk, 1, 1): -1.0}, 0.0)
    B.set_objective({B.entry(blk, 0, 0): 1.0})
    return B


def hankel():
    B = ConicBuilder("min")
    blk = B.add_psd(2)
    B.add_row({B.entry(blk, 0, 1): 1.0}, 1.0)
    B.add_row({B.entry(blk, 1, 1): 1.0}, 1.0)
    B.set_objective({B.entry(blk, 0, 0): 1.0})
    return B


def free_max():
    B = ConicBuilder("max")
    (c,) = B.add_free(1)
    B.add_row({c: 1.0}, 3.0)
    B.set_objective({c: 1.0})
    return B


def random_sdp(rng, k=4, m=3):
    """Random feasible and bounded standard-form SDP (min <C, X>)."""
    B = ConicBuilder("min")
    blk = B.add_psd(k)
    X0 = np.eye(k)
    for _ in range(m):
        Ai = rng.normal(size=(k, k))
        Ai = Ai + Ai.T
        trip = [(r, c, Ai[r, c]) for r in range(k) for c in range(r, k)]
        B.add_row(B.frobenius_terms(blk, trip), float(np.sum(Ai * X0)))
    L = rng.normal(size=(k, k))
    C = L @ L.T + 0.1 * np.eye(k)
    B.set_objective(B.frobenius_terms(blk, [(r, c, C[r, c]) for r in range(k) for c in range(r, k)]))
    return B


@pytest.mark.parametrize("backend", BACKENDS)
def test_spec_examples(backend):
    cfg = SolverConfig(backend=backend)
    s = solve(psd_boundary().build(), cfg)
    assert s.status == conic.OPTIMAL and s.objective_value == pytest.approx(1.0, abs=1e-6)
    s = solve(hankel().build(), cfg)
    assert s.status == conic.OPTIMAL and s.objective_value == pytest.approx(1.0, abs=1e-6)
    s = solve(free_max().build(), cfg)
    assert s.status == conic.OPTIMAL and s.objective_value == pytest.approx(3.0, abs=1e-7)


def test_empty_problem_errors():
    with pytest.raises(conic.ConicError):
        solve(ConicBuilder().build())


def test_unknown_backend():
    with pytest.raises(conic.ConicError):
        solve(free_max().build(), SolverConfig(backend="nope"))


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(gap_tol=0)
    with pytest.raises(ValueError):
        SolverConfig(psd_eig_floor=1e-3)


def test_infeasible():
    B = ConicBuilder("min")
    (a,) = B.add_nonneg(1)
    B.add_row({a: 1.0}, -1.0)
    B.set_objective({a: 1.0})
    assert solve(B.build()).status == conic.INFEASIBLE


def test_unbounded():
    B = ConicBuilder("min")
    a, b = B.add_free(2)
    B.add_row({a: 1.0, b: 1.0}, 0.0)
    B.set_objective({a: 1.0})
    assert solve(B.build()).status == conic.UNBOUNDED


@pytest.mark.parametrize("backend", BACKENDS)
def test_check_solution_clean_and_corrupted(backend):
    p = hankel().build()
    s = solve(p, SolverConfig(backend=backend))
    rep = check_solution(p, s)
    assert rep.ok, rep.violations
    assert abs(rep.gap - s.gap) <= 1e-10
    bad = s.x.copy()
    off = p.block_offsets()[0]
    bad[off] = -bad[off]  # negate X00
    corrupted = conic.ConicSolution(s.status, bad, s.y, s.objective_value, s.dual_objective,
                                    s.gap, s.primal_residual, s.dual_residual)
    rep2 = check_solution(p, corrupted)
    assert not rep2.ok
    assert any("PSD" in v or "equality" in v or "gap" in v for v in rep2.violations)


@pytest.mark.parametrize("seed", range(8))
def test_random_weak_duality_and_stationarity(seed):
    rng = np.random.default_rng(seed)
    cfg = SolverConfig()
    p = random_sdp(rng).build()
    s = solve(p, cfg)
    assert s.status == conic.OPTIMAL
    assert s.dual_objective <= s.objective_value + 10 * cfg.gap_tol * (1 + abs(s.objective_value))
    assert abs(s.objective_value - s.dual_objective) <= 10 * cfg.gap_tol * (1 + abs(s.objective_value))
    rep = check_solution(p, s, cfg)
    assert rep.ok, rep.violations
    assert s.dual_residual <= 10 * cfg.feas_tol


def test_backends_agree():
    rng = np.random.default_rng(3)
    p = random_sdp(rng, k=5, m=4).build()
    a = solve(p, SolverConfig(backend="clarabel"))
    b = solve(p, SolverConfig(backend="cvxopt"))
    assert a.objective_value == pytest.approx(b.objective_value, rel=1e-6, abs=1e-6)


def test_determinism():
    rng = np.random.default_rng(9)
    p = random_sdp(rng).build()
    a, b = solve(p), solve(p)
    assert a.status == b.status
    assert abs(a.objective_value - b.objective_value) <= 1e-10


def test_dump_roundtrip():
    p = random_sdp(np.random.default_rng(1)).build()
    text = dump(p)
    assert text.startswith("conic-v1\n")
    q = load(text)
    assert q.psd_sizes == p.psd_sizes and q.sense == p.sense
    assert np.array_equal(q.c, p.c) and np.array_equal(q.b, p.b)
    assert (q.A != p.A).nnz == 0
    with pytest.raises(conic.ConicError):
        load("garbage")


def test_svec_roundtrip(rng):
    M = rng.normal(size=(4, 4))
    M = M + M.T
    assert np.allclose(conic.smat(conic.svec(M)), M)
    N = rng.normal(size=(4, 4))
    N = N + N.T
    assert conic.svec(M) @ conic.svec(N) == pytest.approx(np.sum(M * N))
