"""
Inverse optimization on the bundled problems
============================================

Run with ``python3 notebooks/walkthrough.py``. Each block loads a fixture,
solves the inverse problem and checks the answer against brute force.
"""

import numpy as np

from invpoly.cli import resolve_path
from invpoly.certify import format_sos, sos_decomposition
from invpoly.inverse import (InverseProblem, forward_solve, hierarchy_sweep, optimality_gap_bound,
                             quadratic_matrix, solve_inverse, solve_structural, structural_preset)
from invpoly.oracle import grid_min
from invpoly.parser import load_problem


def load(name, d, **kw):
    pf = load_problem(resolve_path(name))
    return pf, InverseProblem(pf.objective, pf.feasible_set(), pf.point, d, **kw)


# %% x1 + x2 on {x1 x2 >= 1, 1/2 <= x <= 2}: y = (1, 1) is optimal but the
# certificate only appears at d = 3
pf, p = load("ex1a", 1)
sweep = hierarchy_sweep(p, [1, 2, 3])
for e in sweep.entries:
    print(f"d={e.d}  rho={e.rho:.6f}  f~ = {e.solution.f_tilde.chop(1e-8).to_string(pf.variables, 6)}")

# %% a point off the minimiser: the inverse objective tilts x1
pf, p = load("ex2", 2)
sol = solve_inverse(p)
print("rho =", round(sol.rho, 6), " f~ =", sol.f_tilde.chop(1e-8).to_string(pf.variables, 6))
print("dual objective =", round(sol.dual_objective, 6))
fw = forward_solve(sol.f_tilde, p.K, 2)
print("minimiser of f~ from moments:", fw.minimizer, " y =", p.y)

# the certificate, as sums of squares
cert = sol.certificate
for j, G in cert.sos:
    terms = sos_decomposition(G, cert.gram_basis(j, p.K), cert.center)
    print(f"sigma_{j} =", format_sos(terms, pf.variables, 4))

# %% how far is y from optimal?
gb = optimality_gap_bound(sol, p, xstar_hint=[1.0, 1.0])
fstar = grid_min(p.f, p.K, (0.5, 2.0), step=0.01).value
print(f"f* in [{gb.lower:.5f}, {gb.upper:.5f}];  grid oracle f* = {fstar:.5f}")

# %% MAXCUT: only the edge weights may move
pf, p = load("maxcut5", 1, structural=structural_preset("quadratic-form", 5, 2))
sol = solve_structural(p)
np.set_printoptions(precision=4, suppress=True)
print(quadratic_matrix(sol.f_tilde))
