"""
Coefficient frames and epsilon-optimality
=========================================

The distance between f and f~ depends on which coordinates the coefficients
are read in. This script contrasts the two frames on a disconnected set and
then trades certificate slack (epsilon) for distance.
"""

import numpy as np

from invpoly.cli import resolve_path
from invpoly.certify import membership
from invpoly.inverse import InverseProblem, distance, solve_inverse
from invpoly.oracle import grid_min
from invpoly.parser import load_problem, parse_polynomial

pf = load_problem(resolve_path("ex3b"))
K, y = pf.feasible_set(), pf.point

# %% distance in x versus distance in u = x - y
for frame in ("original", "centered"):
    p = InverseProblem(pf.objective, K, y, 2, norm_frame=frame)
    sol = solve_inverse(p)
    print(f"{frame:9s} f~ = {sol.f_tilde.chop(1e-7).to_string(pf.variables, 6)}  "
          f"objective = {sol.rho_objective:.5f}  l1 distance in x = {sol.rho:.5f}")

# %% the quadratic 1.26 x1 - x2^2 has a degree-2 certificate at y
g = parse_polynomial("1.26*x1 - x2^2", pf.variables)
r = membership(g - g(y), K, 2, center=y)
print("certificate:", r.status, " residual", r.report.residual_norm)

# %% where the objective is really minimised
res = grid_min(pf.objective, K, (-2, 2), step=0.01)
print("grid minimiser", np.round(res.argmin, 3), "value", round(res.value, 4))

# %% epsilon slack on the first fixture
ex1 = load_problem(resolve_path("ex1a"))
p = InverseProblem(ex1.objective, ex1.feasible_set(), ex1.point, 2)
for eps in (0.0, 0.1, 0.25, 0.4, 0.5, 2.5):
    print(f"eps={eps:<4}  rho={solve_inverse(p.replace(epsilon=eps)).rho:.6f}")
