"""Shared problem data and random instance generators for the test suite."""

import numpy as np

from invpoly.basis import enumerate_monomials
from invpoly.certify import FeasibleSet
from invpoly.cli import resolve_path
from invpoly.parser import load_problem
from invpoly.polyalg import Polynomial

BUNDLED = ("ex1a", "ex1b", "ex2", "ex3a", "ex3b", "maxcut5", "bool2")


def bundled(name):
    return load_problem(resolve_path(name))


def rand_poly(n, deg, rng, low=0, scale=1.0):
    mons = [m for m in enumerate_monomials(n, deg).monomials if sum(m) >= low]
    return Polynomial(n, {m: float(np.round(rng.uniform(-scale, scale), 3)) for m in mons})


def random_quadratic_set(rng, n=2):
    """A ball plus one random quadratic through (or around) a point y; returns ``(K, y)``.

    The ball keeps K compact; y is strictly inside the ball so K has interior.
    """
    x = Polynomial.variables(n)
    c = rng.uniform(-0.5, 0.5, n)
    ball = 1.5 - sum((x[i] - c[i]) ** 2 for i in range(n))
    y = c + rng.uniform(-0.5, 0.5, n)
    q = rand_poly(n, 2, rng)
    g2 = q - q(y) + (abs(rng.uniform(0.05, 0.3)) if rng.uniform() < 0.5 else 0.0)
    return FeasibleSet(n, [ball, g2]), y


def random_disk_instance(rng, k, n=2):
    """Disk inside a box; y on the boundary for even k, interior for odd k."""
    x = Polynomial.variables(n)
    c = rng.uniform(-0.5, 0.5, n)
    r = rng.uniform(0.5, 1.0)
    disk = r ** 2 - sum((x[i] - c[i]) ** 2 for i in range(n))
    th = rng.uniform(0, 2 * np.pi)
    rad = r if k % 2 == 0 else r * rng.uniform(0.2, 0.9)
    y = c + rad * np.array([np.cos(th), np.sin(th)])
    f = rand_poly(n, 2 if k < 5 else 3, rng)
    return f, FeasibleSet(n, [disk]), y, (c - r, c + r)


def zero_one_set(n):
    x = Polynomial.variables(n)
    return FeasibleSet(n, [], [x[i] ** 2 - x[i] for i in range(n)])


def unit_box(n):
    x = Polynomial.variables(n)
    return FeasibleSet(n, [1 - x[i] ** 2 for i in range(n)])
