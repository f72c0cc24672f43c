import warnings

import numpy as np
import pytest

from invpoly.certify import FeasibleSet
from invpoly.oracle import enumerate_min, grid_min, points, sample_min
from invpoly.polyalg import Polynomial

from instances import bundled, zero_one_set


def test_grid_ex1(xy):
    x1, x2 = xy
    K = bundled("ex1a").feasible_set()
    r = grid_min(x1 + x2, K, (0.4, 2.1), step=0.01)
    assert r.value == pytest.approx(2.0, abs=1e-3)
    assert np.allclose(r.argmin, [1, 1], atol=0.05)
    assert K.contains(r.argmin) and r.value == pytest.approx((x1 + x2)(r.argmin))
    assert r.resolution == pytest.approx(0.001)


def test_grid_ex3_location(xy):
    # the stated objective is minimised on the positive branch; the negative
    # branch point (-0.618, -1/0.618) is not its minimiser
    x1, x2 = xy
    K = bundled("ex3a").feasible_set()
    f = -x1 - x2 ** 2
    r = grid_min(f, K, (-2, 2), step=0.01)
    phi = (np.sqrt(5) - 1) / 2
    assert np.allclose(r.argmin, [phi, 1 / phi], atol=0.01)
    assert f(np.array([-phi, -1 / phi])) > r.value + 1
    # with x1's sign flipped the minimiser moves to the negative branch
    r2 = grid_min(x1 - x2 ** 2, K, (-2, 2), step=0.01)
    assert np.allclose(r2.argmin, [-phi, -1 / phi], atol=0.01)


def test_grid_monotone_in_step(xy):
    x1, x2 = xy
    K = bundled("ex3a").feasible_set()
    f = -x1 - x2 ** 2
    coarse = grid_min(f, K, (-2, 2), step=0.05).value
    fine = grid_min(f, K, (-2, 2), step=0.01).value
    assert fine <= coarse + 1e-12


def test_grid_errors(xy):
    x1, x2 = xy
    K = FeasibleSet(2, [x1 - 10])
    with pytest.raises(ValueError, match="finer step"):
        grid_min(x1, K, (-1, 1), step=0.1)
    with pytest.raises(ValueError):
        grid_min(x1, K, None)
    with pytest.raises(ValueError):
        grid_min(x1, K, (1, -1))


def test_enumeration(xy):
    x1, x2 = xy
    f = 3 * x1 - 2 * x2 + x1 * x2
    r = enumerate_min(f, zero_one_set(2))
    assert r.value == -2 and np.array_equal(r.argmin, [0, 1])
    assert r.samples == 4
    assert len(list(points((0, 1), 3))) == 8


def test_tie_break_lexicographic():
    x = Polynomial.variable(0, 1)
    r = grid_min(x ** 2 - 1, FeasibleSet(1, []), values=(-1, 1))
    assert r.argmin[0] == -1


def test_sample_min_examples(xy):
    x1, x2 = xy
    free = FeasibleSet(2, [])
    assert sample_min(1 - x1 ** 2, free, (-1, 1)).value >= -1e-12
    assert sample_min(x1, free, (-1, 1)).value == pytest.approx(-1, abs=1e-2)


def test_sample_min_deterministic(xy):
    x1, x2 = xy
    K = bundled("ex2").feasible_set()
    a = sample_min(x1 - x2, K, (0.5, 2), N=2000)
    b = sample_min(x1 - x2, K, (0.5, 2), N=2000)
    assert a.value == b.value and np.array_equal(a.argmin, b.argmin)


def test_sample_min_warns(xy):
    x1, x2 = xy
    K = FeasibleSet(2, [1e-6 - x1 ** 2 - x2 ** 2])
    with pytest.warns(RuntimeWarning):
        r = sample_min(x1, K, (-1, 1), N=1000)
    assert r.warnings


def test_per_variable_box(xy):
    x1, x2 = xy
    r = sample_min(x1 + x2, FeasibleSet(2, []), [(0, 1), (2, 3)], N=1024)
    assert r.value >= 2 and r.value == pytest.approx(2, abs=0.1)
