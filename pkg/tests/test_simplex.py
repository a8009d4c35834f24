import numpy as np
import pytest
from scipy.optimize import linprog

from fdrelay.simplex import LpStatus, solve


def test_one_variable():
    r = solve([1.0], [[-1.0]], [-1.0], upper=[3.0])
    assert r.status is LpStatus.OPTIMAL and r.x[0] == pytest.approx(1.0)


def test_peak_below_requirement_is_infeasible():
    r = solve([1.0], [[-1.0]], [-1.0], upper=[0.5])
    assert r.status is LpStatus.INFEASIBLE and r.infeasibility > 0


def test_unbounded():
    r = solve([-1.0, 0.0], [[0.0, 1.0]], [1.0])
    assert r.status is LpStatus.UNBOUNDED


def test_beale_cycling_example_terminates():
    # classic instance on which the largest-coefficient rule cycles
    c = [-0.75, 150, -0.02, 6]
    a = [[0.25, -60, -0.04, 9], [0.5, -90, -0.02, 3], [0, 0, 1, 0]]
    b = [0, 0, 1]
    r = solve(c, a, b)
    assert r.status is LpStatus.OPTIMAL
    assert r.objective == pytest.approx(-0.05)


@pytest.mark.parametrize("seed", range(30))
def test_matches_scipy_on_random_lps(seed):
    rng = np.random.default_rng(seed)
    n, m = rng.integers(2, 6), rng.integers(2, 8)
    a = rng.normal(size=(m, n))
    b = rng.normal(size=m)
    c = rng.uniform(0.1, 2.0, n)
    up = rng.uniform(0.5, 3.0, n)
    ours = solve(c, a, b, upper=up)
    ref = linprog(c, A_ub=a, b_ub=b, bounds=list(zip(np.zeros(n), up)), method="highs")
    if ref.status == 2:
        assert ours.status is LpStatus.INFEASIBLE
    else:
        assert ours.status is LpStatus.OPTIMAL
        assert ours.objective == pytest.approx(ref.fun, rel=1e-8, abs=1e-10)
        assert np.all(a @ ours.x <= b + 1e-9)
        assert np.all(ours.x <= up + 1e-12) and np.all(ours.x >= 0)


def test_rejects_nonfinite():
    with pytest.raises(ValueError):
        solve([1.0], [[np.nan]], [1.0])
