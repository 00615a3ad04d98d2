import numpy as np
import pytest
from scipy.optimize import linprog

from synthesize.simplex import (
    STATUS_INFEASIBLE,
    STATUS_OPTIMAL,
    STATUS_UNBOUNDED,
    LinearProgram,
    lp_solve,
    vertex_enumeration_max,
)


def test_two_variable_maximization():
    lp = LinearProgram(objective=[1.0, 1.0], a_ub=[[1.0, 2.0], [3.0, 1.0]], b_ub=[4.0, 6.0], maximize=True)
    solution = lp_solve(lp)
    assert solution.status == STATUS_OPTIMAL
    assert solution.objective == pytest.approx(2.8)
    assert solution.x == pytest.approx([1.6, 1.2])
    assert solution.max_residual < 1e-12


def test_infeasible_equality():
    solution = lp_solve(LinearProgram(objective=[1.0], a_eq=[[1.0]], b_eq=[-1.0]))
    assert solution.status == STATUS_INFEASIBLE
    assert not solution.is_optimal
    assert solution.x is None


def test_unbounded_problem():
    lp = LinearProgram(objective=[1.0, 0.0], a_ub=[[1.0, -1.0]], b_ub=[1.0], maximize=True)
    assert lp_solve(lp).status == STATUS_UNBOUNDED


def test_variable_bounds():
    upper = lp_solve(LinearProgram(objective=[1.0], upper=[3.0], maximize=True))
    assert upper.objective == pytest.approx(3.0)
    lower = lp_solve(LinearProgram(objective=[1.0], lower=[2.0]))
    assert lower.objective == pytest.approx(2.0)


def test_redundant_equalities_are_dropped():
    lp = LinearProgram(
        objective=[1.0, 2.0, 3.0],
        a_eq=[[1.0, 1.0, 1.0], [2.0, 2.0, 2.0], [1.0, 0.0, 1.0]],
        b_eq=[1.0, 2.0, 0.5],
        maximize=True,
    )
    solution = lp_solve(lp)
    assert solution.status == STATUS_OPTIMAL
    assert solution.objective == pytest.approx(2.5)
    assert solution.details["redundant_rows"] == 1


def test_random_programs_match_linprog():
    rng = np.random.default_rng(0)
    for _ in range(40):
        n, m = int(rng.integers(3, 8)), int(rng.integers(1, 4))
        a_eq = rng.uniform(0.1, 1.0, size=(m, n))
        x0 = rng.dirichlet(np.ones(n))
        b_eq = a_eq @ x0
        objective = rng.normal(size=n)
        ours = lp_solve(LinearProgram(objective=objective, a_eq=a_eq, b_eq=b_eq, upper=np.full(n, 1.0)))
        reference = linprog(objective, A_eq=a_eq, b_eq=b_eq, bounds=[(0, 1)] * n, method="highs")
        assert ours.status == STATUS_OPTIMAL
        assert ours.objective == pytest.approx(reference.fun, abs=1e-8)


def test_vertex_enumeration_matches_simplex():
    rng = np.random.default_rng(1)
    a_eq = np.vstack([np.ones(6), rng.uniform(0, 1, 6)])
    b_eq = np.array([1.0, a_eq[1].mean()])
    objective = rng.normal(size=6)
    best = vertex_enumeration_max(a_eq, b_eq, objective)
    solution = lp_solve(LinearProgram(objective=objective, a_eq=a_eq, b_eq=b_eq, maximize=True))
    assert best == pytest.approx(solution.objective, abs=1e-9)


def test_invalid_programs_rejected():
    with pytest.raises(ValueError):
        LinearProgram(objective=[1.0, 2.0], a_eq=[[1.0]], b_eq=[1.0])
    with pytest.raises(ValueError):
        LinearProgram(objective=[1.0], lower=[2.0], upper=[1.0])
    with pytest.raises(ValueError):
        LinearProgram(objective=[float("nan")])
