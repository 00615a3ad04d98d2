"""Dense two-phase simplex with Bland's anti-cycling rule.

Problems are small (at most a few hundred variables), so the solver keeps a full
tableau and favours exactness over speed.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional

import numpy as np

logger = logging.getLogger(__name__)

PIVOT_TOLERANCE = 1e-11
DEFAULT_TOLERANCE = 1e-9

STATUS_OPTIMAL = "optimal"
STATUS_INFEASIBLE = "infeasible"
STATUS_UNBOUNDED = "unbounded"
STATUS_ITERATION_LIMIT = "iteration_limit"


def _as_matrix(values, n: int, name: str) -> np.ndarray:
    if values is None:
        return np.zeros((0, n))
    matrix = np.atleast_2d(np.asarray(values, dtype=float))
    if matrix.shape[1] != n:
        raise ValueError(f"{name} has {matrix.shape[1]} columns, expected {n}")
    return matrix


def _as_vector(values, m: int, name: str) -> np.ndarray:
    if values is None:
        vector = np.zeros(0)
    else:
        vector = np.atleast_1d(np.asarray(values, dtype=float)).ravel()
    if vector.shape[0] != m:
        raise ValueError(f"{name} has length {vector.shape[0]}, expected {m}")
    return vector


@dataclass
class LinearProgram:
    """min (or max) c.x  s.t.  a_ub x <= b_ub,  a_eq x = b_eq,  lower <= x <= upper.

    Lower bounds must be finite. Upper bounds may be +inf.
    """

    objective: np.ndarray
    a_ub: Optional[np.ndarray] = None
    b_ub: Optional[np.ndarray] = None
    a_eq: Optional[np.ndarray] = None
    b_eq: Optional[np.ndarray] = None
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None
    maximize: bool = False

    def __post_init__(self):
        self.objective = np.atleast_1d(np.asarray(self.objective, dtype=float)).ravel()
        n = self.objective.shape[0]
        if n == 0:
            raise ValueError("objective must have at least one coefficient")
        self.a_ub = _as_matrix(self.a_ub, n, "a_ub")
        self.b_ub = _as_vector(self.b_ub, self.a_ub.shape[0], "b_ub")
        self.a_eq = _as_matrix(self.a_eq, n, "a_eq")
        self.b_eq = _as_vector(self.b_eq, self.a_eq.shape[0], "b_eq")
        self.lower = np.zeros(n) if self.lower is None else _as_vector(self.lower, n, "lower")
        self.upper = np.full(n, np.inf) if self.upper is None else _as_vector(self.upper, n, "upper")
        for name, values in (
            ("objective", self.objective),
            ("a_ub", self.a_ub),
            ("b_ub", self.b_ub),
            ("a_eq", self.a_eq),
            ("b_eq", self.b_eq),
            ("lower", self.lower),
        ):
            if not np.all(np.isfinite(values)):
                raise ValueError(f"{name} must be finite")
        if np.isnan(self.upper).any() or (self.upper == -np.inf).any():
            raise ValueError("upper bounds must be finite or +inf")
        if (self.lower > self.upper).any():
            raise ValueError("lower bound exceeds upper bound")

    @property
    def n_variables(self) -> int:
        return int(self.objective.shape[0])


@dataclass
class LpSolution:
    status: str
    x: Optional[np.ndarray]
    objective: Optional[float]
    iterations: int
    max_residual: float = float("nan")
    details: dict = field(default_factory=dict)

    @property
    def is_optimal(self) -> bool:
        return self.status == STATUS_OPTIMAL


def _pivot(tableau: np.ndarray, row: int, col: int) -> None:
    tableau[row] /= tableau[row, col]
    factors = tableau[:, col].copy()
    factors[row] = 0.0
    tableau -= np.outer(factors, tableau[row])
    tableau[:, col] = 0.0
    tableau[row, col] = 1.0


def _run_simplex(
    tableau: np.ndarray,
    basis: list[int],
    n_columns: int,
    *,
    tolerance: float,
    max_iterations: int,
) -> tuple[str, int]:
    """Minimize the objective row in place using Bland's rule.

    The last row holds reduced costs and -z; only the first `n_columns` columns
    may enter the basis.
    """
    m = len(basis)
    iterations = 0
    while True:
        costs = tableau[m, :n_columns]
        candidates = np.flatnonzero(costs < -tolerance)
        if candidates.size == 0:
            return STATUS_OPTIMAL, iterations
        if iterations >= max_iterations:
            return STATUS_ITERATION_LIMIT, iterations
        col = int(candidates[0])
        column = tableau[:m, col]
        eligible = np.flatnonzero(column > PIVOT_TOLERANCE)
        if eligible.size == 0:
            return STATUS_UNBOUNDED, iterations
        ratios = tableau[eligible, -1] / column[eligible]
        best = ratios.min()
        tied = eligible[ratios <= best + 1e-12]
        row = int(min(tied, key=lambda r: basis[r]))
        _pivot(tableau, row, col)
        basis[row] = col
        iterations += 1


def _residual(lp: LinearProgram, x: np.ndarray) -> float:
    parts = [0.0]
    if lp.a_eq.shape[0]:
        parts.append(float(np.abs(lp.a_eq @ x - lp.b_eq).max()))
    if lp.a_ub.shape[0]:
        parts.append(float(np.clip(lp.a_ub @ x - lp.b_ub, 0.0, None).max()))
    parts.append(float(np.clip(lp.lower - x, 0.0, None).max()))
    finite = np.isfinite(lp.upper)
    if finite.any():
        parts.append(float(np.clip(x[finite] - lp.upper[finite], 0.0, None).max()))
    return max(parts)


def lp_solve(
    lp: LinearProgram,
    *,
    tolerance: float = DEFAULT_TOLERANCE,
    max_iterations: int = 50_000,
) -> LpSolution:
    """Solve a LinearProgram.

    Returns:
        LpSolution with status "optimal" (x at a vertex of the feasible region),
        "infeasible" or "unbounded".
    """
    n = lp.n_variables
    shift = lp.lower
    finite_upper = np.flatnonzero(np.isfinite(lp.upper))

    ub_rows = [lp.a_ub]
    ub_rhs = [lp.b_ub - lp.a_ub @ shift]
    if finite_upper.size:
        bound_rows = np.zeros((finite_upper.size, n))
        bound_rows[np.arange(finite_upper.size), finite_upper] = 1.0
        ub_rows.append(bound_rows)
        ub_rhs.append(lp.upper[finite_upper] - shift[finite_upper])
    a_ub = np.vstack(ub_rows)
    b_ub = np.concatenate(ub_rhs)
    b_eq = lp.b_eq - lp.a_eq @ shift

    m_ub, m_eq = a_ub.shape[0], lp.a_eq.shape[0]
    m = m_ub + m_eq
    n_total = n + m_ub

    a = np.zeros((m, n_total))
    a[:m_ub, :n] = a_ub
    a[:m_ub, n:] = np.eye(m_ub)
    a[m_ub:, :n] = lp.a_eq
    b = np.concatenate([b_ub, b_eq])
    negative = b < 0
    a[negative] *= -1.0
    b[negative] *= -1.0

    # Phase 1: one artificial per row.
    tableau = np.zeros((m + 1, n_total + m + 1))
    tableau[:m, :n_total] = a
    tableau[:m, n_total:n_total + m] = np.eye(m)
    tableau[:m, -1] = b
    tableau[m, :n_total] = -a.sum(axis=0)
    tableau[m, -1] = -b.sum()
    basis = list(range(n_total, n_total + m))

    status, it1 = _run_simplex(tableau, basis, n_total, tolerance=tolerance, max_iterations=max_iterations)
    if status == STATUS_ITERATION_LIMIT:
        return LpSolution(status, None, None, it1)
    infeasibility = -tableau[m, -1]
    scale = 1.0 + (float(np.abs(b).max()) if m else 0.0)
    if infeasibility > tolerance * scale:
        logger.debug("phase 1 ended with infeasibility %.3g", infeasibility)
        return LpSolution(STATUS_INFEASIBLE, None, None, it1, details={"phase1_infeasibility": float(infeasibility)})

    # Drive remaining artificials out of the basis; drop redundant rows.
    keep_rows = []
    for row in range(m):
        if basis[row] < n_total:
            keep_rows.append(row)
            continue
        candidates = np.flatnonzero(np.abs(tableau[row, :n_total]) > PIVOT_TOLERANCE)
        if candidates.size:
            col = int(candidates[0])
            _pivot(tableau, row, col)
            basis[row] = col
            keep_rows.append(row)
    redundant = m - len(keep_rows)
    if redundant:
        logger.debug("dropped %d redundant constraint rows", redundant)

    core = tableau[keep_rows][:, list(range(n_total)) + [-1]]
    basis = [basis[r] for r in keep_rows]
    m2 = len(basis)
    phase2 = np.zeros((m2 + 1, n_total + 1))
    phase2[:m2] = core

    cost = np.zeros(n_total)
    cost[:n] = -lp.objective if lp.maximize else lp.objective
    phase2[m2, :n_total] = cost
    for row, var in enumerate(basis):
        phase2[m2] -= cost[var] * phase2[row]

    status, it2 = _run_simplex(phase2, basis, n_total, tolerance=tolerance, max_iterations=max_iterations)
    iterations = it1 + it2
    if status != STATUS_OPTIMAL:
        return LpSolution(status, None, None, iterations)

    y = np.zeros(n_total)
    y[basis] = phase2[:m2, -1]
    x = np.clip(y[:n], 0.0, None) + shift
    objective = float(lp.objective @ x)
    residual = _residual(lp, x)
    logger.debug("lp solved: n=%d m=%d iterations=%d residual=%.3g", n, m, iterations, residual)
    return LpSolution(
        STATUS_OPTIMAL,
        x,
        objective,
        iterations,
        max_residual=residual,
        details={"redundant_rows": redundant},
    )


def vertex_enumeration_max(a_eq: np.ndarray, b_eq: np.ndarray, objective: np.ndarray, *, tolerance: float = 1e-10) -> float:
    """Maximize objective over {x >= 0 : a_eq x = b_eq} by visiting every basic feasible solution.

    Exponential in the number of columns; used as an independent check on small problems.
    """
    a_eq = np.atleast_2d(np.asarray(a_eq, dtype=float))
    b_eq = np.asarray(b_eq, dtype=float)
    objective = np.asarray(objective, dtype=float)
    rank = int(np.linalg.matrix_rank(a_eq))
    rows: list[int] = []
    for i in range(a_eq.shape[0]):
        if np.linalg.matrix_rank(a_eq[rows + [i]]) > len(rows):
            rows.append(i)
        if len(rows) == rank:
            break
    reduced, rhs = a_eq[rows], b_eq[rows]
    best = -np.inf
    for cols in combinations(range(a_eq.shape[1]), rank):
        block = reduced[:, cols]
        if abs(np.linalg.det(block)) < 1e-12:
            continue
        values = np.linalg.solve(block, rhs)
        if (values < -tolerance).any():
            continue
        x = np.zeros(a_eq.shape[1])
        x[list(cols)] = values
        if np.abs(a_eq @ x - b_eq).max() > 1e-8:
            continue
        best = max(best, float(objective @ x))
    if best == -np.inf:
        raise ValueError("no basic feasible solution found")
    return best
