"""Dense two-phase tableau simplex with Bland's rule.

Solves ``maximize c.x  s.t.  A x (<=, >=, ==) b,  x >= 0``. Bland's
smallest-index rule on both the entering and leaving choice rules out
cycling on degenerate problems such as the mechanism LPs.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .errors import SolverStallError, UsageError

logger = logging.getLogger(__name__)

PIVOT_TOL = 1e-9
FEASIBILITY_TOL = 1e-7
SENSES = ("<=", ">=", "==")


@dataclass
class SimplexResult:
    status: str  # "optimal", "infeasible" or "unbounded"
    x: Optional[np.ndarray]
    objective: float
    iterations: int


class _Tableau:
    """Rows B^-1 [A | b] plus the current basis."""

    def __init__(self, body: np.ndarray, rhs: np.ndarray, basis: List[int]):
        self.table = np.hstack([body, rhs[:, None]])
        self.basis = list(basis)

    @property
    def rhs(self) -> np.ndarray:
        return self.table[:, -1]

    def pivot(self, row: int, col: int) -> None:
        self.table[row] /= self.table[row, col]
        for i in range(self.table.shape[0]):
            if i != row and self.table[i, col] != 0.0:
                self.table[i] -= self.table[i, col] * self.table[row]
        self.basis[row] = col

    def reduced_costs(self, cost: np.ndarray) -> np.ndarray:
        return cost - cost[self.basis] @ self.table[:, :-1]

    def value(self, cost: np.ndarray) -> float:
        return float(cost[self.basis] @ self.rhs)


class DenseSimplex:
    """Two-phase simplex on a dense numpy tableau."""

    def __init__(self, tol: float = PIVOT_TOL, max_iterations: int = 50_000):
        self.tol = tol
        self.max_iterations = max_iterations
        self.iterations = 0

    def _optimize(self, tableau: _Tableau, cost: np.ndarray, phase: int) -> str:
        while True:
            if self.iterations >= self.max_iterations:
                raise SolverStallError(self.iterations, phase)
            entering = np.flatnonzero(tableau.reduced_costs(cost) > self.tol)
            if len(entering) == 0:
                return "optimal"
            col = int(entering[0])
            column = tableau.table[:, col]
            rows = np.flatnonzero(column > self.tol)
            if len(rows) == 0:
                return "unbounded"
            ratios = tableau.rhs[rows] / column[rows]
            ties = rows[ratios <= ratios.min() + self.tol]
            row = int(min(ties, key=lambda i: tableau.basis[i]))
            tableau.pivot(row, col)
            self.iterations += 1

    def maximize(self, c: Sequence[float], A: np.ndarray, senses: Sequence[str],
                 b: Sequence[float]) -> SimplexResult:
        """Maximize ``c.x`` subject to the rows of ``A`` and ``x >= 0``."""
        c = np.asarray(c, dtype=float)
        A = np.array(A, dtype=float)
        b = np.array(b, dtype=float)
        senses = list(senses)
        rows, n_vars = A.shape
        if c.shape != (n_vars,) or b.shape != (rows,) or len(senses) != rows:
            raise UsageError("objective, matrix, senses and rhs disagree in size")
        if any(s not in SENSES for s in senses):
            raise UsageError(f"senses must be among {SENSES}")
        self.iterations = 0

        flip = {"<=": ">=", ">=": "<=", "==": "=="}
        for i in np.flatnonzero(b < 0):
            A[i] *= -1.0
            b[i] *= -1.0
            senses[i] = flip[senses[i]]

        inequality_rows = [i for i, s in enumerate(senses) if s != "=="]
        artificial_rows = [i for i, s in enumerate(senses) if s != "<="]
        n_slack, n_art = len(inequality_rows), len(artificial_rows)
        first_art = n_vars + n_slack
        body = np.zeros((rows, first_art + n_art))
        body[:, :n_vars] = A
        basis = [-1] * rows
        for k, i in enumerate(inequality_rows):
            body[i, n_vars + k] = 1.0 if senses[i] == "<=" else -1.0
            if senses[i] == "<=":
                basis[i] = n_vars + k
        for k, i in enumerate(artificial_rows):
            body[i, first_art + k] = 1.0
            basis[i] = first_art + k
        tableau = _Tableau(body, b, basis)

        if n_art:
            phase_one = np.zeros(body.shape[1])
            phase_one[first_art:] = -1.0
            self._optimize(tableau, phase_one, phase=1)
            if tableau.value(phase_one) < -FEASIBILITY_TOL * max(1.0, float(np.abs(b).max())):
                logger.debug("phase 1 ended at %g: infeasible", tableau.value(phase_one))
                return SimplexResult("infeasible", None, float("nan"), self.iterations)
            self._drop_artificials(tableau, first_art)

        cost = np.zeros(tableau.table.shape[1] - 1)
        cost[:n_vars] = c
        status = self._optimize(tableau, cost, phase=2)
        if status == "unbounded":
            return SimplexResult("unbounded", None, float("inf"), self.iterations)

        x = np.zeros(tableau.table.shape[1] - 1)
        x[tableau.basis] = np.clip(tableau.rhs, 0.0, None)
        x = x[:n_vars]
        logger.debug("simplex optimal after %d pivots", self.iterations)
        return SimplexResult("optimal", x, float(c @ x), self.iterations)

    def _drop_artificials(self, tableau: _Tableau, first_art: int) -> None:
        """Pivot zero-level artificials out of the basis, drop redundant rows, drop their columns."""
        keep_rows = []
        for row, var in enumerate(list(tableau.basis)):
            if var < first_art:
                keep_rows.append(row)
                continue
            candidates = np.flatnonzero(np.abs(tableau.table[row, :first_art]) > self.tol)
            if len(candidates) == 0:
                continue  # redundant constraint
            tableau.pivot(row, int(candidates[0]))
            keep_rows.append(row)
        tableau.table = np.hstack([
            tableau.table[keep_rows, :first_art], tableau.table[keep_rows, -1:]
        ])
        tableau.basis = [tableau.basis[r] for r in keep_rows]
