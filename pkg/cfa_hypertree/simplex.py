"""Bounded-variable primal simplex for small covering LPs.

Solves   min c·x   s.t.   A x >= b,   0 <= x <= u
with a dense two-phase tableau and Bland's rule. Nonbasic variables sit at
their lower or upper bound; a ratio test may flip the entering variable
between its bounds instead of pivoting.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from cfa_hypertree.helpers import HypertreeError

logger = logging.getLogger(__name__)

PIVOT_TOL = 1e-9
FEASIBILITY_TOL = 1e-6


class LinearProgramError(HypertreeError, ValueError):
    """Raised for inconsistent LP data or an unbounded objective."""


class LpStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"


@dataclass
class LinearProgram:
    """min c·x subject to A x >= b and 0 <= x <= upper

    Args:
        c (np.ndarray): objective coefficients, shape (n,)
        A (np.ndarray): constraint rows, shape (m, n)
        b (np.ndarray): right-hand sides, shape (m,)
        upper (np.ndarray): upper bounds, np.inf allowed; defaults to all ones
    """

    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    upper: np.ndarray | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.A = np.asarray(self.A, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        n = self.c.shape[0]
        if self.A.size == 0:
            self.A = self.A.reshape(0, n)
        if self.upper is None:
            self.upper = np.ones(n)
        self.upper = np.asarray(self.upper, dtype=float)
        if self.A.ndim != 2 or self.A.shape[1] != n:
            raise LinearProgramError(f"constraint matrix shape {self.A.shape} does not match {n} variables")
        if self.b.shape != (self.A.shape[0],):
            raise LinearProgramError("right-hand side length differs from the row count")
        if self.upper.shape != (n,):
            raise LinearProgramError("upper bounds length differs from the variable count")
        if not (
            np.all(np.isfinite(self.c))
            and np.all(np.isfinite(self.A))
            and np.all(np.isfinite(self.b))
        ):
            raise LinearProgramError("LP data must be finite")
        if np.any(self.upper < 0):
            raise LinearProgramError("upper bounds must be nonnegative")

    @property
    def num_variables(self) -> int:
        return self.c.shape[0]

    @property
    def num_rows(self) -> int:
        return self.A.shape[0]


@dataclass
class LpSolution:
    status: LpStatus
    x: np.ndarray = field(default_factory=lambda: np.zeros(0))
    objective: float = float("nan")
    duals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    iterations: int = 0


class _Tableau:
    def __init__(self, lp: LinearProgram):
        m, n = lp.A.shape
        sign = np.where(lp.b < 0, -1.0, 1.0)
        # columns: structural x | surplus s | artificial a
        self.T = np.hstack(
            [sign[:, None] * lp.A, -sign[:, None] * np.eye(m), np.eye(m)]
        )
        self.sign = sign
        self.n, self.m = n, m
        self.N = n + 2 * m
        self.art = np.arange(n + m, self.N)
        self.upper = np.concatenate([lp.upper, np.full(2 * m, np.inf)])
        self.basis = list(range(n + m, self.N))
        self.xB = sign * lp.b
        self.at_upper = np.zeros(self.N, dtype=bool)
        self.iterations = 0
        self.max_iterations = 50 * (self.N + m + 1)

    def nonbasic_value(self, j: int) -> float:
        return self.upper[j] if self.at_upper[j] else 0.0

    def values(self) -> np.ndarray:
        x = np.array([self.nonbasic_value(j) for j in range(self.N)])
        x[self.basis] = self.xB
        return x

    def run(self, cost: np.ndarray, allowed: np.ndarray) -> None:
        """minimizes cost·x from the current basis; `allowed` masks entering columns"""
        while True:
            self.iterations += 1
            if self.iterations > self.max_iterations:
                logger.error("Simplex exceeded its iteration limit.")
                raise LinearProgramError("simplex iteration limit exceeded")
            reduced = cost - cost[self.basis] @ self.T
            basic = np.zeros(self.N, dtype=bool)
            basic[self.basis] = True
            improving = allowed & ~basic & (
                (~self.at_upper & (reduced < -PIVOT_TOL))
                | (self.at_upper & (reduced > PIVOT_TOL))
            )
            if not improving.any():
                return
            j = int(np.flatnonzero(improving)[0])
            self._step(j)

    def _step(self, j: int) -> None:
        direction = -1.0 if self.at_upper[j] else 1.0
        column = self.T[:, j]
        best = self.upper[j]
        leave, leave_to_upper = None, False
        for i in sorted(range(self.m), key=lambda r: self.basis[r]):
            rate = -direction * column[i]
            bvar = self.basis[i]
            if rate < -PIVOT_TOL:
                step = max(self.xB[i], 0.0) / -rate
                to_upper = False
            elif rate > PIVOT_TOL and np.isfinite(self.upper[bvar]):
                step = max(self.upper[bvar] - self.xB[i], 0.0) / rate
                to_upper = True
            else:
                continue
            # rows are visited by basic index, so ties keep Bland's smallest index
            if step < best - PIVOT_TOL or (leave is None and step <= best + PIVOT_TOL):
                best, leave, leave_to_upper = step, i, to_upper
        if not np.isfinite(best):
            logger.error("Simplex found an unbounded direction.")
            raise LinearProgramError("LP objective is unbounded")
        self.xB = self.xB - direction * best * column
        if leave is None:
            self.at_upper[j] = not self.at_upper[j]
            return
        entering_value = self.nonbasic_value(j) + direction * best
        leaving = self.basis[leave]
        self.at_upper[leaving] = leave_to_upper
        pivot = self.T[leave, j]
        self.T[leave] = self.T[leave] / pivot
        others = np.arange(self.m) != leave
        self.T[others] -= np.outer(self.T[others, j], self.T[leave])
        self.basis[leave] = j
        self.at_upper[j] = False
        self.xB[leave] = entering_value


def solve(lp: LinearProgram) -> LpSolution:
    """solves an LP with the two-phase bounded-variable simplex

    Returns:
        LpSolution: optimal point, objective and row duals, or INFEASIBLE

    Raises:
        LinearProgramError: when the objective is unbounded below
    """
    tableau = _Tableau(lp)
    n, m = lp.num_variables, lp.num_rows
    allowed = np.ones(tableau.N, dtype=bool)

    phase_one = np.zeros(tableau.N)
    phase_one[tableau.art] = 1.0
    tableau.run(phase_one, allowed)
    infeasibility = float(tableau.values()[tableau.art].sum())
    if infeasibility > FEASIBILITY_TOL:
        logger.debug(f"LP infeasible, phase one ended at {infeasibility:.3g}.")
        return LpSolution(LpStatus.INFEASIBLE, iterations=tableau.iterations)

    # artificials are pinned at zero from here on
    tableau.upper[tableau.art] = 0.0
    allowed[tableau.art] = False
    phase_two = np.zeros(tableau.N)
    phase_two[:n] = lp.c
    tableau.run(phase_two, allowed)

    x = np.clip(tableau.values()[:n], 0.0, lp.upper)
    duals = (phase_two[tableau.basis] @ tableau.T[:, tableau.art]) * tableau.sign
    objective = float(lp.c @ x)
    logger.debug(
        f"LP with {n} variables and {m} rows solved in {tableau.iterations} iterations, objective {objective:.6g}."
    )
    return LpSolution(LpStatus.OPTIMAL, x, objective, duals, tableau.iterations)
