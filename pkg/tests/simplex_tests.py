# ruff: noqa: F403, F405

import random
import unittest
from itertools import combinations

import numpy as np

from cfa_hypertree.simplex import (
    LinearProgram,
    LinearProgramError,
    LpStatus,
    solve,
)


def _vertex_enumeration(lp: LinearProgram) -> float | None:
    """optimum over all basic solutions of A x >= b, 0 <= x <= u"""
    n = lp.num_variables
    rows = [lp.A, np.eye(n), -np.eye(n)]
    rhs = [lp.b, np.zeros(n), -lp.upper]
    G = np.vstack(rows)
    h = np.concatenate(rhs)
    best = None
    for tight in combinations(range(G.shape[0]), n):
        sub = G[list(tight)]
        if abs(np.linalg.det(sub)) < 1e-12:
            continue
        x = np.linalg.solve(sub, h[list(tight)])
        if np.all(G @ x >= h - 1e-9):
            value = float(lp.c @ x)
            if best is None or value < best:
                best = value
    return best


def _random_covering_lp(seed: int) -> LinearProgram:
    rng = random.Random(seed)
    n = rng.randint(2, 5)
    m = rng.randint(1, 5)
    A = np.zeros((m, n))
    for i in range(m):
        for j in rng.sample(range(n), rng.randint(1, n)):
            A[i, j] = 1.0
    c = np.array([rng.choice([1.0, 1.0, 2.0, 0.5]) for _ in range(n)])
    return LinearProgram(c, A, np.ones(m))


class TestSolve(unittest.TestCase):
    def test_triangle_cover(self):
        lp = LinearProgram(
            c=np.ones(3),
            A=np.array([[1, 0, 1], [1, 1, 0], [0, 1, 1]]),
            b=np.ones(3),
        )
        solution = solve(lp)
        self.assertEqual(solution.status, LpStatus.OPTIMAL)
        self.assertAlmostEqual(solution.objective, 1.5)
        np.testing.assert_allclose(solution.x, [0.5, 0.5, 0.5], atol=1e-9)

    def test_triangle_duals(self):
        lp = LinearProgram(
            c=np.ones(3),
            A=np.array([[1, 0, 1], [1, 1, 0], [0, 1, 1]]),
            b=np.ones(3),
            upper=np.full(3, np.inf),
        )
        solution = solve(lp)
        np.testing.assert_allclose(solution.duals, [0.5, 0.5, 0.5], atol=1e-9)
        self.assertAlmostEqual(float(lp.b @ solution.duals), solution.objective)

    def test_infeasible(self):
        lp = LinearProgram(c=np.ones(2), A=np.array([[0.0, 0.0]]), b=np.ones(1))
        self.assertEqual(solve(lp).status, LpStatus.INFEASIBLE)

    def test_infeasible_by_upper_bound(self):
        lp = LinearProgram(c=np.ones(1), A=np.array([[1.0]]), b=np.array([2.0]))
        self.assertEqual(solve(lp).status, LpStatus.INFEASIBLE)

    def test_bound_flip_without_rows(self):
        lp = LinearProgram(c=np.array([-1.0, -2.0]), A=np.zeros((0, 2)), b=np.zeros(0))
        solution = solve(lp)
        self.assertAlmostEqual(solution.objective, -3.0)
        np.testing.assert_allclose(solution.x, [1.0, 1.0])

    def test_negative_rhs(self):
        # x1 + x2 <= 1 written as -x1 - x2 >= -1
        lp = LinearProgram(
            c=np.array([-1.0, -1.0]), A=np.array([[-1.0, -1.0]]), b=np.array([-1.0])
        )
        self.assertAlmostEqual(solve(lp).objective, -1.0)

    def test_unbounded(self):
        lp = LinearProgram(
            c=np.array([-1.0]),
            A=np.array([[1.0]]),
            b=np.array([0.0]),
            upper=np.array([np.inf]),
        )
        with self.assertRaises(LinearProgramError):
            solve(lp)

    def test_matches_vertex_enumeration(self):
        for seed in range(100):
            lp = _random_covering_lp(seed)
            solution = solve(lp)
            expected = _vertex_enumeration(lp)
            self.assertEqual(solution.status, LpStatus.OPTIMAL, seed)
            self.assertAlmostEqual(solution.objective, expected, places=7, msg=seed)
            self.assertTrue(np.all(lp.A @ solution.x >= lp.b - 1e-7), seed)


class TestLinearProgram(unittest.TestCase):
    def test_default_upper(self):
        lp = LinearProgram(c=[1, 1], A=[[1, 1]], b=[1])
        np.testing.assert_array_equal(lp.upper, [1.0, 1.0])
        self.assertEqual((lp.num_variables, lp.num_rows), (2, 1))

    def test_shape_mismatch(self):
        with self.assertRaises(LinearProgramError):
            LinearProgram(c=[1, 1], A=[[1, 1, 1]], b=[1])
        with self.assertRaises(LinearProgramError):
            LinearProgram(c=[1, 1], A=[[1, 1]], b=[1, 2])

    def test_non_finite(self):
        with self.assertRaises(LinearProgramError):
            LinearProgram(c=[1, np.nan], A=[[1, 1]], b=[1])


if __name__ == "__main__":
    unittest.main()
