# ruff: noqa: F403, F405

import time
import unittest
from itertools import combinations
from unittest.mock import patch

from callee import Contains

from cfa_hypertree.decomp import Kind, check_ghd
from cfa_hypertree.frac import brute_force_fhw, simple_improve
from cfa_hypertree.ghdsearch import (
    METHODS,
    SubedgeCapExceeded,
    brute_force_ghw,
    decide_ghw,
    decide_ghw_balsep,
    decide_ghw_global,
    decide_ghw_local,
    is_balanced_separator,
    portfolio_ghw,
    subedge_closure_global,
)
from cfa_hypertree.hdsearch import RunOutcome, Status, brute_force_hw, decide_hw
from cfa_hypertree.hgcore import SubproblemContext
from tests.fake_hypergraphs import *


def _fake_member(status, wait_for_stop=False, method="fake"):
    def member(hypergraph, k, timeout=None, cap=None, stop_event=None, seed=None):
        if wait_for_stop:
            stop_event.wait(5)
        return RunOutcome(status, elapsed_ms=1, method=method)

    return member


def _failing_member(hypergraph, k, **kwargs):
    raise SubedgeCapExceeded(1)


class TestSubedgeClosure(unittest.TestCase):
    def test_pairwise_intersections(self):
        hg = fake_hypergraph(FAKE_SUBEDGES)
        closure = subedge_closure_global(hg, 1)
        self.assertFalse(closure.cap_exceeded)
        self.assertEqual(
            sorted(closure.subedges),
            sorted([(hg.vertex_mask(["c"]), 0), (hg.vertex_mask(["b"]), 0)]),
        )

    def test_disjoint_edges(self):
        hg = fake_hypergraph(FAKE_DISJOINT)
        for k in (1, 2, 3):
            self.assertEqual(len(subedge_closure_global(hg, k)), 0)

    def test_all_subsets_of_intersection(self):
        hg = fake_hypergraph(FAKE_SHARED_PAIR)
        closure = subedge_closure_global(hg, 1)
        self.assertEqual(
            closure.masks,
            {
                hg.vertex_mask(["a"]),
                hg.vertex_mask(["X"]),
                hg.vertex_mask(["a", "X"]),
            },
        )

    @patch("cfa_hypertree.ghdsearch.logger")
    def test_cap(self, mock_logger):
        hg = fake_hypergraph(FAKE_SUBEDGES)
        closure = subedge_closure_global(hg, 1, cap=1)
        self.assertTrue(closure.cap_exceeded)
        self.assertEqual(len(closure), 1)
        mock_logger.warning.assert_called_with(Contains("stopped at the cap of 1"))


class TestBalancedSeparator(unittest.TestCase):
    def _label(self, hg, *names):
        return sum(1 << hg.edge_id(n) for n in names)

    def test_four_cycle(self):
        hg = fake_hypergraph(FAKE_FOUR_CYCLE)
        ctx = SubproblemContext(hg, hg.all_edges)
        self.assertFalse(is_balanced_separator(ctx, self._label(hg, "ab")))
        self.assertTrue(is_balanced_separator(ctx, self._label(hg, "ab", "cd")))

    def test_path(self):
        hg = fake_hypergraph(FAKE_LONG_PATH)
        ctx = SubproblemContext(hg, hg.all_edges)
        self.assertTrue(is_balanced_separator(ctx, self._label(hg, "bc")))
        self.assertFalse(is_balanced_separator(ctx, self._label(hg, "ab")))

    def test_special_edges_connect(self):
        hg = fake_hypergraph(FAKE_LONG_PATH)
        # {a,e} glues both ends into one component around c
        ctx = SubproblemContext(hg, hg.all_edges, (hg.vertex_mask(["a", "e"]),))
        self.assertFalse(is_balanced_separator(ctx, self._label(hg, "cd")))


class TestDeciders(unittest.TestCase):
    def test_triangle(self):
        hg = fake_hypergraph(FAKE_TRIANGLE)
        for decider in (decide_ghw_global, decide_ghw_local, decide_ghw_balsep):
            self.assertEqual(decider(hg, 1).status, Status.NO, decider.__name__)
            outcome = decider(hg, 2)
            self.assertEqual(outcome.status, Status.YES, decider.__name__)
            self.assertEqual(outcome.decomposition.kind, Kind.GHD)
            self.assertIs(outcome.decomposition.hypergraph, hg)
            self.assertEqual(check_ghd(hg, outcome.decomposition), [])

    def test_four_cycle_balsep(self):
        hg = fake_hypergraph(FAKE_FOUR_CYCLE)
        self.assertEqual(decide_ghw_balsep(hg, 1).status, Status.NO)
        outcome = decide_ghw_balsep(hg, 2)
        self.assertEqual(outcome.status, Status.YES)
        self.assertEqual(outcome.method, "balsep")
        self.assertEqual(outcome.decomposition.width(), 2)
        self.assertEqual(check_ghd(hg, outcome.decomposition), [])

    def test_disjoint_edges(self):
        hg = fake_hypergraph(FAKE_DISJOINT)
        for decider in METHODS.values():
            outcome = decider(hg, 1)
            self.assertEqual(outcome.status, Status.YES)
            self.assertEqual(check_ghd(hg, outcome.decomposition), [])

    def test_ring_balsep_no_is_fast(self):
        hg = fake_hypergraph(FAKE_RING)
        started = time.monotonic()
        outcome = decide_ghw_balsep(hg, 1)
        self.assertEqual(outcome.status, Status.NO)
        self.assertLess(time.monotonic() - started, 1.0)

    def test_plain_balsep(self):
        hg = fake_hypergraph(FAKE_FOUR_CYCLE)
        outcome = decide_ghw_balsep(hg, 1, plain=True)
        self.assertEqual(outcome.status, Status.UNKNOWN)
        self.assertEqual(outcome.message, "no balanced separator without subedges")
        self.assertEqual(decide_ghw_balsep(hg, 2, plain=True).status, Status.YES)

    @patch("cfa_hypertree.ghdsearch.logger")
    def test_cap_exceeded(self, mock_logger):
        hg = fake_hypergraph(FAKE_SUBEDGES)
        for decider in METHODS.values():
            with self.assertRaises(SubedgeCapExceeded):
                decider(hg, 1, cap=1)

    def test_hw_yes_implies_ghw_yes(self):
        for seed in range(20):
            hg = random_hypergraph(seed)
            for k in (1, 2):
                if decide_hw(hg, k).status == Status.YES:
                    self.assertEqual(decide_ghw_global(hg, k).status, Status.YES)

    def test_agrees_with_brute_force(self):
        for seed in range(100):
            hg = random_hypergraph(seed)
            ghw = brute_force_ghw(hg)
            for k in (1, 2, 3):
                expected = Status.YES if ghw <= k else Status.NO
                for name, decider in METHODS.items():
                    outcome = decider(hg, k, seed=seed)
                    self.assertEqual(outcome.status, expected, (hg.name, k, name))
                    if outcome.status == Status.YES:
                        self.assertEqual(check_ghd(hg, outcome.decomposition), [])

    def test_local_agrees_with_global(self):
        for seed in range(100):
            hg = random_hypergraph(seed, max_edges=7, max_vertices=9)
            for k in (1, 2, 3):
                local = decide_ghw_local(hg, k, seed=seed)
                self.assertEqual(
                    local.status, decide_ghw_global(hg, k, seed=seed).status, (hg.name, k)
                )
                if local.status == Status.YES:
                    self.assertEqual(check_ghd(hg, local.decomposition), [])

    def test_dispatch(self):
        hg = fake_hypergraph(FAKE_TRIANGLE)
        self.assertEqual(decide_ghw(hg, 2, "local").method, "local")
        with self.assertRaises(ValueError):
            decide_ghw(hg, 2, "nope")


class TestPortfolio(unittest.TestCase):
    def test_real_members(self):
        hg = fake_hypergraph(FAKE_FOUR_CYCLE)
        outcome = portfolio_ghw(hg, 2)
        self.assertEqual(outcome.status, Status.YES)
        self.assertIn(outcome.method, METHODS)
        self.assertEqual(check_ghd(hg, outcome.decomposition), [])
        self.assertEqual(portfolio_ghw(hg, 1).status, Status.NO)

    @patch.dict(
        "cfa_hypertree.ghdsearch.METHODS",
        {
            "global": _fake_member(Status.TIMEOUT, wait_for_stop=True, method="global"),
            "balsep": _fake_member(Status.NO, method="balsep"),
        },
        clear=True,
    )
    def test_first_definite_answer_wins(self):
        outcome = portfolio_ghw(
            fake_hypergraph(FAKE_TRIANGLE), 1, methods=("global", "balsep")
        )
        self.assertEqual(outcome.status, Status.NO)
        self.assertEqual(outcome.method, "balsep")

    @patch.dict(
        "cfa_hypertree.ghdsearch.METHODS",
        {
            "global": _fake_member(Status.TIMEOUT),
            "local": _fake_member(Status.TIMEOUT),
            "balsep": _fake_member(Status.TIMEOUT),
        },
        clear=True,
    )
    def test_all_time_out(self):
        outcome = portfolio_ghw(fake_hypergraph(FAKE_TRIANGLE), 1)
        self.assertEqual(outcome.status, Status.TIMEOUT)
        self.assertEqual(outcome.method, "portfolio")

    @patch("cfa_hypertree.ghdsearch.logger")
    @patch.dict(
        "cfa_hypertree.ghdsearch.METHODS",
        {
            "global": _failing_member,
            "local": _failing_member,
            "balsep": _failing_member,
        },
        clear=True,
    )
    def test_all_fail(self, mock_logger):
        outcome = portfolio_ghw(fake_hypergraph(FAKE_TRIANGLE), 1)
        self.assertEqual(outcome.status, Status.ERROR)
        self.assertIn("subedge generation exceeded the cap of 1", outcome.message)
        mock_logger.warning.assert_called_with(Contains("failed on H"))

    def test_cap_makes_every_member_fail(self):
        outcome = portfolio_ghw(fake_hypergraph(FAKE_SUBEDGES), 1, cap=1)
        self.assertEqual(outcome.status, Status.ERROR)


class TestBruteForceGhw(unittest.TestCase):
    def test_examples(self):
        self.assertEqual(brute_force_ghw(fake_hypergraph(FAKE_TRIANGLE)), 2)
        self.assertEqual(brute_force_ghw(fake_hypergraph(FAKE_SINGLE_EDGE)), 1)
        self.assertEqual(brute_force_ghw(fake_hypergraph(FAKE_FOUR_CYCLE)), 2)
        self.assertEqual(brute_force_ghw(fake_hypergraph(FAKE_PATH)), 1)

    def test_too_large(self):
        with self.assertRaises(ValueError):
            brute_force_ghw(fake_hypergraph(FAKE_RING))


class TestWidthRelations(unittest.TestCase):
    def test_small_hw_equals_ghw(self):
        for seed in range(60):
            hg = random_hypergraph(seed)
            hw = brute_force_hw(hg)
            if hw <= 2:
                self.assertEqual(brute_force_ghw(hg), hw, hg.name)
                if hw == 2:
                    self.assertEqual(decide_ghw_global(hg, 1).status, Status.NO, hg.name)

    def test_width_chain(self):
        for seed in range(40):
            hg = random_hypergraph(seed)
            hw = brute_force_hw(hg)
            ghw = brute_force_ghw(hg)
            fhw = brute_force_fhw(hg)
            self.assertLessEqual(fhw, ghw, hg.name)
            self.assertLessEqual(ghw, hw, hg.name)
            self.assertLessEqual(hw, 3 * ghw + 1, hg.name)
            improved = simple_improve(hg, decide_ghw_global(hg, ghw).decomposition)
            self.assertGreaterEqual(improved.width(), fhw, hg.name)
            self.assertLessEqual(improved.width(), ghw, hg.name)

    def test_balanced_separator_within_ghw(self):
        for seed in range(20):
            hg = random_hypergraph(seed)
            ghw = brute_force_ghw(hg)
            ctx = SubproblemContext(hg, hg.all_edges)
            labels = (
                sum(1 << e for e in chosen)
                for size in range(1, ghw + 1)
                for chosen in combinations(range(hg.num_edges), size)
            )
            self.assertTrue(
                any(is_balanced_separator(ctx, label) for label in labels), hg.name
            )


if __name__ == "__main__":
    unittest.main()
