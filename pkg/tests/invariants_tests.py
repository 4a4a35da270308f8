# ruff: noqa: F403, F405

import unittest
from itertools import combinations
from unittest.mock import MagicMock, patch

from callee import Contains

from cfa_hypertree.helpers import SearchTimeout
from cfa_hypertree.invariants import (
    StatsRecord,
    VcResult,
    brute_force_vc_dimension,
    degree,
    intersection_width,
    multi_intersection_width,
    stats,
    vc_dimension,
)
from tests.fake_hypergraphs import *

FAKE_STAR = "e1(c,a,b), e2(c,a,d), e3(c,a,e), e4(c,b,d), e5(x,y)."


def _edge_sets(hg) -> list[frozenset]:
    return [frozenset(v for v in range(hg.num_vertices) if e >> v & 1) for e in hg.edges]


def _common_size(chosen) -> int:
    return len(frozenset.intersection(*chosen))


def _shatter_size(edge_sets, num_vertices) -> int:
    best = 0
    for size in range(1, num_vertices + 1):
        if not any(
            len({e & frozenset(subset) for e in edge_sets}) == 2**size
            for subset in combinations(range(num_vertices), size)
        ):
            break
        best = size
    return best


class TestInvariants(unittest.TestCase):
    def test_triangle_stats(self):
        record = stats(fake_hypergraph(FAKE_TRIANGLE))
        self.assertEqual(record.as_tuple(), (3, 3, 2, 2, 1, 0, 0, 1))

    def test_single_edge_stats(self):
        hg = fake_hypergraph(FAKE_SINGLE_EDGE)
        record = stats(hg)
        self.assertEqual(
            record.as_tuple(), (3, 1, 3, 1, 0, 0, 0, brute_force_vc_dimension(hg))
        )

    def test_degree(self):
        self.assertEqual(degree(fake_hypergraph(FAKE_STAR)), 4)
        self.assertEqual(degree(fake_hypergraph(FAKE_DISJOINT)), 1)

    def test_intersection_widths(self):
        hg = fake_hypergraph(FAKE_STAR)
        self.assertEqual(intersection_width(hg), 2)
        self.assertEqual(multi_intersection_width(hg, 2), 2)
        self.assertEqual(multi_intersection_width(hg, 3), 2)
        self.assertEqual(multi_intersection_width(hg, 4), 1)
        self.assertEqual(multi_intersection_width(hg, 6), 0)

    def test_intersection_width_disjoint(self):
        self.assertEqual(intersection_width(fake_hypergraph(FAKE_DISJOINT)), 0)

    @patch("cfa_hypertree.invariants.logger")
    def test_multi_intersection_width_needs_two(self, mock_logger):
        with self.assertRaises(ValueError):
            multi_intersection_width(fake_hypergraph(FAKE_TRIANGLE), 1)
        mock_logger.error.assert_called_with("Multi-intersection width needs c >= 2, got 1.")

    def test_widths_are_monotone(self):
        for seed in range(30):
            hg = random_hypergraph(seed)
            record = stats(hg)
            self.assertGreaterEqual(record.iwidth, record.miwidth3)
            self.assertGreaterEqual(record.miwidth3, record.miwidth4)
            self.assertEqual(record.iwidth, multi_intersection_width(hg, 2))


class TestVcDimension(unittest.TestCase):
    def test_matches_brute_force(self):
        for seed in range(40):
            hg = random_hypergraph(seed)
            result = vc_dimension(hg)
            self.assertTrue(result.exact)
            self.assertEqual(result.value, brute_force_vc_dimension(hg), hg.name)

    def test_shattered_pair(self):
        hg = fake_hypergraph("n(z), a(x,z), b(y,z), ab(x,y,z).")
        self.assertEqual(vc_dimension(hg).value, 2)

    @patch("cfa_hypertree.invariants.logger")
    @patch("cfa_hypertree.invariants.Deadline")
    def test_budget_exhausted(self, mock_deadline, mock_logger):
        mock_deadline.return_value.tick = MagicMock(side_effect=SearchTimeout("search exceeded its time budget"))
        result = vc_dimension(fake_hypergraph(FAKE_TRIANGLE), time_budget=0.1)
        self.assertEqual(result, VcResult(0, exact=False))
        self.assertEqual(str(result), "≥0")
        mock_logger.warning.assert_called_with(Contains("reporting lower bound 0"))

    def test_as_dict_marks_lower_bound(self):
        record = StatsRecord(3, 3, 2, 2, 1, 0, 0, VcResult(2, exact=False))
        self.assertEqual(record.as_dict()["vc"], "≥2")
        self.assertEqual(record.as_dict()["bip"], 1)


class TestAgainstSetArithmetic(unittest.TestCase):
    def _hypergraphs(self):
        for seed in range(100):
            yield random_hypergraph(seed, max_edges=8, max_vertices=12, max_arity=6)

    def test_intersection_widths(self):
        for hg in self._hypergraphs():
            edge_sets = _edge_sets(hg)
            for c in (2, 3, 4):
                expected = max(
                    (_common_size(chosen) for chosen in combinations(edge_sets, c)),
                    default=0,
                )
                self.assertEqual(multi_intersection_width(hg, c), expected, (hg.name, c))
            self.assertEqual(intersection_width(hg), multi_intersection_width(hg, 2), hg.name)

    def test_vc_dimension(self):
        for hg in self._hypergraphs():
            expected = _shatter_size(_edge_sets(hg), hg.num_vertices)
            result = vc_dimension(hg)
            self.assertTrue(result.exact)
            self.assertEqual(result.value, expected, hg.name)
            self.assertEqual(brute_force_vc_dimension(hg), expected, hg.name)


if __name__ == "__main__":
    unittest.main()
