# ruff: noqa: F403, F405

import os
import tempfile
import unittest
from unittest.mock import patch

from callee import Contains

import cfa_hypertree.hgcore
from cfa_hypertree.frac import brute_force_fhw
from cfa_hypertree.ghdsearch import brute_force_ghw
from cfa_hypertree.hdsearch import brute_force_hw
from cfa_hypertree.hgcore import (
    HypergraphError,
    HypergraphSyntaxError,
    connected_components,
    cq_to_hypergraph,
    gyo_acyclic,
    induced_subproblem,
    parse_hypergraph,
    read_instance,
    serialize_hypergraph,
    simplify,
)
from tests.fake_hypergraphs import *


class TestParse(unittest.TestCase):
    def test_parse_two_edges(self):
        hg = parse_hypergraph("e1(A,B),\ne2(B,C).")
        self.assertEqual(hg.num_vertices, 3)
        self.assertEqual(hg.num_edges, 2)
        self.assertEqual(hg.edge_vertex_names(0), ["A", "B"])
        self.assertEqual(hg.vertices, ("A", "B", "C"))

    def test_parse_skips_comments(self):
        hg = parse_hypergraph("% c\n e(X).")
        self.assertEqual(hg.num_edges, 1)
        self.assertEqual(hg.edge_vertex_names(0), ["X"])

    def test_parse_without_final_dot(self):
        hg = parse_hypergraph("a(x, y) , b(y,z)")
        self.assertEqual(hg.edge_names, ("a", "b"))

    @patch("cfa_hypertree.hgcore.logger")
    def test_parse_duplicate_edge(self, mock_logger):
        with self.assertRaises(HypergraphError) as exc:
            parse_hypergraph("e1(A,B), e1(C).")
        self.assertIn("duplicate edge name e1", str(exc.exception))
        mock_logger.error.assert_called_with(Contains("Duplicate edge name e1"))

    @patch("cfa_hypertree.hgcore.logger")
    def test_parse_empty_edge(self, mock_logger):
        with self.assertRaises(HypergraphError) as exc:
            parse_hypergraph("e1(A,B),\ne2().")
        self.assertIn("empty edge e2 (line 2", str(exc.exception))

    @patch("cfa_hypertree.hgcore.logger")
    def test_parse_syntax_error_position(self, mock_logger):
        with self.assertRaises(HypergraphSyntaxError) as exc:
            parse_hypergraph("e1(A,B)\ne2(C).")
        self.assertEqual(exc.exception.line, 2)
        self.assertEqual(exc.exception.column, 1)
        mock_logger.error.assert_called_with(Contains("line 2, column 1"))

    @patch("cfa_hypertree.hgcore.logger")
    def test_parse_empty_text(self, mock_logger):
        with self.assertRaises(HypergraphSyntaxError):
            parse_hypergraph("% nothing here\n")

    def test_repeated_vertex_collapsed(self):
        hg = parse_hypergraph("e(A,A,B).")
        self.assertEqual(hg.edge_vertex_names(0), ["A", "B"])

    def test_serialize_then_parse(self):
        for text in (FAKE_TRIANGLE, FAKE_RING, FAKE_SUBEDGES):
            hg = parse_hypergraph(text)
            again = parse_hypergraph(serialize_hypergraph(hg))
            self.assertEqual(hg, again)

    def test_serialize_normalizes_names(self):
        hg = cfa_hypertree.hgcore.Hypergraph.from_edges("H", [("r x", ["a/b", "c"])])
        self.assertEqual(serialize_hypergraph(hg), "r_x(a_b,c).\n")

    def test_read_instance_by_suffix(self):
        with tempfile.TemporaryDirectory() as tmp:
            hg_path = os.path.join(tmp, "tri.hg")
            cq_path = os.path.join(tmp, "query.cq")
            with open(hg_path, "w") as f:
                f.write(FAKE_TRIANGLE)
            with open(cq_path, "w") as f:
                f.write(FAKE_CQ_TRIANGLE)
            self.assertEqual(read_instance(hg_path).name, "tri")
            query = read_instance(cq_path)
            self.assertEqual(query.name, "query")
            self.assertEqual(query.num_edges, 3)


class TestCq(unittest.TestCase):
    def test_two_atoms(self):
        hg = cq_to_hypergraph("r(X,Y), s(Y,Z)")
        self.assertEqual(hg.edge_vertex_names(0), ["X", "Y"])
        self.assertEqual(hg.edge_vertex_names(1), ["Y", "Z"])

    def test_constants_dropped(self):
        hg = cq_to_hypergraph(FAKE_CQ_CONSTANTS)
        self.assertEqual(hg.num_edges, 1)
        self.assertEqual(hg.edge_vertex_names(0), ["X"])
        self.assertNotIn("c1", hg.vertices)

    def test_triangle_query(self):
        hg = cq_to_hypergraph(FAKE_CQ_TRIANGLE)
        self.assertEqual(hg.num_edges, 3)
        self.assertFalse(gyo_acyclic(hg))

    def test_separators_and_head(self):
        hg = cq_to_hypergraph("ans(X) :- r(X,?y) ∧ r(?y,'Const')\nAND s(X, 42).")
        self.assertEqual(hg.edge_names, ("r", "r_2", "s"))
        self.assertEqual(hg.vertex_names(hg.all_vertices), ["X", "?y"])

    def test_variable_free_atoms_dropped(self):
        hg = cq_to_hypergraph("r(a,b), s(X)")
        self.assertEqual(hg.edge_names, ("s",))

    @patch("cfa_hypertree.hgcore.logger")
    def test_no_variables(self, mock_logger):
        with self.assertRaises(HypergraphError):
            cq_to_hypergraph("r(a,b), s(c)")
        mock_logger.error.assert_called_with("Query has no variables.")

    @patch("cfa_hypertree.hgcore.logger")
    def test_garbage(self, mock_logger):
        with self.assertRaises(HypergraphSyntaxError):
            cq_to_hypergraph("r(X,Y) ; s(Y)")


class TestComponents(unittest.TestCase):
    def test_four_cycle_minus_ab(self):
        hg = parse_hypergraph(FAKE_FOUR_CYCLE)
        parts = connected_components(hg, hg.vertex_mask(["a", "b"]))
        self.assertEqual(parts, [hg.vertex_mask(["c", "d"])])

    def test_nothing_excluded(self):
        hg = parse_hypergraph(FAKE_FOUR_CYCLE)
        self.assertEqual(connected_components(hg, 0), [hg.all_vertices])

    def test_path_split(self):
        hg = parse_hypergraph(FAKE_PATH)
        parts = connected_components(hg, hg.vertex_mask(["b", "c"]))
        self.assertEqual(parts, [hg.vertex_mask(["a"]), hg.vertex_mask(["d"])])

    def test_partition_property(self):
        for seed in range(30):
            hg = random_hypergraph(seed)
            excluded = hg.all_vertices & (0b1010 << (seed % 3))
            parts = connected_components(hg, excluded)
            union = 0
            for part in parts:
                self.assertEqual(union & part, 0)
                union |= part
            self.assertEqual(union, hg.all_vertices & ~excluded)
            for e in hg.edges:
                touched = [p for p in parts if e & ~excluded & p]
                self.assertLessEqual(len(touched), 1)


class TestInducedSubproblem(unittest.TestCase):
    def test_four_cycle(self):
        hg = parse_hypergraph(FAKE_FOUR_CYCLE)
        sep = hg.vertex_mask(["a", "b"])
        component = hg.vertex_mask(["c", "d"])
        ctx = induced_subproblem(hg, [], component, sep)
        expected = sum(1 << hg.edge_id(n) for n in ("bc", "cd", "da"))
        self.assertEqual(ctx.edges, expected)
        self.assertEqual(ctx.specials, (sep,))
        self.assertEqual(ctx.vertices, hg.all_vertices)

    def test_specials_filtered(self):
        hg = parse_hypergraph(FAKE_LONG_PATH)
        far = hg.vertex_mask(["a"])
        near = hg.vertex_mask(["d", "e"])
        sep = hg.vertex_mask(["b", "c"])
        ctx = induced_subproblem(hg, [far, near], hg.vertex_mask(["d", "e"]), sep)
        self.assertEqual(ctx.specials, (near, sep))

    def test_edge_scope(self):
        hg = parse_hypergraph(FAKE_FOUR_CYCLE)
        scope = 1 << hg.edge_id("cd")
        ctx = induced_subproblem(
            hg, [], hg.vertex_mask(["c", "d"]), hg.vertex_mask(["a", "b"]), edges=scope
        )
        self.assertEqual(ctx.edges, scope)


class TestGyo(unittest.TestCase):
    def test_examples(self):
        self.assertTrue(gyo_acyclic(parse_hypergraph(FAKE_SINGLE_EDGE)))
        self.assertFalse(gyo_acyclic(parse_hypergraph(FAKE_TRIANGLE)))
        self.assertTrue(gyo_acyclic(parse_hypergraph(FAKE_PATH)))
        self.assertFalse(gyo_acyclic(parse_hypergraph(FAKE_FOUR_CYCLE)))
        self.assertTrue(gyo_acyclic(parse_hypergraph(FAKE_DISJOINT)))

    def test_triangle_with_cover_edge(self):
        self.assertTrue(gyo_acyclic(parse_hypergraph(FAKE_TRIANGLE[:-1] + ", abc(a,b,c).")))

    def test_matches_hw_one(self):
        for seed in range(40):
            hg = random_hypergraph(seed)
            self.assertEqual(gyo_acyclic(hg), brute_force_hw(hg) == 1, hg.name)


class TestSimplify(unittest.TestCase):
    @patch("cfa_hypertree.hgcore.logger")
    def test_dominated_edges(self, mock_logger):
        hg = parse_hypergraph(FAKE_DOMINATED)
        reduced = simplify(hg)
        self.assertTrue(reduced.changed)
        self.assertEqual(reduced.hypergraph.edge_names, ("abc",))
        self.assertEqual(reduced.absorbed, {0: 2, 1: 2})
        mock_logger.debug.assert_called_with(Contains("3 -> 1 edges"))

    def test_unchanged(self):
        for text in (FAKE_TRIANGLE, "ab(a,b), bc(b,c)."):
            hg = parse_hypergraph(text)
            reduced = simplify(hg)
            self.assertFalse(reduced.changed)
            self.assertIs(reduced.hypergraph, hg)

    def test_duplicates_keep_first(self):
        hg = parse_hypergraph("x(a,b), y(b,a), z(b,c).")
        reduced = simplify(hg)
        self.assertEqual(reduced.hypergraph.edge_names, ("x", "z"))
        self.assertEqual(reduced.kept, (0, 2))

    def test_widths_preserved(self):
        for seed in range(40):
            hg = random_hypergraph(seed)
            reduced = simplify(hg).hypergraph
            self.assertEqual(brute_force_hw(hg), brute_force_hw(reduced), hg.name)
            self.assertEqual(brute_force_ghw(hg), brute_force_ghw(reduced), hg.name)
            self.assertEqual(brute_force_fhw(hg), brute_force_fhw(reduced), hg.name)

    def test_fractional_width_preserved_with_dominated_edges(self):
        texts = (
            FAKE_DOMINATED,
            "ab(a,b), bc(b,c), ca(c,a), ab2(b,a), bc2(c,b).",
            "abcd(a,b,c,d), ab(a,b), cd(c,d).",
        )
        for text in texts:
            hg = parse_hypergraph(text)
            reduced = simplify(hg)
            self.assertTrue(reduced.changed)
            self.assertEqual(brute_force_fhw(hg), brute_force_fhw(reduced.hypergraph), text)


class TestAugment(unittest.TestCase):
    def test_subedge_names_and_parents(self):
        hg = parse_hypergraph(FAKE_SUBEDGES)
        augmented = hg.augment([(hg.vertex_mask(["c"]), 0), (hg.vertex_mask(["b"]), 0)])
        self.assertEqual(augmented.edge_names[3:], ("abc.sub1", "abc.sub2"))
        self.assertEqual(augmented.base_edge(4), 0)
        self.assertIs(augmented.root_hypergraph(), hg)
        self.assertTrue(augmented.is_augmented)


if __name__ == "__main__":
    unittest.main()
