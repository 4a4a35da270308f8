"""Decomposition data model, width computation and validators.

A decomposition is a rooted tree of nodes, each carrying a bag (vertex
mask) and a cover (edge index -> weight). HD and GHD covers are integral
(every weight is exactly 1); FHD covers take weights in [0, 1].
"""

import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Iterable

import networkx as nx

from cfa_hypertree.helpers import (
    HypertreeError,
    format_weight,
    iter_bits,
    snap_fraction,
)
from cfa_hypertree.hgcore import Hypergraph, VertexSet, normalize_name

logger = logging.getLogger(__name__)

# coverage slack for sums of snapped rationals
COVER_SLACK = Fraction(1, 10**6)

_NODE_RE = re.compile(
    r"node\s+(?P<id>\S+)\s+parent=(?P<parent>\S+)\s+"
    r"bag=\{(?P<bag>[^}]*)\}\s+cover=\{(?P<cover>[^}]*)\}"
)
_KIND_RE = re.compile(r"kind\s+(?P<kind>HD|GHD|FHD)")


class DecompositionError(HypertreeError, ValueError):
    """Raised for malformed decompositions."""


class Kind(str, Enum):
    HD = "HD"
    GHD = "GHD"
    FHD = "FHD"


@dataclass(frozen=True)
class EdgeCover:
    """Weighted edge selection.

    Args:
        weights (dict[int, Fraction]): edge index -> weight, zero weights omitted
        covered (int): vertex mask B(γ) of vertices with total weight >= 1
        weight (Fraction): sum of all weights
    """

    weights: dict
    covered: VertexSet
    weight: Fraction

    @classmethod
    def from_weights(cls, hypergraph: Hypergraph, weights: dict) -> "EdgeCover":
        clean = {
            int(e): snap_fraction(w) for e, w in weights.items() if w != 0
        }
        load: dict[int, Fraction] = {}
        for e, w in clean.items():
            for v in iter_bits(hypergraph.edges[e]):
                load[v] = load.get(v, Fraction(0)) + w
        covered = 0
        for v, total in load.items():
            if total >= 1 - COVER_SLACK:
                covered |= 1 << v
        return cls(clean, covered, sum(clean.values(), Fraction(0)))

    @classmethod
    def integral(cls, hypergraph: Hypergraph, edges: Iterable[int]) -> "EdgeCover":
        edges = list(edges)
        weights = {e: Fraction(1) for e in edges}
        covered = 0
        for e in edges:
            covered |= hypergraph.edges[e]
        return cls(weights, covered, Fraction(len(weights)))

    @property
    def is_integral(self) -> bool:
        return all(w == 1 for w in self.weights.values())


@dataclass
class DecompNode:
    id: str
    parent: str | None
    bag: VertexSet
    cover: dict = field(default_factory=dict)

    @property
    def weight(self) -> Fraction:
        return sum(self.cover.values(), Fraction(0))


@dataclass(frozen=True)
class Violation:
    """One failed decomposition condition.

    Args:
        condition (str): "tree", "1", "2", "3", "3'" or "4"
        node (str): offending node id, None for tree-wide problems
        witness (str): offending edge or vertex name
        message (str): human readable description
    """

    condition: str
    node: str | None
    witness: str
    message: str


class Decomposition:
    """Rooted decomposition tree over a (possibly augmented) hypergraph.

    Args:
        hypergraph (Hypergraph): hypergraph the bags and covers refer to
        kind (Kind): HD, GHD or FHD
        nodes (Iterable[DecompNode]): the nodes; exactly one has parent None
    """

    def __init__(
        self,
        hypergraph: Hypergraph,
        kind: Kind,
        nodes: Iterable[DecompNode],
    ):
        self.hypergraph = hypergraph
        self.kind = Kind(kind)
        self.nodes: dict[str, DecompNode] = {}
        for node in nodes:
            if node.id in self.nodes:
                logger.error(f"Duplicate node id {node.id}.")
                raise DecompositionError(f"duplicate node id {node.id}")
            self.nodes[node.id] = node
        for node in self.nodes.values():
            if node.parent is not None and node.parent not in self.nodes:
                logger.error(
                    f"Node {node.id} references missing parent {node.parent}."
                )
                raise DecompositionError(
                    f"node {node.id} has dangling parent {node.parent}"
                )
            for e in node.cover:
                if not 0 <= e < hypergraph.num_edges:
                    raise DecompositionError(
                        f"node {node.id} covers unknown edge index {e}"
                    )

    def __len__(self) -> int:
        return len(self.nodes)

    def __repr__(self) -> str:
        return f"Decomposition({self.kind.value}, nodes={len(self.nodes)}, width={self.width() if self.nodes else '-'})"

    @property
    def tree(self) -> nx.DiGraph:
        """parent -> child digraph of the node ids"""
        graph = nx.DiGraph()
        graph.add_nodes_from(self.nodes)
        graph.add_edges_from(
            (n.parent, n.id) for n in self.nodes.values() if n.parent is not None
        )
        return graph

    @property
    def roots(self) -> list[str]:
        return [n.id for n in self.nodes.values() if n.parent is None]

    @property
    def root(self) -> str:
        roots = self.roots
        if len(roots) != 1:
            raise DecompositionError(f"expected one root, found {len(roots)}")
        return roots[0]

    def is_tree(self) -> bool:
        return bool(self.nodes) and nx.is_arborescence(self.tree)

    def width(self) -> Fraction:
        """maximum cover weight over all nodes"""
        if not self.nodes:
            logger.error("Width of an empty decomposition requested.")
            raise DecompositionError("empty decomposition has no width")
        return max(n.weight for n in self.nodes.values())

    def cover_of(self, node_id: str) -> EdgeCover:
        return EdgeCover.from_weights(self.hypergraph, self.nodes[node_id].cover)

    def children(self, node_id: str) -> list[str]:
        return [n.id for n in self.nodes.values() if n.parent == node_id]

    def subtree_vertices(self) -> dict[str, VertexSet]:
        """V(T_u) for every node u"""
        graph = self.tree
        union: dict[str, VertexSet] = {}
        for u in nx.dfs_postorder_nodes(graph, self.root):
            mask = self.nodes[u].bag
            for child in graph.successors(u):
                mask |= union[child]
            union[u] = mask
        return union

    def _copy(self, hypergraph=None, kind=None, nodes=None) -> "Decomposition":
        return Decomposition(
            hypergraph or self.hypergraph,
            kind or self.kind,
            nodes
            if nodes is not None
            else [
                DecompNode(n.id, n.parent, n.bag, dict(n.cover))
                for n in self.nodes.values()
            ],
        )

    def reroot(self, node_id: str) -> "Decomposition":
        """same tree, bags and covers, rooted at node_id"""
        if node_id not in self.nodes:
            raise DecompositionError(f"unknown node {node_id}")
        undirected = self.tree.to_undirected()
        parents = dict(nx.bfs_predecessors(undirected, node_id))
        return self._copy(
            nodes=[
                DecompNode(n.id, parents.get(n.id), n.bag, dict(n.cover))
                for n in self.nodes.values()
            ]
        )

    def relabel_edges(
        self, hypergraph: Hypergraph, mapping
    ) -> "Decomposition":
        """re-expresses covers over `hypergraph`, edge i becoming mapping[i]"""
        return self._copy(
            hypergraph=hypergraph,
            nodes=[
                DecompNode(
                    n.id,
                    n.parent,
                    n.bag,
                    {mapping[e]: w for e, w in n.cover.items()},
                )
                for n in self.nodes.values()
            ],
        )

    def project(self) -> "Decomposition":
        """maps covers over an augmented hypergraph back to its original edges

        A subedge's weight counts as its parent's; weights meeting on one
        parent are added and capped at 1, so no node gets heavier.
        """
        host = self.hypergraph
        if not host.is_augmented:
            return self
        base = host.root_hypergraph()
        nodes = []
        for n in self.nodes.values():
            cover: dict[int, Fraction] = {}
            for e, w in n.cover.items():
                parent = e
                while host.parents[parent] is not None:
                    parent = host.parents[parent]
                cover[parent] = min(Fraction(1), cover.get(parent, Fraction(0)) + w)
            nodes.append(DecompNode(n.id, n.parent, n.bag, cover))
        kind = Kind.GHD if self.kind == Kind.HD else self.kind
        return Decomposition(base, kind, nodes)

    def as_fractional(self) -> "Decomposition":
        return self._copy(kind=Kind.FHD)


def width(decomposition: Decomposition) -> Fraction:
    """maximum weight of the node covers"""
    return decomposition.width()


def _check_tree(decomposition: Decomposition) -> list[Violation]:
    if not decomposition.nodes:
        return [Violation("tree", None, "", "decomposition has no nodes")]
    roots = decomposition.roots
    if len(roots) != 1:
        return [
            Violation(
                "tree", None, ",".join(roots), f"expected one root, found {len(roots)}"
            )
        ]
    if not nx.is_arborescence(decomposition.tree):
        return [Violation("tree", None, "", "parent links contain a cycle")]
    return []


def _check_weights(decomposition: Decomposition, integral: bool) -> None:
    for node in decomposition.nodes.values():
        for e, w in node.cover.items():
            if integral and w not in (0, 1):
                logger.error(
                    f"Node {node.id} carries non-integral weight {w} in a {decomposition.kind.value}."
                )
                raise DecompositionError(
                    f"node {node.id}: weight {w} of edge {decomposition.hypergraph.edge_names[e]} is not 0 or 1"
                )
            if not 0 <= w <= 1:
                logger.error(f"Node {node.id} carries weight {w} outside [0,1].")
                raise DecompositionError(
                    f"node {node.id}: weight {w} of edge {decomposition.hypergraph.edge_names[e]} outside [0,1]"
                )


def _check_compatible(hypergraph: Hypergraph, decomposition: Decomposition):
    if hypergraph.vertices != decomposition.hypergraph.vertices:
        raise DecompositionError(
            "decomposition refers to a different vertex set than the hypergraph"
        )


def _check_common(
    hypergraph: Hypergraph, decomposition: Decomposition
) -> list[Violation]:
    """conditions (1) and (2)"""
    violations = _check_tree(decomposition)
    if violations:
        return violations
    nodes = decomposition.nodes.values()
    for i, edge in enumerate(hypergraph.edges):
        if not any((edge & n.bag) == edge for n in nodes):
            name = hypergraph.edge_names[i]
            violations.append(
                Violation("1", None, name, f"edge {name} is contained in no bag")
            )
    undirected = decomposition.tree.to_undirected()
    occurring = 0
    for n in nodes:
        occurring |= n.bag
    for v in iter_bits(occurring):
        holders = [n.id for n in nodes if n.bag >> v & 1]
        if not nx.is_connected(undirected.subgraph(holders)):
            name = hypergraph.vertices[v]
            violations.append(
                Violation(
                    "2",
                    holders[0],
                    name,
                    f"nodes containing vertex {name} are not connected: {holders}",
                )
            )
    return violations


def check_ghd(hypergraph: Hypergraph, decomposition: Decomposition) -> list[Violation]:
    """checks conditions (1), (2) and (3) of a GHD; an empty list means OK

    Raises:
        DecompositionError: when a cover weight is not 0 or 1
    """
    _check_compatible(hypergraph, decomposition)
    _check_weights(decomposition, integral=True)
    violations = _check_common(hypergraph, decomposition)
    host = decomposition.hypergraph
    for node in decomposition.nodes.values():
        covered = host.union_of(
            sum(1 << e for e, w in node.cover.items() if w == 1)
        )
        missing = node.bag & ~covered
        for v in iter_bits(missing):
            name = host.vertices[v]
            violations.append(
                Violation(
                    "3", node.id, name, f"vertex {name} of node {node.id} is not covered by its λ-label"
                )
            )
    return violations


def check_hd(hypergraph: Hypergraph, decomposition: Decomposition) -> list[Violation]:
    """check_ghd plus the special condition V(T_u) ∩ B(λ_u) ⊆ B_u"""
    violations = check_ghd(hypergraph, decomposition)
    if any(v.condition == "tree" for v in violations):
        return violations
    host = decomposition.hypergraph
    below = decomposition.subtree_vertices()
    for node in decomposition.nodes.values():
        covered = host.union_of(
            sum(1 << e for e, w in node.cover.items() if w == 1)
        )
        leaked = below[node.id] & covered & ~node.bag
        for v in iter_bits(leaked):
            name = host.vertices[v]
            violations.append(
                Violation(
                    "4",
                    node.id,
                    name,
                    f"vertex {name} is in B(λ) of node {node.id} and below it but not in its bag",
                )
            )
    return violations


def check_fhd(hypergraph: Hypergraph, decomposition: Decomposition) -> list[Violation]:
    """checks conditions (1), (2) and (3') of an FHD

    Raises:
        DecompositionError: when a weight lies outside [0, 1]
    """
    _check_compatible(hypergraph, decomposition)
    _check_weights(decomposition, integral=False)
    violations = _check_common(hypergraph, decomposition)
    host = decomposition.hypergraph
    for node in decomposition.nodes.values():
        cover = EdgeCover.from_weights(host, node.cover)
        missing = node.bag & ~cover.covered
        for v in iter_bits(missing):
            name = host.vertices[v]
            violations.append(
                Violation(
                    "3'",
                    node.id,
                    name,
                    f"vertex {name} of node {node.id} gets fractional coverage below 1",
                )
            )
    return violations


def check(hypergraph: Hypergraph, decomposition: Decomposition) -> list[Violation]:
    """runs the checker matching the decomposition's kind"""
    match decomposition.kind:
        case Kind.HD:
            return check_hd(hypergraph, decomposition)
        case Kind.GHD:
            return check_ghd(hypergraph, decomposition)
        case _:
            return check_fhd(hypergraph, decomposition)


def parse_decomposition(
    text: str, hypergraph: Hypergraph, kind: Kind | str | None = None
) -> Decomposition:
    """parses the one-node-per-line decomposition format

    `node <id> parent=<id|-> bag={v1,...} cover={edge=weight,...}`; an
    omitted weight means 1, `%` and `#` start comments, an optional
    `kind HD|GHD|FHD` line sets the kind (otherwise GHD for integral covers
    and FHD for fractional ones).

    Raises:
        DecompositionError: on syntax errors, dangling parents, unknown vertices or edges
    """
    nodes = []
    declared = Kind(kind) if kind is not None else None
    for number, raw in enumerate(text.splitlines(), start=1):
        line = re.split(r"[%#]", raw, maxsplit=1)[0].strip()
        if not line:
            continue
        kind_match = _KIND_RE.fullmatch(line)
        if kind_match:
            declared = declared or Kind(kind_match.group("kind"))
            continue
        match = _NODE_RE.fullmatch(line)
        if match is None:
            logger.error(f"Cannot parse decomposition line {number}: {raw}")
            raise DecompositionError(f"syntax error on line {number}: {raw.strip()}")
        parent = match.group("parent")
        bag = 0
        for name in filter(None, (v.strip() for v in match.group("bag").split(","))):
            if name not in hypergraph._vertex_index:
                raise DecompositionError(f"line {number}: unknown vertex {name}")
            bag |= 1 << hypergraph.vertex_id(name)
        cover = {}
        for item in filter(None, (c.strip() for c in match.group("cover").split(","))):
            edge_name, _, weight = item.partition("=")
            edge_name = edge_name.strip()
            if not hypergraph.has_edge(edge_name):
                logger.error(f"Line {number} references unknown edge {edge_name}.")
                raise DecompositionError(f"line {number}: unknown edge {edge_name}")
            try:
                value = snap_fraction(weight) if weight.strip() else Fraction(1)
            except (ValueError, ZeroDivisionError):
                raise DecompositionError(
                    f"line {number}: bad weight {weight!r}"
                ) from None
            cover[hypergraph.edge_id(edge_name)] = value
        nodes.append(
            DecompNode(
                match.group("id"), None if parent == "-" else parent, bag, cover
            )
        )
    if declared is None:
        integral = all(w == 1 for n in nodes for w in n.cover.values())
        declared = Kind.GHD if integral else Kind.FHD
    return Decomposition(hypergraph, declared, nodes)


def serialize_decomposition(decomposition: Decomposition) -> str:
    """renders a decomposition, nodes in breadth-first order from the root"""
    host = decomposition.hypergraph
    lines = [f"kind {decomposition.kind.value}"]
    order = list(decomposition.nodes)
    if decomposition.is_tree():
        order = [decomposition.root] + [
            child for _, child in nx.bfs_edges(decomposition.tree, decomposition.root)
        ]
    for node_id in order:
        node = decomposition.nodes[node_id]
        bag = ",".join(normalize_name(v) for v in host.vertex_names(node.bag))
        cover = ",".join(
            normalize_name(host.edge_names[e])
            if w == 1
            else f"{normalize_name(host.edge_names[e])}={format_weight(w)}"
            for e, w in sorted(node.cover.items())
            if w != 0
        )
        parent = "-" if node.parent is None else node.parent
        lines.append(f"node {node.id} parent={parent} bag={{{bag}}} cover={{{cover}}}")
    return "\n".join(lines) + "\n"
