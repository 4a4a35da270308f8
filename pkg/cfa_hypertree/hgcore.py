"""Hypergraph data model, parsing and serialization, CQ conversion,
component computation and preprocessing.

Vertex and edge sets are plain ints used as bit masks over the dense index
space of one Hypergraph (bit i set = vertex/edge i is a member). Names are
only used for I/O.
"""

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from cfa_hypertree.helpers import HypertreeError, bits_of, iter_bits

logger = logging.getLogger(__name__)

# bit mask over the vertex / edge indices of one hypergraph
VertexSet = int
EdgeSet = int

NAME_RE = re.compile(r"[A-Za-z0-9_:.\-]+")
_BAD_NAME_CHARS = re.compile(r"[^A-Za-z0-9_:.\-]")
_CQ_ATOM_RE = re.compile(r"([^\s(),.∧&][^\s(),∧&]*?)\s*\(([^()]*)\)")
_CQ_ARG_RE = re.compile(
    r"\s*(\"(?:[^\"\\]|\\.)*\"|'(?:[^'\\]|\\.)*'|[^,\s]+)\s*(?:,|$)"
)
_CQ_SEPARATOR_RE = re.compile(r"(?:\s|,|∧|&|\bAND\b|\band\b)*\.?\s*")


class HypergraphError(HypertreeError, ValueError):
    """Raised for structurally invalid hypergraphs or queries."""


class HypergraphSyntaxError(HypergraphError):
    """Raised when input text does not follow the hypergraph or CQ grammar.

    Args:
        message (str): what went wrong
        line (int): 1-based line of the offending character
        column (int): 1-based column of the offending character
    """

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


def _position(text: str, pos: int) -> tuple[int, int]:
    line = text.count("\n", 0, pos) + 1
    column = pos - (text.rfind("\n", 0, pos) + 1) + 1
    return line, column


class Hypergraph:
    """Named vertex/edge incidence structure.

    Vertices and edges keep their input order; edge i is the bit mask
    `edges[i]`. Instances are treated as immutable and may be shared
    between concurrent solver runs.

    Args:
        name (str): instance name
        vertices (Sequence[str]): distinct vertex names, index = position
        edge_names (Sequence[str]): distinct edge names
        edges (Sequence[int]): vertex bit mask per edge
        parents (Sequence[int | None]): for augmented hypergraphs, the index of the original edge each subedge was taken from
        base (Hypergraph): the hypergraph this one augments, if any
    """

    def __init__(
        self,
        name: str,
        vertices: Sequence[str],
        edge_names: Sequence[str],
        edges: Sequence[int],
        parents: Sequence[int | None] | None = None,
        base: "Hypergraph | None" = None,
    ):
        if len(edge_names) != len(edges):
            raise HypergraphError("edge names and edge sets differ in length")
        self.name = name
        self.vertices = tuple(vertices)
        self.edge_names = tuple(edge_names)
        self.edges = tuple(edges)
        self.parents = (
            tuple(parents) if parents is not None else (None,) * len(edges)
        )
        self.base = base
        self._vertex_index = {v: i for i, v in enumerate(self.vertices)}
        self._edge_index = {e: i for i, e in enumerate(self.edge_names)}
        if len(self._vertex_index) != len(self.vertices):
            raise HypergraphError("vertex names must be distinct")
        if len(self._edge_index) != len(self.edge_names):
            raise HypergraphError("edge names must be distinct")
        incidence = [0] * len(self.vertices)
        for i, e in enumerate(self.edges):
            for v in iter_bits(e):
                incidence[v] |= 1 << i
        self.incidence = tuple(incidence)

    @classmethod
    def from_edges(
        cls, name: str, edges: Iterable[tuple[str, Sequence[str]]]
    ) -> "Hypergraph":
        """builds a hypergraph from (edge name, vertex names) pairs

        Vertex indices are assigned in first-appearance order; repeated
        vertices inside one edge are collapsed.

        Raises:
            HypergraphError: on an empty edge or a duplicate edge name
        """
        vertex_index: dict[str, int] = {}
        names: list[str] = []
        masks: list[int] = []
        seen: set[str] = set()
        for edge_name, members in edges:
            if edge_name in seen:
                logger.error(f"Duplicate edge name {edge_name}.")
                raise HypergraphError(f"duplicate edge name {edge_name}")
            if not members:
                logger.error(f"Edge {edge_name} is empty.")
                raise HypergraphError(f"empty edge {edge_name}")
            seen.add(edge_name)
            mask = 0
            for v in members:
                mask |= 1 << vertex_index.setdefault(v, len(vertex_index))
            names.append(edge_name)
            masks.append(mask)
        return cls(name, list(vertex_index), names, masks)

    def __repr__(self) -> str:
        return f"Hypergraph({self.name!r}, |V|={self.num_vertices}, |E|={self.num_edges})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, Hypergraph):
            return NotImplemented
        return (
            self.vertices == other.vertices
            and self.edge_names == other.edge_names
            and self.edges == other.edges
        )

    def __hash__(self) -> int:
        return hash((self.vertices, self.edge_names, self.edges))

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def all_vertices(self) -> VertexSet:
        return (1 << len(self.vertices)) - 1

    @property
    def all_edges(self) -> EdgeSet:
        return (1 << len(self.edges)) - 1

    @property
    def arity(self) -> int:
        return max((e.bit_count() for e in self.edges), default=0)

    @property
    def is_augmented(self) -> bool:
        return self.base is not None

    def vertex_id(self, name: str) -> int:
        return self._vertex_index[name]

    def edge_id(self, name: str) -> int:
        return self._edge_index[name]

    def has_edge(self, name: str) -> bool:
        return name in self._edge_index

    def vertex_mask(self, names: Iterable[str]) -> VertexSet:
        return bits_of(self._vertex_index[n] for n in names)

    def vertex_names(self, mask: VertexSet) -> list[str]:
        return [self.vertices[i] for i in iter_bits(mask)]

    def edge_vertex_names(self, i: int) -> list[str]:
        return self.vertex_names(self.edges[i])

    def union_of(self, edge_mask: EdgeSet) -> VertexSet:
        """B(λ) for an edge set λ given as a mask"""
        union = 0
        for i in iter_bits(edge_mask):
            union |= self.edges[i]
        return union

    def edges_touching(self, vertices: VertexSet) -> EdgeSet:
        touching = 0
        for v in iter_bits(vertices):
            touching |= self.incidence[v]
        return touching

    def base_edge(self, i: int) -> int:
        """index of the original edge that edge i stands for"""
        parent = self.parents[i]
        return i if parent is None else parent

    def root_hypergraph(self) -> "Hypergraph":
        return self if self.base is None else self.base.root_hypergraph()

    def augment(
        self, subedges: Iterable[tuple[VertexSet, int]], suffix: str = "sub"
    ) -> "Hypergraph":
        """returns H' = H plus the given (vertex set, parent edge) subedges

        Original edges keep their indices; subedges are appended and record
        their parent edge.
        """
        names = list(self.edge_names)
        masks = list(self.edges)
        parents = list(self.parents)
        counters: dict[int, int] = {}
        for mask, parent in subedges:
            counters[parent] = counters.get(parent, 0) + 1
            name = f"{self.edge_names[parent]}.{suffix}{counters[parent]}"
            while name in self._edge_index or name in names[len(self.edges):]:
                counters[parent] += 1
                name = f"{self.edge_names[parent]}.{suffix}{counters[parent]}"
            names.append(name)
            masks.append(mask)
            parents.append(parent)
        return Hypergraph(
            self.name, self.vertices, names, masks, parents, base=self
        )


@dataclass(frozen=True)
class SubproblemContext:
    """Current subproblem of a recursive decomposition search.

    Args:
        host (Hypergraph): the shared hypergraph the masks refer to
        edges (EdgeSet): ordinary edges of the subproblem
        specials (tuple[VertexSet]): special edges, bags fixed further up
        depth (int): recursion depth
    """

    host: Hypergraph
    edges: EdgeSet
    specials: tuple[VertexSet, ...] = ()
    depth: int = 0

    @property
    def vertices(self) -> VertexSet:
        covered = self.host.union_of(self.edges)
        for s in self.specials:
            covered |= s
        return covered

    @property
    def num_edges(self) -> int:
        return self.edges.bit_count()


def _scan_ws(text: str, pos: int) -> int:
    """skips whitespace and %-comments"""
    n = len(text)
    while pos < n:
        ch = text[pos]
        if ch.isspace():
            pos += 1
        elif ch == "%":
            end = text.find("\n", pos)
            pos = n if end < 0 else end + 1
        else:
            break
    return pos


def _syntax_error(text: str, pos: int, message: str) -> HypergraphSyntaxError:
    line, column = _position(text, pos)
    logger.error(f"Syntax error at line {line}, column {column}: {message}")
    return HypergraphSyntaxError(message, line, column)


def parse_hypergraph(text: str, name: str = "H") -> Hypergraph:
    """parses the benchmark hypergraph format

    Grammar: edges `NAME(v1,...,vn)` separated by commas, an optional final
    `.`, `%` comments to end of line, whitespace insignificant.

    Args:
        text (str): file contents
        name (str): name given to the hypergraph

    Returns:
        Hypergraph: edges in file order, vertices in first-appearance order

    Raises:
        HypergraphSyntaxError: on a grammar violation, with line and column
        HypergraphError: on a duplicate edge name or an empty edge
    """
    edges: list[tuple[str, list[str]]] = []
    seen: set[str] = set()
    pos = _scan_ws(text, 0)
    if pos >= len(text):
        raise _syntax_error(text, pos, "no edges found")
    while True:
        match = NAME_RE.match(text, pos)
        if match is None:
            raise _syntax_error(text, pos, "expected an edge name")
        edge_name, edge_pos = match.group(), pos
        pos = _scan_ws(text, match.end())
        if pos >= len(text) or text[pos] != "(":
            raise _syntax_error(text, pos, f"expected '(' after {edge_name}")
        pos = _scan_ws(text, pos + 1)
        members: list[str] = []
        if pos < len(text) and text[pos] == ")":
            line, column = _position(text, edge_pos)
            logger.error(f"Edge {edge_name} at line {line} is empty.")
            raise HypergraphError(
                f"empty edge {edge_name} (line {line}, column {column})"
            )
        while True:
            match = NAME_RE.match(text, pos)
            if match is None:
                raise _syntax_error(text, pos, "expected a vertex name")
            members.append(match.group())
            pos = _scan_ws(text, match.end())
            if pos < len(text) and text[pos] == ",":
                pos = _scan_ws(text, pos + 1)
                continue
            if pos < len(text) and text[pos] == ")":
                pos = _scan_ws(text, pos + 1)
                break
            raise _syntax_error(text, pos, "expected ',' or ')'")
        if edge_name in seen:
            line, column = _position(text, edge_pos)
            logger.error(f"Duplicate edge name {edge_name} at line {line}.")
            raise HypergraphError(
                f"duplicate edge name {edge_name} (line {line}, column {column})"
            )
        seen.add(edge_name)
        edges.append((edge_name, members))
        if pos >= len(text):
            break
        if text[pos] == ",":
            pos = _scan_ws(text, pos + 1)
            continue
        if text[pos] == ".":
            pos = _scan_ws(text, pos + 1)
            if pos < len(text):
                raise _syntax_error(text, pos, "unexpected text after '.'")
            break
        raise _syntax_error(text, pos, "expected ',' or '.' between edges")
    hypergraph = Hypergraph.from_edges(name, edges)
    logger.debug(
        f"Parsed hypergraph {name} with {hypergraph.num_vertices} vertices and {hypergraph.num_edges} edges."
    )
    return hypergraph


def normalize_name(name: str) -> str:
    """replaces characters outside the benchmark name alphabet with '_'"""
    return _BAD_NAME_CHARS.sub("_", name) or "_"


def serialize_hypergraph(hypergraph: Hypergraph) -> str:
    """renders a hypergraph in the benchmark format, one edge per line"""
    lines = []
    for i, edge_name in enumerate(hypergraph.edge_names):
        members = ",".join(
            normalize_name(v) for v in hypergraph.edge_vertex_names(i)
        )
        lines.append(f"{normalize_name(edge_name)}({members})")
    return ",\n".join(lines) + ".\n"


def _is_variable(arg: str) -> bool:
    return arg[:1].isupper() or arg.startswith("?")


def cq_to_hypergraph(cq_text: str, name: str = "Q") -> Hypergraph:
    """builds the hypergraph of a conjunctive query

    One edge per atom holding the atom's variables; arguments starting with
    an uppercase letter or `?` are variables, everything else (including
    quoted strings) is a constant. Atoms without variables are dropped. A
    rule head `ans(...) :-` is ignored.

    Args:
        cq_text (str): atoms `rel(a1,...,an)` separated by commas, `∧`, `AND` or newlines
        name (str): name given to the hypergraph

    Returns:
        Hypergraph: the query hypergraph

    Raises:
        HypergraphSyntaxError: on text that is not a list of atoms
        HypergraphError: when the query has no variables at all
    """
    body_start = 0
    head = cq_text.find(":-")
    if head >= 0:
        body_start = head + 2
    edges: list[tuple[str, list[str]]] = []
    used: set[str] = set()
    occurrences: dict[str, int] = {}
    pos = body_start
    atoms = 0
    for match in _CQ_ATOM_RE.finditer(cq_text, body_start):
        gap = _CQ_SEPARATOR_RE.fullmatch(cq_text, pos, match.start())
        if gap is None:
            raise _syntax_error(cq_text, pos, "expected an atom rel(a1,...,an)")
        pos = match.end()
        atoms += 1
        relation, args_text = match.group(1), match.group(2)
        args = [m.group(1) for m in _CQ_ARG_RE.finditer(args_text)]
        variables: list[str] = []
        for arg in args:
            if arg[0] in "\"'" or not _is_variable(arg):
                continue
            if arg not in variables:
                variables.append(arg)
        if not variables:
            logger.debug(f"Dropping atom {relation} without variables.")
            continue
        occurrences[relation] = occurrences.get(relation, 0) + 1
        edge_name = relation
        if occurrences[relation] > 1 or relation in used:
            suffix = occurrences[relation]
            edge_name = f"{relation}_{suffix}"
            while edge_name in used:
                suffix += 1
                edge_name = f"{relation}_{suffix}"
        used.add(edge_name)
        edges.append((edge_name, variables))
    if _CQ_SEPARATOR_RE.fullmatch(cq_text, pos) is None or atoms == 0:
        raise _syntax_error(cq_text, pos, "expected an atom rel(a1,...,an)")
    if not edges:
        logger.error("Query has no variables.")
        raise HypergraphError("query has no variables")
    return Hypergraph.from_edges(name, edges)


def read_instance(path: str | Path) -> Hypergraph:
    """reads a `.hg` hypergraph file or a `.cq` query file; name = file stem"""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".cq":
        return cq_to_hypergraph(text, name=path.stem)
    return parse_hypergraph(text, name=path.stem)


def components_within(
    edges: Iterable[VertexSet], scope: VertexSet
) -> list[VertexSet]:
    """maximal connected vertex sets of `scope` w.r.t. edges restricted to scope

    Returns:
        list[int]: components ordered by their smallest vertex index
    """
    pending = [e & scope for e in edges if e & scope]
    components = []
    remaining = scope
    while remaining:
        component = remaining & -remaining
        grown = True
        while grown:
            grown = False
            rest = []
            for e in pending:
                if e & component:
                    if e & ~component:
                        component |= e
                        grown = True
                else:
                    rest.append(e)
            pending = rest
        components.append(component)
        remaining &= ~component
    return components


def connected_components(
    hypergraph: Hypergraph, excluded: VertexSet = 0
) -> list[VertexSet]:
    """partitions V(H) \\ excluded into components connected by edges avoiding `excluded`

    Args:
        hypergraph (Hypergraph): the hypergraph
        excluded (int): vertex mask removed before computing components

    Returns:
        list[int]: components ordered by smallest contained vertex index
    """
    return components_within(
        hypergraph.edges, hypergraph.all_vertices & ~excluded
    )


def induced_subproblem(
    hypergraph: Hypergraph,
    specials: Sequence[VertexSet],
    component: VertexSet,
    sep_bag: VertexSet,
    depth: int = 0,
    edges: EdgeSet | None = None,
) -> SubproblemContext:
    """builds the pair (H_i, Sp_i) for a component of V(H) \\ sep_bag

    E_i holds every edge meeting the component, taken from `edges` (all
    edges of `hypergraph` by default); Sp_i holds the special edges meeting
    the component plus sep_bag.
    """
    scope = hypergraph.all_edges if edges is None else edges
    edges = hypergraph.edges_touching(component) & scope
    kept = tuple(s for s in specials if s & component)
    return SubproblemContext(hypergraph, edges, kept + (sep_bag,), depth)


def gyo_acyclic(hypergraph: Hypergraph) -> bool:
    """decides alpha-acyclicity by GYO reduction

    Repeatedly removes vertices occurring in a single edge and edges
    contained in another edge; the hypergraph is acyclic iff nothing is
    left.
    """
    edges = list(dict.fromkeys(hypergraph.edges))
    changed = True
    while changed and edges:
        changed = False
        seen_once = 0
        seen_twice = 0
        for e in edges:
            seen_twice |= seen_once & e
            seen_once |= e
        lonely = seen_once & ~seen_twice
        if lonely:
            edges = [e & ~lonely for e in edges]
            changed = True
        reduced = []
        for i, e in enumerate(edges):
            if not e:
                changed = True
                continue
            absorbed = any(
                j != i and (e & f) == e and (e != f or j < i)
                for j, f in enumerate(edges)
                if f
            )
            if absorbed:
                changed = True
                continue
            reduced.append(e)
        edges = reduced
    logger.debug(
        f"GYO reduction of {hypergraph.name} left {len(edges)} edge(s)."
    )
    return not edges


@dataclass(frozen=True)
class SimplifiedHypergraph:
    """Result of `simplify`.

    Args:
        hypergraph (Hypergraph): reduced hypergraph over the same vertex list
        original (Hypergraph): the input hypergraph
        kept (tuple[int]): original index of each reduced edge
        absorbed (dict): removed original edge index -> original index of a kept superset
    """

    hypergraph: Hypergraph
    original: Hypergraph
    kept: tuple[int, ...]
    absorbed: dict = field(default_factory=dict)

    @property
    def changed(self) -> bool:
        return len(self.kept) != self.original.num_edges

    def lift(self, decomposition):
        """re-expresses a decomposition of the reduced hypergraph over the original edges"""
        if not self.changed:
            return decomposition
        return decomposition.relabel_edges(self.original, self.kept)


def simplify(hypergraph: Hypergraph) -> SimplifiedHypergraph:
    """removes duplicate edges and edges contained in another edge

    The first of several equal edges is kept; vertex indices are unchanged.
    """
    edges = hypergraph.edges
    kept = []
    for i, e in enumerate(edges):
        dominated = any(
            (e & f) == e and (e != f or j < i)
            for j, f in enumerate(edges)
            if j != i
        )
        if not dominated:
            kept.append(i)
    absorbed = {}
    for i, e in enumerate(edges):
        if i not in kept:
            absorbed[i] = next(j for j in kept if (e & edges[j]) == e)
    if len(kept) == len(edges):
        return SimplifiedHypergraph(hypergraph, hypergraph, tuple(kept), {})
    reduced = Hypergraph(
        hypergraph.name,
        hypergraph.vertices,
        [hypergraph.edge_names[i] for i in kept],
        [edges[i] for i in kept],
    )
    logger.debug(
        f"Simplified {hypergraph.name}: {len(edges)} -> {len(kept)} edges."
    )
    return SimplifiedHypergraph(reduced, hypergraph, tuple(kept), absorbed)
