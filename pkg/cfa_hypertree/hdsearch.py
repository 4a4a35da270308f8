"""Hypertree decompositions of bounded width.

`decide_hw` answers whether an HD of width <= k exists with a top-down
search over (component, connector) pairs: each step picks a label of at
most k edges covering the connector, takes the bag B(λ) ∩ (C ∪ connector)
and recurses into the components left over. Failed pairs are cached.
"""

import logging
import random
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from itertools import combinations
from typing import Callable, Iterator, Sequence

from cfa_hypertree.decomp import (
    DecompNode,
    Decomposition,
    DecompositionError,
    Kind,
    check_hd,
)
from cfa_hypertree.helpers import Deadline, SearchTimeout, iter_bits, popcount
from cfa_hypertree.hgcore import (
    Hypergraph,
    VertexSet,
    components_within,
    gyo_acyclic,
)
from cfa_hypertree.hgcore import simplify as simplify_hypergraph

logger = logging.getLogger(__name__)


class Status(str, Enum):
    YES = "YES"
    NO = "NO"
    TIMEOUT = "TIMEOUT"
    ERROR = "ERROR"
    UNKNOWN = "UNKNOWN"

    @property
    def exit_code(self) -> int:
        return {"YES": 0, "NO": 1, "TIMEOUT": 2, "ERROR": 3, "UNKNOWN": 4}[self.value]

    @property
    def definite(self) -> bool:
        return self in (Status.YES, Status.NO)


@dataclass
class RunOutcome:
    """Result of one decision run.

    Args:
        status (Status): YES, NO, TIMEOUT, ERROR or UNKNOWN
        decomposition (Decomposition): witness for YES
        elapsed_ms (int): wall-clock time of the run
        nodes_expanded (int): number of candidate labels examined
        method (str): solver that produced the answer
        message (str): error or annotation text
    """

    status: Status
    decomposition: Decomposition | None = None
    elapsed_ms: int = 0
    nodes_expanded: int = 0
    method: str | None = None
    message: str = ""


@dataclass
class HwBounds:
    """hw bounds from the iterative protocol; `upper` None means no YES up to k_max"""

    lower: int
    upper: int | None
    witness: Decomposition | None = None
    outcomes: dict = field(default_factory=dict)

    @property
    def exact(self) -> bool:
        return self.upper is not None and self.lower == self.upper


class SearchCache:
    """Negative results keyed by exact (component, connector, k)."""

    def __init__(self):
        self._failed: set[tuple[int, int, int]] = set()
        self.hits = 0

    def __len__(self) -> int:
        return len(self._failed)

    def failed(self, component: VertexSet, connector: VertexSet, k: int) -> bool:
        if (component, connector, k) in self._failed:
            self.hits += 1
            return True
        return False

    def record_failure(self, component: VertexSet, connector: VertexSet, k: int) -> None:
        self._failed.add((component, connector, k))


def distinct_unions(
    masks: Sequence[int], scope: int, k: int
) -> Iterator[tuple[int, tuple[int, ...]]]:
    """yields every distinct union (restricted to scope) of at most k of the masks

    Unions are produced level by level, smallest label first; each comes
    with the first label found for it, as positions into `masks`.
    """
    seen = {0}
    frontier = [(0, ())]
    restricted = [m & scope for m in masks]
    for _ in range(k):
        next_frontier = []
        for union, label in frontier:
            for pos, part in enumerate(restricted):
                grown = union | part
                if grown in seen:
                    continue
                seen.add(grown)
                item = (grown, label + (pos,))
                next_frontier.append(item)
                yield item
        frontier = next_frontier
        if not frontier:
            return


@dataclass
class _Node:
    bag: VertexSet
    label: tuple
    children: list


class HdSearch:
    """One det-k-decomp style run over a fixed hypergraph.

    Args:
        hypergraph (Hypergraph): hypergraph searched
        k (int): width bound
        deadline (Deadline): time budget and stop flag
        order (Sequence[int]): edge order used for label enumeration
        bag_filter (Callable[[int], bool]): optional predicate a bag must pass
        extra_items (Callable[[int, int], list]): optional extra (mask, parent) label items per (component, connector)
    """

    def __init__(
        self,
        hypergraph: Hypergraph,
        k: int,
        deadline: Deadline,
        order: Sequence[int] | None = None,
        bag_filter: Callable[[int], bool] | None = None,
        extra_items: Callable[[int, int], list] | None = None,
    ):
        self.hypergraph = hypergraph
        self.k = k
        self.deadline = deadline
        self.order = list(order) if order is not None else list(range(hypergraph.num_edges))
        self.bag_filter = bag_filter
        self.extra_items = extra_items
        self.cache = SearchCache()
        self.expanded = 0

    def _items(self, component: VertexSet, connector: VertexSet) -> list[tuple[int, int]]:
        scope = component | connector
        touching = self.hypergraph.edges_touching(scope)
        items = [
            (self.hypergraph.edges[e], e) for e in self.order if touching >> e & 1
        ]
        if self.extra_items is not None:
            items.extend(self.extra_items(component, connector))
        return items

    def decompose(self, component: VertexSet, connector: VertexSet) -> _Node | None:
        if self.cache.failed(component, connector, self.k):
            return None
        host = self.hypergraph
        scope = component | connector
        items = self._items(component, connector)
        for bag, positions in distinct_unions([m for m, _ in items], scope, self.k):
            self.expanded += 1
            self.deadline.tick()
            if (connector & bag) != connector or not bag & component:
                continue
            if self.bag_filter is not None and not self.bag_filter(bag):
                continue
            rest = component & ~bag
            parts = components_within(
                (host.edges[e] for e in iter_bits(host.edges_touching(rest))), rest
            )
            pending = []
            for part in parts:
                link = host.union_of(host.edges_touching(part)) & bag
                if self.cache.failed(part, link, self.k):
                    break
                pending.append((part, link))
            else:
                children = []
                for part, link in pending:
                    child = self.decompose(part, link)
                    if child is None:
                        break
                    children.append(child)
                else:
                    label = tuple(items[p] for p in positions)
                    return _Node(bag, label, children)
        self.cache.record_failure(component, connector, self.k)
        return None

    def run(self) -> _Node | None:
        return self.decompose(self.hypergraph.all_vertices, 0)


def tree_to_nodes(root: _Node, weights: Callable[[tuple], dict]) -> list[DecompNode]:
    """numbers the search tree in preorder and builds decomposition nodes"""
    nodes = []
    stack = [(root, None)]
    counter = 0
    while stack:
        node, parent = stack.pop()
        counter += 1
        node_id = str(counter)
        nodes.append(DecompNode(node_id, parent, node.bag, weights(node.label)))
        for child in reversed(node.children):
            stack.append((child, node_id))
    return nodes


def integral_weights(label: tuple) -> dict:
    return {parent: Fraction(1) for _, parent in label}


def edge_order(hypergraph: Hypergraph, seed: int | None = None) -> list[int]:
    """edge indices in order, shuffled reproducibly when a seed is given"""
    order = list(range(hypergraph.num_edges))
    if seed is not None:
        random.Random(seed).shuffle(order)
    return order


def _validate_k(k: int) -> None:
    if k < 1:
        logger.error(f"Width bound must be at least 1, got {k}.")
        raise ValueError("k must be at least 1")


def decide_hw(
    hypergraph: Hypergraph,
    k: int,
    timeout: float | None = None,
    simplify: bool = True,
    seed: int | None = None,
    stop_event=None,
    check_every: int = 1024,
    bag_filter: Callable[[int], bool] | None = None,
) -> RunOutcome:
    """decides whether hw(H) <= k

    Args:
        hypergraph (Hypergraph): nonempty hypergraph
        k (int): width bound, at least 1
        timeout (float): seconds, None for no limit
        simplify (bool): search on the hypergraph without dominated edges. Default True.
        seed (int): shuffles the label enumeration order reproducibly
        stop_event (threading.Event): cooperative cancellation flag
        check_every (int): expansions between two deadline polls
        bag_filter (Callable[[int], bool]): extra predicate every bag must satisfy

    Returns:
        RunOutcome: YES with an HD of width <= k over `hypergraph`, NO or TIMEOUT
    """
    _validate_k(k)
    if hypergraph.num_edges == 0:
        logger.error("Cannot decompose a hypergraph without edges.")
        raise ValueError("hypergraph has no edges")
    deadline = Deadline(timeout, stop_event, check_every)
    reduced = simplify_hypergraph(hypergraph) if simplify else None
    host = reduced.hypergraph if reduced is not None else hypergraph
    search = HdSearch(host, k, deadline, edge_order(host, seed), bag_filter)
    try:
        root = search.run()
    except SearchTimeout as e:
        logger.warning(f"hw search on {hypergraph.name} at k={k} stopped: {e}")
        return RunOutcome(
            Status.TIMEOUT,
            elapsed_ms=deadline.elapsed_ms(),
            nodes_expanded=search.expanded,
            method="hd",
            message=str(e),
        )
    if root is None:
        logger.info(f"{hypergraph.name}: no HD of width <= {k}.")
        return RunOutcome(
            Status.NO,
            elapsed_ms=deadline.elapsed_ms(),
            nodes_expanded=search.expanded,
            method="hd",
        )
    decomposition = Decomposition(host, Kind.HD, tree_to_nodes(root, integral_weights))
    if reduced is not None:
        decomposition = reduced.lift(decomposition)
    violations = check_hd(hypergraph, decomposition)
    if violations or decomposition.width() > k:
        logger.error(f"HD search produced an invalid witness: {violations}")
        raise DecompositionError(f"invalid HD witness for {hypergraph.name}")
    logger.info(
        f"{hypergraph.name}: HD of width {decomposition.width()} <= {k} found "
        f"after {search.expanded} expansions."
    )
    return RunOutcome(
        Status.YES,
        decomposition,
        deadline.elapsed_ms(),
        search.expanded,
        method="hd",
    )


def compute_hw(
    hypergraph: Hypergraph,
    k_max: int,
    timeout_per_k: float | None = None,
    simplify: bool = True,
    seed: int | None = None,
) -> HwBounds:
    """ascends k = 1..k_max until the first YES

    k = 1 is answered by GYO reduction. The lower bound is one more than the
    largest k with a definite NO; the upper bound is the first k with YES.
    """
    _validate_k(k_max)
    outcomes: dict[int, RunOutcome] = {}
    largest_no = 0
    for k in range(1, k_max + 1):
        if k == 1 and not gyo_acyclic(hypergraph):
            logger.debug(f"{hypergraph.name} is cyclic, hw > 1.")
            outcomes[1] = RunOutcome(Status.NO, method="gyo")
            largest_no = 1
            continue
        outcome = decide_hw(
            hypergraph, k, timeout_per_k, simplify=simplify, seed=seed
        )
        outcomes[k] = outcome
        logger.debug(f"{hypergraph.name} k={k}: {outcome.status.value} in {outcome.elapsed_ms} ms")
        if outcome.status == Status.YES:
            return HwBounds(largest_no + 1, k, outcome.decomposition, outcomes)
        if outcome.status == Status.NO:
            largest_no = k
    return HwBounds(largest_no + 1, None, None, outcomes)


BRUTE_FORCE_MAX_EDGES = 7
BRUTE_FORCE_MAX_VERTICES = 10


def _submasks(mask: int) -> Iterator[int]:
    sub = mask
    while True:
        yield sub
        if sub == 0:
            return
        sub = (sub - 1) & mask


class _SubtreeTable:
    """which (χ(T_u), χ(u)) pairs some HD subtree of width <= k realizes

    A subtree with vertex set W and root bag B exists when some label λ of
    at most k edges has B(λ) ∩ W = B, and W minus B splits into pieces P_i,
    each the private part of a child subtree (W_i, B_i) with W_i ∩ B ⊆ B_i.
    Every edge inside W must lie in B or in one W_i. A child either has a
    smaller vertex set or the same one with a strictly larger bag, so the
    memoized recursion terminates.
    """

    def __init__(self, hypergraph: Hypergraph, k: int):
        self.edges = hypergraph.edges
        self.labels: dict[int, tuple[int, ...]] = {}
        for size in range(1, k + 1):
            for label in combinations(range(len(self.edges)), size):
                union = 0
                for e in label:
                    union |= self.edges[e]
                self.labels.setdefault(union, label)
        self._bags: dict[int, dict[int, tuple[int, ...]]] = {}
        self._children: dict[tuple[int, int], list | None] = {}

    def bags(self, scope: int) -> dict[int, tuple[int, ...]]:
        """bag -> label for every bag a label can give over `scope`, largest first"""
        if scope not in self._bags:
            found: dict[int, tuple[int, ...]] = {}
            for union, label in self.labels.items():
                found.setdefault(union & scope, label)
            self._bags[scope] = dict(
                sorted(found.items(), key=lambda item: -popcount(item[0]))
            )
        return self._bags[scope]

    def children(self, scope: int, bag: int) -> list | None:
        key = (scope, bag)
        if key not in self._children:
            self._children[key] = None
            self._children[key] = self._split(scope, bag)
        return self._children[key]

    def _split(self, scope: int, bag: int) -> list | None:
        rest = scope & ~bag
        if not rest:
            return []
        inside = [e for e in self.edges if not e & ~scope]
        blocks = [1 << v for v in iter_bits(rest)]
        for e in inside:
            part = e & rest
            if not part:
                continue
            merged = part
            kept = []
            for block in blocks:
                if block & part:
                    merged |= block
                else:
                    kept.append(block)
            blocks = kept + [merged]
        pieces: dict[int, tuple[int, int] | None] = {}
        memo: dict[int, list | None] = {}

        def child_for(piece: int) -> tuple[int, int] | None:
            if piece not in pieces:
                pieces[piece] = self._child(scope, bag, piece, inside)
            return pieces[piece]

        def cover(remaining: int) -> list | None:
            if not remaining:
                return []
            if remaining not in memo:
                memo[remaining] = None
                lowest = remaining & -remaining
                for extra in _submasks(remaining & ~lowest):
                    chosen = lowest | extra
                    piece = 0
                    for i in iter_bits(chosen):
                        piece |= blocks[i]
                    child = child_for(piece)
                    if child is None:
                        continue
                    tail = cover(remaining & ~chosen)
                    if tail is not None:
                        memo[remaining] = [child] + tail
                        break
            return memo[remaining]

        return cover((1 << len(blocks)) - 1)

    def _child(self, scope: int, bag: int, piece: int, inside: list[int]):
        required = 0
        for e in inside:
            if e & piece:
                required |= e & bag
        for extra in _submasks(bag & ~required):
            shared = required | extra
            sub_scope = piece | shared
            for child_bag in self.bags(sub_scope):
                if shared & ~child_bag or (sub_scope, child_bag) == (scope, bag):
                    continue
                if self.children(sub_scope, child_bag) is not None:
                    return sub_scope, child_bag
        return None

    def witness(self, hypergraph: Hypergraph) -> Decomposition | None:
        everything = (1 << hypergraph.num_vertices) - 1
        root = next(
            (b for b in self.bags(everything) if self.children(everything, b) is not None),
            None,
        )
        if root is None:
            return None
        nodes = []
        stack = [((everything, root), None)]
        while stack:
            (scope, bag), parent = stack.pop()
            node_id = str(len(nodes) + 1)
            label = self.bags(scope)[bag]
            nodes.append(
                DecompNode(node_id, parent, bag, {e: Fraction(1) for e in label})
            )
            stack.extend((child, node_id) for child in self._children[(scope, bag)])
        return Decomposition(hypergraph, Kind.HD, nodes)


def brute_force_hw(hypergraph: Hypergraph) -> int:
    """exact hw by exhaustive enumeration, for small hypergraphs only

    Tries every label at every node and every way of handing the remaining
    vertices to child subtrees, without any normal form. Each witness is
    validated by check_hd.

    Raises:
        ValueError: when H has more than 7 edges or 10 vertices
    """
    if (
        hypergraph.num_edges > BRUTE_FORCE_MAX_EDGES
        or hypergraph.num_vertices > BRUTE_FORCE_MAX_VERTICES
    ):
        raise ValueError(
            f"brute force hw limited to {BRUTE_FORCE_MAX_EDGES} edges and {BRUTE_FORCE_MAX_VERTICES} vertices"
        )
    for k in range(1, hypergraph.num_edges + 1):
        witness = _SubtreeTable(hypergraph, k).witness(hypergraph)
        if witness is None:
            continue
        violations = check_hd(hypergraph, witness)
        if violations or witness.width() > k:
            logger.error(f"Brute force HD of {hypergraph.name} is invalid: {violations}")
            raise DecompositionError("brute force produced an invalid HD")
        return k
    raise DecompositionError("no HD found up to |E|")
