"""Generalized hypertree decompositions of bounded width.

Three exact deciders for ghw(H) <= k:

- global: add the subedge closure f(H,k) to H and search for an HD of the
  augmented hypergraph;
- local: the same HD search, but subedges are generated per search node
  from the edges meeting the current component and connector only;
- balsep: recursive balanced-separator search over the augmented
  hypergraph, with previously chosen bags carried down as special edges.

`portfolio_ghw` races the three and keeps the first definite answer.
"""

import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, count
from typing import Any, Callable, Sequence

import networkx as nx

from cfa_hypertree.decomp import (
    DecompNode,
    Decomposition,
    DecompositionError,
    Kind,
    check_ghd,
)
from cfa_hypertree.hdsearch import (
    HdSearch,
    RunOutcome,
    Status,
    distinct_unions,
    edge_order,
    integral_weights,
    tree_to_nodes,
)
from cfa_hypertree.helpers import (
    Deadline,
    HypertreeError,
    SearchTimeout,
    iter_bits,
    popcount,
)
from cfa_hypertree.hgcore import (
    Hypergraph,
    SubproblemContext,
    VertexSet,
    components_within,
    induced_subproblem,
)

logger = logging.getLogger(__name__)

DEFAULT_CAP = 100_000


class SubedgeCapExceeded(HypertreeError):
    """Raised when subedge generation passes its cap."""

    def __init__(self, cap: int):
        super().__init__(f"subedge generation exceeded the cap of {cap}")
        self.cap = cap


@dataclass
class SubedgeSet:
    """Deduplicated (vertex set, parent edge index) pairs.

    Args:
        subedges (list[tuple[int, int]]): generated subedges in generation order
        cap (int): generation limit
        cap_exceeded (bool): True when generation stopped at the cap
    """

    subedges: list = field(default_factory=list)
    cap: int = DEFAULT_CAP
    cap_exceeded: bool = False

    def __len__(self) -> int:
        return len(self.subedges)

    def __iter__(self):
        return iter(self.subedges)

    @property
    def masks(self) -> set[int]:
        return {mask for mask, _ in self.subedges}


def _maximal(masks) -> list[int]:
    """the inclusion-maximal nonempty masks, largest first"""
    kept: list[int] = []
    for mask in sorted(set(masks), key=popcount, reverse=True):
        if mask and not any(mask & m == mask for m in kept):
            kept.append(mask)
    return kept


def _subedges_of(
    edges: Sequence[int],
    candidates: Sequence[int],
    scope_of,
    k: int,
    cap: int,
    forbidden: set[int],
    deadline: Deadline | None,
) -> tuple[dict[int, int], bool]:
    """subsets of e ∩ (union of <= k other edges) for each candidate edge e

    Returns:
        tuple: mask -> lowest parent index, and whether the cap was hit
    """
    found: dict[int, int] = {}
    for i in candidates:
        target = scope_of(edges[i])
        others = [edges[j] for j in candidates if j != i]
        unions = []
        for union, _ in distinct_unions(others, target, k):
            if deadline is not None:
                deadline.tick()
            unions.append(union)
        for common in _maximal(unions):
            sub = common
            while sub:
                if sub != target and sub not in forbidden and sub not in found:
                    if len(found) >= cap:
                        return found, True
                    found[sub] = i
                sub = (sub - 1) & common
    return found, False


def subedge_closure_global(
    hypergraph: Hypergraph,
    k: int,
    cap: int = DEFAULT_CAP,
    deadline: Deadline | None = None,
) -> SubedgeSet:
    """f(H,k): all nonempty subsets of e ∩ (e1 ∪ ... ∪ ej), j <= k, not equal to an edge

    Only subsets of the inclusion-maximal intersections per edge are
    enumerated. Subedges are identified by vertex set; the lowest-index
    parent wins.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    edges = hypergraph.edges
    found, exceeded = _subedges_of(
        edges,
        range(len(edges)),
        lambda e: e,
        k,
        cap,
        set(edges),
        deadline,
    )
    if exceeded:
        logger.warning(
            f"Subedge closure of {hypergraph.name} at k={k} stopped at the cap of {cap}."
        )
    else:
        logger.debug(
            f"Subedge closure of {hypergraph.name} at k={k}: {len(found)} subedges."
        )
    return SubedgeSet(list(found.items()), cap, exceeded)


def _augmented(hypergraph: Hypergraph, k: int, cap: int, deadline: Deadline) -> Hypergraph:
    closure = subedge_closure_global(hypergraph, k, cap, deadline)
    if closure.cap_exceeded:
        logger.error(f"Cannot build the augmented hypergraph of {hypergraph.name}.")
        raise SubedgeCapExceeded(cap)
    return hypergraph.augment(closure.subedges)


def _timed_out(name: str, hypergraph: Hypergraph, k: int, deadline, expanded, error) -> RunOutcome:
    logger.warning(f"{name} ghw search on {hypergraph.name} at k={k} stopped: {error}")
    return RunOutcome(
        Status.TIMEOUT,
        elapsed_ms=deadline.elapsed_ms(),
        nodes_expanded=expanded,
        method=name,
        message=str(error),
    )


def _accept(
    name: str,
    hypergraph: Hypergraph,
    k: int,
    decomposition: Decomposition | None,
    deadline: Deadline,
    expanded: int,
) -> RunOutcome:
    if decomposition is None:
        logger.info(f"{name}: {hypergraph.name} has no GHD of width <= {k}.")
        return RunOutcome(
            Status.NO,
            elapsed_ms=deadline.elapsed_ms(),
            nodes_expanded=expanded,
            method=name,
        )
    decomposition = decomposition.project()
    violations = check_ghd(hypergraph, decomposition)
    if violations or decomposition.width() > k:
        logger.error(f"{name} produced an invalid GHD witness: {violations}")
        raise DecompositionError(f"invalid GHD witness for {hypergraph.name}")
    logger.info(
        f"{name}: GHD of {hypergraph.name} with width {decomposition.width()} <= {k}."
    )
    return RunOutcome(
        Status.YES,
        decomposition,
        deadline.elapsed_ms(),
        expanded,
        method=name,
    )


def decide_ghw_global(
    hypergraph: Hypergraph,
    k: int,
    timeout: float | None = None,
    cap: int = DEFAULT_CAP,
    stop_event: threading.Event | None = None,
    seed: int | None = None,
    check_every: int = 1024,
) -> RunOutcome:
    """ghw(H) <= k iff hw(H + f(H,k)) <= k

    Raises:
        SubedgeCapExceeded: when f(H,k) is larger than `cap`
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    deadline = Deadline(timeout, stop_event, check_every)
    search = None
    try:
        augmented = _augmented(hypergraph, k, cap, deadline)
        search = HdSearch(augmented, k, deadline, edge_order(augmented, seed))
        root = search.run()
    except SearchTimeout as e:
        return _timed_out(
            "global", hypergraph, k, deadline, search.expanded if search else 0, e
        )
    witness = None
    if root is not None:
        witness = Decomposition(
            augmented, Kind.HD, tree_to_nodes(root, integral_weights)
        )
    return _accept("global", hypergraph, k, witness, deadline, search.expanded)


def decide_ghw_local(
    hypergraph: Hypergraph,
    k: int,
    timeout: float | None = None,
    cap: int = DEFAULT_CAP,
    stop_event: threading.Event | None = None,
    seed: int | None = None,
    check_every: int = 1024,
) -> RunOutcome:
    """HD search whose labels may also use subedges generated at each node

    At a node with component C and connector S, the extra label items are
    the subsets of e ∩ (C ∪ S) ∩ (union of <= k other edges), e and the
    others ranging over the edges meeting C ∪ S.

    Raises:
        SubedgeCapExceeded: when one node generates more than `cap` subedges
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    deadline = Deadline(timeout, stop_event, check_every)
    edges = hypergraph.edges

    def local_subedges(component: VertexSet, connector: VertexSet) -> list:
        scope = component | connector
        pool = list(iter_bits(hypergraph.edges_touching(scope)))
        found, exceeded = _subedges_of(
            edges,
            pool,
            lambda e: e & scope,
            k,
            cap,
            {edges[j] & scope for j in pool},
            deadline,
        )
        if exceeded:
            logger.error(
                f"Local subedges of {hypergraph.name} at k={k} exceeded the cap of {cap}."
            )
            raise SubedgeCapExceeded(cap)
        return list(found.items())

    search = HdSearch(
        hypergraph,
        k,
        deadline,
        edge_order(hypergraph, seed),
        extra_items=local_subedges,
    )
    try:
        root = search.run()
    except SearchTimeout as e:
        return _timed_out("local", hypergraph, k, deadline, search.expanded, e)
    witness = None
    if root is not None:
        witness = Decomposition(
            hypergraph, Kind.GHD, tree_to_nodes(root, integral_weights)
        )
    return _accept("local", hypergraph, k, witness, deadline, search.expanded)


def _split(ctx: SubproblemContext, bag: VertexSet) -> list[VertexSet]:
    """components of V(ctx) minus bag, connected by ordinary and special edges"""
    host = ctx.host
    connecting = [host.edges[e] for e in iter_bits(ctx.edges)] + list(ctx.specials)
    return components_within(connecting, ctx.vertices & ~bag)


def _balanced(ctx: SubproblemContext, components: list[VertexSet]) -> bool:
    if ctx.edges:
        total = popcount(ctx.edges)
        return all(
            2 * popcount(ctx.host.edges_touching(c) & ctx.edges) <= total
            for c in components
        )
    # only special edges remain to be placed
    total = len(ctx.specials)
    return all(
        2 * sum(1 for s in ctx.specials if s & c) <= total for c in components
    )


def is_balanced_separator(ctx: SubproblemContext, label: int) -> bool:
    """True iff every component of V \\ B(λ) meets at most half of the ordinary edges

    Args:
        ctx (SubproblemContext): current subproblem
        label (int): edge mask over ctx.host
    """
    bag = ctx.host.union_of(label) & ctx.vertices
    return _balanced(ctx, _split(ctx, bag))


def _placeholder(special: VertexSet) -> tuple:
    return ("special", special)


class BalancedSeparatorSearch:
    """Recursive balanced-separator search over one (augmented) hypergraph.

    Subtrees are networkx graphs in which each special edge of the
    subproblem appears as a placeholder node; the caller that created the
    special edge replaces its placeholder with the separator node.
    """

    def __init__(self, host: Hypergraph, k: int, deadline: Deadline, order: Sequence[int]):
        self.host = host
        self.k = k
        self.deadline = deadline
        self.order = list(order)
        self.failed: set = set()
        self.expanded = 0
        self._ids = count(1)

    def find(self, ctx: SubproblemContext) -> tuple[nx.Graph, tuple | None] | None:
        key = (ctx.edges, frozenset(ctx.specials))
        if key in self.failed:
            return None
        if not ctx.edges and len(ctx.specials) <= 2:
            tree = nx.Graph()
            tree.add_nodes_from(_placeholder(s) for s in ctx.specials)
            if len(ctx.specials) == 2:
                tree.add_edge(*(_placeholder(s) for s in ctx.specials))
            return tree, None
        host = self.host
        scope = ctx.vertices
        touching = host.edges_touching(scope)
        pool = [e for e in self.order if touching >> e & 1]
        for bag, positions in distinct_unions([host.edges[e] for e in pool], scope, self.k):
            self.expanded += 1
            self.deadline.tick()
            if bag in ctx.specials:
                continue
            components = _split(ctx, bag)
            if not _balanced(ctx, components):
                continue
            subtrees = []
            for component in components:
                sub = induced_subproblem(
                    host, ctx.specials, component, bag, ctx.depth + 1, edges=ctx.edges
                )
                found = self.find(sub)
                if found is None:
                    break
                subtrees.append(found[0])
            else:
                node = ("node", next(self._ids))
                tree = nx.Graph()
                tree.add_node(node, bag=bag, label=tuple(pool[p] for p in positions))
                for subtree in subtrees:
                    grafted = nx.relabel_nodes(subtree, {_placeholder(bag): node})
                    tree = nx.compose(grafted, tree)
                for special in ctx.specials:
                    if not any(special & c for c in components):
                        tree.add_edge(node, _placeholder(special))
                return tree, node
        self.failed.add(key)
        return None

    def run(self) -> Decomposition | None:
        top = SubproblemContext(self.host, self.host.all_edges, (), 0)
        found = self.find(top)
        if found is None:
            return None
        tree, root = found
        parents = dict(nx.bfs_predecessors(tree, root))
        nodes = []
        for node in nx.bfs_tree(tree, root):
            data = tree.nodes[node]
            parent = parents.get(node)
            nodes.append(
                DecompNode(
                    str(node[1]),
                    None if parent is None else str(parent[1]),
                    data["bag"],
                    {e: Fraction(1) for e in data["label"]},
                )
            )
        return Decomposition(self.host, Kind.GHD, nodes)


def decide_ghw_balsep(
    hypergraph: Hypergraph,
    k: int,
    timeout: float | None = None,
    cap: int = DEFAULT_CAP,
    stop_event: threading.Event | None = None,
    seed: int | None = None,
    check_every: int = 1024,
    plain: bool = False,
) -> RunOutcome:
    """balanced-separator recursion over H + f(H,k)

    With `plain` the subedge closure is skipped; a NO is then only reported
    as UNKNOWN since it no longer rules out a GHD.

    Raises:
        SubedgeCapExceeded: when f(H,k) is larger than `cap`
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    deadline = Deadline(timeout, stop_event, check_every)
    search = None
    try:
        host = hypergraph if plain else _augmented(hypergraph, k, cap, deadline)
        search = BalancedSeparatorSearch(host, k, deadline, edge_order(host, seed))
        witness = search.run()
    except SearchTimeout as e:
        return _timed_out(
            "balsep", hypergraph, k, deadline, search.expanded if search else 0, e
        )
    outcome = _accept("balsep", hypergraph, k, witness, deadline, search.expanded)
    if plain and outcome.status == Status.NO:
        outcome.status = Status.UNKNOWN
        outcome.message = "no balanced separator without subedges"
    return outcome


METHODS = {
    "global": decide_ghw_global,
    "local": decide_ghw_local,
    "balsep": decide_ghw_balsep,
}


def decide_ghw(hypergraph: Hypergraph, k: int, method: str = "portfolio", **kwargs) -> RunOutcome:
    """dispatches to one decider by name, or to the portfolio"""
    if method == "portfolio":
        return portfolio_ghw(hypergraph, k, **kwargs)
    try:
        decider = METHODS[method]
    except KeyError:
        logger.error(f"Unknown ghw method {method}.")
        raise ValueError(f"unknown ghw method {method}") from None
    return decider(hypergraph, k, **kwargs)


def portfolio_ghw(
    hypergraph: Hypergraph,
    k: int,
    timeout: float | None = None,
    cap: int = DEFAULT_CAP,
    methods: Sequence[str] = ("global", "local", "balsep"),
    stop_event: threading.Event | None = None,
    seed: int | None = None,
) -> RunOutcome:
    """races the deciders and returns the first definite answer

    The runs share a stop flag that is set as soon as one answers YES or
    NO; the others notice it at their next poll. Failing members count as
    non-answers.

    Returns:
        RunOutcome: the winner's outcome tagged with its method, TIMEOUT when
        nobody answered, ERROR when every member failed
    """
    stop = stop_event or threading.Event()
    started = time.monotonic()
    winner = None
    failures = []
    with ThreadPoolExecutor(max_workers=len(methods)) as executor:
        futures = {
            executor.submit(
                METHODS[name],
                hypergraph,
                k,
                timeout=timeout,
                cap=cap,
                stop_event=stop,
                seed=seed,
            ): name
            for name in methods
        }
        for future in as_completed(futures):
            name = futures[future]
            try:
                outcome = future.result()
            except Exception as e:
                logger.warning(f"Portfolio member {name} failed on {hypergraph.name}: {e}")
                failures.append(f"{name}: {e}")
                continue
            logger.debug(f"Portfolio member {name} returned {outcome.status.value}.")
            if winner is None and outcome.status.definite:
                winner = outcome
                stop.set()
    elapsed = int((time.monotonic() - started) * 1000)
    if winner is not None:
        logger.info(
            f"Portfolio on {hypergraph.name} at k={k}: {winner.status.value} by {winner.method} "
            f"in {winner.elapsed_ms} ms."
        )
        return winner
    if len(failures) == len(methods):
        return RunOutcome(Status.ERROR, elapsed_ms=elapsed, method="portfolio", message="; ".join(failures))
    return RunOutcome(Status.TIMEOUT, elapsed_ms=elapsed, method="portfolio", message="; ".join(failures))


BRUTE_FORCE_MAX_EDGES = 6
BRUTE_FORCE_MAX_VERTICES = 8


def elimination_width(hypergraph: Hypergraph, cost: Callable[[VertexSet], Any]):
    """least, over vertex elimination orderings, of the largest cost of an elimination bag

    The bag of v is v together with every vertex it reaches through vertices
    eliminated before it. Exponential in |V|.
    """
    n = hypergraph.num_vertices
    adjacency = [
        hypergraph.union_of(hypergraph.incidence[v]) & ~(1 << v) for v in range(n)
    ]
    costs: dict[int, Any] = {}

    def bag_cost(bag: int):
        if bag not in costs:
            costs[bag] = cost(bag)
        return costs[bag]

    def neighbourhood(eliminated: int, v: int) -> int:
        seen = 1 << v
        frontier = [v]
        reached = 0
        while frontier:
            x = frontier.pop()
            for u in iter_bits(adjacency[x] & ~seen):
                seen |= 1 << u
                if eliminated >> u & 1:
                    frontier.append(u)
                else:
                    reached |= 1 << u
        return reached

    best: list[Any] = [0] * (1 << n)
    for subset in sorted(range(1, 1 << n), key=popcount):
        best[subset] = min(
            max(
                best[subset & ~(1 << v)],
                bag_cost(neighbourhood(subset & ~(1 << v), v) | 1 << v),
            )
            for v in iter_bits(subset)
        )
    return best[(1 << n) - 1]


def check_brute_force_size(hypergraph: Hypergraph, what: str) -> None:
    if (
        hypergraph.num_edges > BRUTE_FORCE_MAX_EDGES
        or hypergraph.num_vertices > BRUTE_FORCE_MAX_VERTICES
    ):
        raise ValueError(
            f"brute force {what} limited to {BRUTE_FORCE_MAX_EDGES} edges and {BRUTE_FORCE_MAX_VERTICES} vertices"
        )


def brute_force_ghw(hypergraph: Hypergraph) -> int:
    """exact ghw by dynamic programming over elimination orderings

    ghw is the least, over vertex elimination orderings, of the largest
    integral edge cover number of an elimination bag. Small hypergraphs only.

    Raises:
        ValueError: when H has more than 6 edges or 8 vertices
    """
    check_brute_force_size(hypergraph, "ghw")

    def rho(bag: int) -> int:
        for size in range(1, hypergraph.num_edges + 1):
            if any(
                bag & ~hypergraph.union_of(sum(1 << e for e in chosen)) == 0
                for chosen in combinations(range(hypergraph.num_edges), size)
            ):
                return size
        return hypergraph.num_edges

    return elimination_width(hypergraph, rho)
