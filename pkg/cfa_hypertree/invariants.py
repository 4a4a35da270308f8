"""Structural properties of hypergraphs reported by `hg-stats`."""

import logging
from dataclasses import dataclass
from itertools import combinations

from cfa_hypertree.helpers import Deadline, SearchTimeout, iter_bits, popcount
from cfa_hypertree.hgcore import Hypergraph, VertexSet

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class VcResult:
    """VC-dimension value; `exact` is False when the budget ran out first."""

    value: int
    exact: bool = True

    def __str__(self) -> str:
        return str(self.value) if self.exact else f"≥{self.value}"


@dataclass(frozen=True)
class StatsRecord:
    num_vertices: int
    num_edges: int
    arity: int
    degree: int
    iwidth: int
    miwidth3: int
    miwidth4: int
    vc_dim: VcResult

    def as_tuple(self) -> tuple:
        return (
            self.num_vertices,
            self.num_edges,
            self.arity,
            self.degree,
            self.iwidth,
            self.miwidth3,
            self.miwidth4,
            self.vc_dim.value,
        )

    def as_dict(self) -> dict:
        """CSV-ready column values; a VC lower bound is rendered as `≥L`"""
        return {
            "num_vertices": self.num_vertices,
            "num_edges": self.num_edges,
            "arity": self.arity,
            "degree": self.degree,
            "bip": self.iwidth,
            "bmip3": self.miwidth3,
            "bmip4": self.miwidth4,
            "vc": str(self.vc_dim),
        }


def degree(hypergraph: Hypergraph) -> int:
    """maximum number of edges any vertex occurs in, 0 without edges"""
    return max((popcount(inc) for inc in hypergraph.incidence), default=0)


def intersection_width(hypergraph: Hypergraph) -> int:
    """maximum |e1 ∩ e2| over pairs of distinct edges, 0 with fewer than two edges"""
    edges = hypergraph.edges
    best = 0
    for i, e in enumerate(edges):
        if popcount(e) <= best:
            continue
        for f in edges[i + 1 :]:
            size = popcount(e & f)
            if size > best:
                best = size
    return best


def multi_intersection_width(hypergraph: Hypergraph, c: int) -> int:
    """maximum |e1 ∩ ... ∩ ec| over c distinct edges

    Partial intersections that can no longer beat the best value found so
    far are abandoned; further edges are only drawn from those meeting the
    partial intersection.

    Raises:
        ValueError: when c < 2
    """
    if c < 2:
        logger.error(f"Multi-intersection width needs c >= 2, got {c}.")
        raise ValueError("c must be at least 2")
    edges = hypergraph.edges
    if len(edges) < c:
        return 0
    best = 0

    def extend(last: int, common: VertexSet, depth: int) -> None:
        nonlocal best
        if depth == c:
            best = max(best, popcount(common))
            return
        # only later edges touching the partial intersection can keep it nonempty
        candidates = hypergraph.edges_touching(common) >> (last + 1) << (last + 1)
        while candidates:
            low = candidates & -candidates
            j = low.bit_length() - 1
            candidates ^= low
            narrowed = common & edges[j]
            if popcount(narrowed) > best:
                extend(j, narrowed, depth + 1)

    for i, e in enumerate(edges):
        if popcount(e) > best:
            extend(i, e, 1)
    return best


def _shattered(edges: tuple[VertexSet, ...], subset: VertexSet, size: int) -> bool:
    traces = {e & subset for e in edges}
    return len(traces) == 1 << size


def vc_dimension(hypergraph: Hypergraph, time_budget: float | None = None) -> VcResult:
    """largest d such that some d-set X has E(H)|_X = 2^X

    The empty trace counts as well, so a shattered X needs an edge disjoint
    from it. Shattered sets are closed under subsets, so candidates of size
    d are built from shattered sets of size d-1 and kept only when all their
    (d-1)-subsets are shattered.

    Args:
        hypergraph (Hypergraph): the hypergraph
        time_budget (float): seconds allowed, None for no limit

    Returns:
        VcResult: exact value, or the largest verified d flagged as lower bound
    """
    edges = tuple(dict.fromkeys(hypergraph.edges))
    if not edges:
        return VcResult(0)
    deadline = Deadline(time_budget, check_every=256)
    level = {0}
    best = 0
    size = 0
    try:
        while level:
            size += 1
            if len(edges) < 1 << size:
                break
            next_level = set()
            for base in sorted(level):
                top = base.bit_length()
                for v in range(top, hypergraph.num_vertices):
                    candidate = base | 1 << v
                    deadline.tick()
                    if size > 1 and any(
                        candidate & ~(1 << u) not in level
                        for u in iter_bits(candidate)
                        if u != v
                    ):
                        continue
                    if _shattered(edges, candidate, size):
                        next_level.add(candidate)
            if next_level:
                best = size
            level = next_level
    except SearchTimeout:
        logger.warning(
            f"VC-dimension of {hypergraph.name} exceeded its budget; reporting lower bound {best}."
        )
        return VcResult(best, exact=False)
    logger.debug(f"VC-dimension of {hypergraph.name} is {best}.")
    return VcResult(best)


def stats(hypergraph: Hypergraph, vc_budget: float | None = None) -> StatsRecord:
    """collects all structural properties of a hypergraph"""
    record = StatsRecord(
        num_vertices=hypergraph.num_vertices,
        num_edges=hypergraph.num_edges,
        arity=hypergraph.arity,
        degree=degree(hypergraph),
        iwidth=intersection_width(hypergraph),
        miwidth3=multi_intersection_width(hypergraph, 3),
        miwidth4=multi_intersection_width(hypergraph, 4),
        vc_dim=vc_dimension(hypergraph, vc_budget),
    )
    logger.info(f"Stats for {hypergraph.name}: {record.as_dict()}")
    return record


def brute_force_vc_dimension(hypergraph: Hypergraph) -> int:
    """VC-dimension by checking every vertex subset (small hypergraphs only)"""
    edges = tuple(hypergraph.edges)
    best = 0
    for size in range(1, hypergraph.num_vertices + 1):
        for chosen in combinations(range(hypergraph.num_vertices), size):
            subset = sum(1 << v for v in chosen)
            if _shattered(edges, subset, size):
                best = size
                break
    return best
