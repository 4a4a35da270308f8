"""Fractional edge covers and fractional improvement of decompositions."""

import logging
import threading
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from cfa_hypertree.decomp import (
    DecompNode,
    Decomposition,
    DecompositionError,
    EdgeCover,
    Kind,
    check_fhd,
)
from cfa_hypertree.ghdsearch import check_brute_force_size, elimination_width
from cfa_hypertree.hdsearch import RunOutcome, Status, decide_hw
from cfa_hypertree.helpers import HypertreeError, iter_bits, snap_fraction
from cfa_hypertree.hgcore import EdgeSet, Hypergraph, VertexSet
from cfa_hypertree.simplex import LinearProgram, LpStatus, solve

logger = logging.getLogger(__name__)

EPSILON = 1e-6

# (bucket, improvement tried) pairs in evaluation order
BUCKETS = (("≥1", 1.0), ("[0.5,1)", 0.5), ("[0.1,0.5)", 0.1))
NO_BUCKET = "no"


class InfeasibleCoverError(HypertreeError, ValueError):
    """Raised when some target vertex lies in no support edge."""


@dataclass(frozen=True)
class FracCover:
    cover: EdgeCover
    optimal: bool = True

    @property
    def weight(self) -> Fraction:
        return self.cover.weight


def _covering_matrix(
    hypergraph: Hypergraph, target: VertexSet, support: EdgeSet | None
) -> tuple[list[int], list[int], np.ndarray]:
    scope = hypergraph.all_edges if support is None else support
    columns = list(iter_bits(hypergraph.edges_touching(target) & scope))
    rows = list(iter_bits(target))
    missing = target & ~hypergraph.union_of(sum(1 << e for e in columns))
    if missing:
        names = hypergraph.vertex_names(missing)
        logger.error(f"Vertices {names} are covered by no support edge.")
        raise InfeasibleCoverError(f"no support edge covers {names}")
    matrix = np.array(
        [[1.0 if hypergraph.edges[e] >> v & 1 else 0.0 for e in columns] for v in rows]
    ).reshape(len(rows), len(columns))
    return rows, columns, matrix


def lp_min_cover(
    hypergraph: Hypergraph, target: VertexSet, support: EdgeSet | None = None
) -> FracCover:
    """minimum-weight fractional edge cover of the target vertices

    Args:
        hypergraph (Hypergraph): the hypergraph
        target (int): vertex mask to cover
        support (int): edge mask the cover may use, None for all edges

    Returns:
        FracCover: optimal weights, snapped to rationals with denominator <= 10**6

    Raises:
        InfeasibleCoverError: when a target vertex lies in no support edge
    """
    if not target:
        return FracCover(EdgeCover({}, 0, Fraction(0)))
    rows, columns, matrix = _covering_matrix(hypergraph, target, support)
    lp = LinearProgram(
        c=np.ones(len(columns)), A=matrix, b=np.ones(len(rows)), upper=np.ones(len(columns))
    )
    solution = solve(lp)
    if solution.status != LpStatus.OPTIMAL:
        logger.error("Covering LP reported infeasible although every vertex has an edge.")
        raise InfeasibleCoverError("covering LP is infeasible")
    weights = {
        e: snap_fraction(float(x)) for e, x in zip(columns, solution.x) if x > EPSILON / 10
    }
    cover = EdgeCover.from_weights(hypergraph, weights)
    return FracCover(cover)


def lp_max_packing(
    hypergraph: Hypergraph, target: VertexSet, support: EdgeSet | None = None
) -> float:
    """value of the dual of the covering LP: max Σ y_v s.t. each support edge holds total <= 1

    Raises:
        InfeasibleCoverError: when a target vertex lies in no support edge
    """
    if not target:
        return 0.0
    rows, columns, matrix = _covering_matrix(hypergraph, target, support)
    lp = LinearProgram(
        c=-np.ones(len(rows)),
        A=-matrix.T,
        b=-np.ones(len(columns)),
        upper=np.ones(len(rows)),
    )
    return -solve(lp).objective


def simple_improve(hypergraph: Hypergraph, decomposition: Decomposition) -> Decomposition:
    """replaces every node cover by an optimal fractional cover of its bag over all edges

    Tree shape, node ids and bags are kept.
    """
    decomposition = decomposition.project()
    nodes = []
    for node in decomposition.nodes.values():
        cover = lp_min_cover(hypergraph, node.bag)
        nodes.append(DecompNode(node.id, node.parent, node.bag, dict(cover.cover.weights)))
    improved = Decomposition(hypergraph, Kind.FHD, nodes)
    logger.debug(
        f"Simple improvement on {hypergraph.name}: width {decomposition.width()} -> {improved.width()}."
    )
    return improved


def frac_improve_search(
    hypergraph: Hypergraph,
    k: int,
    kprime: float,
    timeout: float | None = None,
    seed: int | None = None,
    stop_event: threading.Event | None = None,
) -> RunOutcome:
    """decides whether some HD of width <= k improves to an FHD of width <= k′

    The HD search additionally prunes every bag whose optimal fractional
    cover weighs more than k′ + 1e-6.

    Returns:
        RunOutcome: YES carrying the improved FHD, NO or TIMEOUT
    """
    if not 0 < kprime < k:
        logger.error(f"Fractional improvement needs 0 < k' < k, got k={k}, k'={kprime}.")
        raise ValueError("k' must satisfy 0 < k' < k")
    weights: dict[int, Fraction] = {}

    def light_enough(bag: int) -> bool:
        if bag not in weights:
            weights[bag] = lp_min_cover(hypergraph, bag).weight
        return weights[bag] <= kprime + EPSILON

    outcome = decide_hw(
        hypergraph,
        k,
        timeout,
        seed=seed,
        stop_event=stop_event,
        bag_filter=light_enough,
    )
    outcome.method = "frac"
    if outcome.status != Status.YES:
        return outcome
    improved = simple_improve(hypergraph, outcome.decomposition)
    violations = check_fhd(hypergraph, improved)
    if violations or improved.width() > kprime + EPSILON:
        logger.error(f"Fractional improvement produced an invalid FHD: {violations}")
        raise DecompositionError(f"invalid FHD witness for {hypergraph.name}")
    outcome.decomposition = improved
    logger.info(
        f"{hypergraph.name}: FHD of width {float(improved.width()):.6g} <= {kprime} from an HD of width <= {k}."
    )
    return outcome


@dataclass
class BucketResult:
    """Improvement bucket of an instance.

    Args:
        bucket (str): "≥1", "[0.5,1)", "[0.1,0.5)" or "no"
        timed_out (bool): some threshold ended in TIMEOUT
        outcomes (dict): k′ -> RunOutcome
    """

    bucket: str
    timed_out: bool = False
    outcomes: dict = field(default_factory=dict)

    def __str__(self) -> str:
        if self.bucket == NO_BUCKET and self.timed_out:
            return "no (timeout)"
        return self.bucket


def improvement_bucket(
    hypergraph: Hypergraph, k: int, timeout: float | None = None
) -> BucketResult:
    """tries k′ = k-1, k-0.5, k-0.1 in that order; the first YES names the bucket"""
    result = BucketResult(NO_BUCKET)
    for bucket, gain in BUCKETS:
        kprime = k - gain
        if kprime <= 0:
            continue
        outcome = frac_improve_search(hypergraph, k, kprime, timeout)
        result.outcomes[kprime] = outcome
        if outcome.status == Status.YES:
            result.bucket = bucket
            break
        if outcome.status == Status.TIMEOUT:
            result.timed_out = True
    logger.info(f"{hypergraph.name}: improvement bucket {result} at k={k}.")
    return result


def brute_force_fhw(hypergraph: Hypergraph) -> Fraction:
    """exact fhw by dynamic programming over elimination orderings

    Same ordering search as brute_force_ghw with the fractional edge cover
    number of each bag as its cost. Small hypergraphs only.

    Raises:
        ValueError: when H has more than 6 edges or 8 vertices
    """
    check_brute_force_size(hypergraph, "fhw")
    return elimination_width(hypergraph, lambda bag: lp_min_cover(hypergraph, bag).weight)
