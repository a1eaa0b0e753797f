"""Maximal chain, holes and segments of the canonical order.

Slots 0..p+1 hold the chain, slots 0 and p+1 being virtual endpoints that
carry no distances. Hole k (0 ≤ k ≤ p) is the gap between slot k and slot
k+1. An off-chain element x with a_i = max{a_k ≼ x} and a_j = min{x ≼ a_k}
has segment H(x) = H_ij made of holes i..j-1; holes i and j-1 are its
bounding holes.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum

import networkx as nx
import numpy as np

from seriation.canonical_order import PartialOrderRelation, RelationBuilder
from seriation.core import (
    PAIR_ADMISSIBLE_FACTOR, AlgorithmInvariantError, Dissimilarity, Infeasible,
    at_least, roughly_equal, sequence_violation, sequence_violations,
)

logger = logging.getLogger(__name__)


class PairClass(str, Enum):
    H1 = "H1"              # H(x) = H(y)
    H2 = "H2"              # disjoint
    H3 = "H3"              # overlap in at least two holes
    H4 = "H4"              # overlap in exactly one hole
    H5_LEFT = "H5-left"    # H(x) proper subinterval of H(y)
    H5_RIGHT = "H5-right"  # H(y) proper subinterval of H(x)


@dataclass(frozen=True)
class Segment:
    element: int
    i: int
    j: int
    d_x: float
    admissible: frozenset[int] = frozenset()
    ah: frozenset[int] = frozenset()

    @property
    def holes(self) -> range:
        return range(self.i, self.j)

    @property
    def bounding(self) -> tuple[int, int]:
        return self.i, self.j - 1


def maximal_chain(rel: PartialOrderRelation) -> tuple[int, ...]:
    """Longest chain of ≼, ties resolved by the lexicographic topological order."""
    if rel.n == 0:
        return ()
    dag = nx.DiGraph()
    dag.add_nodes_from(range(rel.n))
    dag.add_edges_from(rel.pairs())
    topo = list(nx.lexicographical_topological_sort(dag))
    return tuple(int(x) for x in nx.dag_longest_path(dag, topo_order=topo))


def midrange(values) -> float:
    """Midrange of the inner chain distances. A segment always has at least one inner slot."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise AlgorithmInvariantError("segment has no inner chain elements")
    return float(values.min() + values.max()) / 2


@dataclass
class ChainContext:
    d: Dissimilarity
    eps: float
    relation: PartialOrderRelation
    chain: tuple[int, ...]
    segments: dict[int, Segment] = field(default_factory=dict)

    # ── Geometry ──

    @property
    def p(self) -> int:
        return len(self.chain)

    @property
    def hole_count(self) -> int:
        return self.p + 1

    @property
    def offchain(self) -> list[int]:
        return sorted(self.segments)

    def slot(self, k: int) -> int | None:
        """Element at slot k, None for the virtual endpoints."""
        if 1 <= k <= self.p:
            return self.chain[k - 1]
        return None

    def hole_size(self, k: int) -> float | None:
        left, right = self.slot(k), self.slot(k + 1)
        if left is None or right is None:
            return None
        return self.d.value(left, right)

    def segment_of(self, x: int) -> tuple[int, int]:
        seg = self.segments[x]
        return seg.i, seg.j

    def d_x(self, x: int) -> float:
        return self.segments[x].d_x

    def classes(self) -> dict[tuple[int, int], list[int]]:
        """X_ij for every segment carrying at least one element."""
        groups: dict[tuple[int, int], list[int]] = {}
        for x in self.offchain:
            groups.setdefault(self.segment_of(x), []).append(x)
        return dict(sorted(groups.items()))

    # ── Insertions ──

    def insertion(self, placements: list[tuple[int, int]]) -> list[int]:
        """Chain with each (element, hole) inserted; same-hole elements keep list order."""
        seq: list[int] = []
        by_hole: dict[int, list[int]] = {}
        for x, k in placements:
            by_hole.setdefault(k, []).append(x)
        for k in range(self.hole_count):
            if k >= 1:
                seq.append(self.chain[k - 1])
            seq.extend(by_hole.get(k, ()))
        return seq

    def is_admissible_hole(self, x: int, k: int) -> bool:
        i, j = self.segment_of(x)
        if not i <= k < j:
            return False
        return sequence_violation(self.d.square, self.insertion([(x, k)])) <= self.eps

    def admissible_holes(self, x: int, i: int, j: int) -> frozenset[int]:
        holes = list(range(i, j))
        seqs = np.array([self.insertion([(x, k)]) for k in holes])
        ok = sequence_violations(self.d.square, seqs) <= self.eps
        return frozenset(k for k, good in zip(holes, ok) if good)

    def admissible_pair(self, x: int, k: int, y: int, k2: int, c: float) -> bool:
        """(x, y, c)-admissibility of holes k and k2."""
        if x == y:
            raise ValueError("admissible_pair needs two distinct elements")
        if not (self.is_admissible_hole(x, k) and self.is_admissible_hole(y, k2)):
            return False
        return bool(np.any(self._pair_violations(x, k, y, [k2]) <= c * self.eps))

    def _pair_violations(self, x: int, k: int, y: int, holes) -> np.ndarray:
        seqs = []
        for k2 in holes:
            seqs.append(self.insertion([(x, k), (y, k2)]))
            if k2 == k:
                seqs.append(self.insertion([(y, k2), (x, k)]))
        return sequence_violations(self.d.square, np.array(seqs))

    def _has_partner(self, x: int, k: int, y: int, y_holes: frozenset[int]) -> bool:
        if not y_holes:
            return False
        return bool(np.any(self._pair_violations(x, k, y, sorted(y_holes)) <= self.eps))

    # ── Classification ──

    def classify_pair(self, x: int, y: int) -> PairClass:
        i, j = self.segment_of(x)
        i2, j2 = self.segment_of(y)
        return classify_segments((i, j), (i2, j2))

    # ── Diagnostics ──

    def hole_size_violations(self) -> list[str]:
        found = []
        sq = self.d.square
        eps = self.eps
        for x, seg in self.segments.items():
            inner = [self.slot(s) for s in range(seg.i + 1, seg.j)]
            for k in seg.admissible:
                if not seg.i < k < seg.j - 1:
                    continue
                a, b = self.slot(k), self.slot(k + 1)
                if not (roughly_equal(sq[x, a], seg.d_x, 1, eps)
                        and roughly_equal(sq[x, b], seg.d_x, 1, eps)
                        and roughly_equal(self.hole_size(k), seg.d_x, 3, eps)):
                    found.append(f"inner hole {k} of element {x}")
            for a in inner:
                for b in inner:
                    if a != b and not at_least(seg.d_x, sq[a, b], 3, eps):
                        found.append(f"d_x of element {x} below chain pair ({a}, {b})")
        return found

    def pairwise_violations(self, limit: int = 10) -> list[str]:
        """Pairs of off-chain elements with no (x, y, 12)-admissible pair of bounding holes."""
        found = []
        xs = self.offchain
        for a, x in enumerate(xs):
            for y in xs[a + 1:]:
                bx = set(self.segments[x].bounding) & self.segments[x].admissible
                by = set(self.segments[y].bounding) & self.segments[y].admissible
                if not any(self.admissible_pair(x, k, y, k2, PAIR_ADMISSIBLE_FACTOR)
                           for k in sorted(bx) for k2 in sorted(by)):
                    found.append(f"elements {x} and {y} ({self.classify_pair(x, y).value})")
                    if len(found) >= limit:
                        return found
        return found


def classify_segments(sx: tuple[int, int], sy: tuple[int, int]) -> PairClass:
    i, j = sx
    i2, j2 = sy
    if (i, j) == (i2, j2):
        return PairClass.H1
    shared = min(j, j2) - max(i, i2)
    if shared <= 0:
        return PairClass.H2
    if i2 <= i and j <= j2:
        return PairClass.H5_LEFT
    if i <= i2 and j2 <= j:
        return PairClass.H5_RIGHT
    return PairClass.H3 if shared >= 2 else PairClass.H4


def segment_bounds(d: Dissimilarity, rel: PartialOrderRelation,
                  chain: tuple[int, ...]) -> dict[int, tuple[int, int, float]]:
    on_chain = set(chain)
    p = len(chain)
    result = {}
    for x in range(d.n):
        if x in on_chain:
            continue
        i = max((s for s in range(1, p + 1) if rel.before(chain[s - 1], x)), default=0)
        j = min((s for s in range(1, p + 1) if rel.before(x, chain[s - 1])), default=p + 1)
        if j - i < 2:
            raise AlgorithmInvariantError(f"element {x} fits between consecutive chain slots {i}, {j}")
        inner = [d.value(x, chain[s - 1]) for s in range(i + 1, j)]
        result[x] = (i, j, midrange(inner))
    return result


def build_chain_context(d: Dissimilarity, eps: float,
                        builder: RelationBuilder) -> ChainContext | Infeasible:
    """Chain, segments and AH(x), augmenting ≼ until every bounding hole is in AH."""
    bound = d.n * d.n + 1
    for rounds in range(bound):
        rel = builder.relation()
        chain = maximal_chain(rel)
        if sequence_violation(d.square, chain) > eps:
            return Infeasible(reason="maximal chain is not compatible")
        ctx = ChainContext(d=d, eps=eps, relation=rel, chain=chain)
        raw = segment_bounds(d, rel, chain)
        admissible = {}
        for x, (i, j, dx) in raw.items():
            ctx.segments[x] = Segment(element=x, i=i, j=j, d_x=dx)
            holes = ctx.admissible_holes(x, i, j)
            if not holes:
                return Infeasible(reason=f"element {x} has no admissible hole")
            admissible[x] = holes

        augment = []
        for x, (i, j, dx) in raw.items():
            ah = frozenset(
                k for k in admissible[x]
                if all(ctx._has_partner(x, k, y, admissible[y]) for y in raw if y != x)
            )
            ctx.segments[x] = Segment(element=x, i=i, j=j, d_x=dx,
                                      admissible=admissible[x], ah=ah)
            if i not in ah:
                augment.append((chain[i], x))
            if j - 1 not in ah:
                augment.append((x, chain[j - 2]))

        if not augment:
            logger.debug("Chain context at eps=%s: chain=%d, offchain=%d, rounds=%d",
                         eps, len(chain), len(raw), rounds)
            return ctx
        logger.debug("Augmenting canonical order with %d pairs", len(augment))
        if not builder.add_all(augment):
            return builder.contradiction
    raise AlgorithmInvariantError(f"augmentation did not settle within {bound} rounds")
