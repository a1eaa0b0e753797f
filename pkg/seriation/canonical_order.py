"""Canonical partial order: betweenness observations closed to a fixpoint.

If d(x,y) > max{d(x,z), d(z,y)} + 2ε then z sits between x and y in every
ε-compatible order. Starting from one seed pair, those triples plus
transitivity orient as many pairs as they can; a pair forced both ways
means no ε-compatible order exists.
"""
import logging
from collections import defaultdict, deque
from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable

import numpy as np

from seriation.core import (
    BETWEENNESS_GAP, Dissimilarity, Infeasible, TotalOrder, as_order,
    roughly_equal, at_least,
)

logger = logging.getLogger(__name__)


class Relation(IntEnum):
    BEFORE = 1
    AFTER = -1
    UNKNOWN = 0


@dataclass(frozen=True)
class BetweennessTriple:
    x: int
    y: int
    z: int


class PartialOrderRelation:
    """Immutable ternary state matrix; ``state(x, y) == BEFORE`` means x ≼ y."""

    __slots__ = ("n", "_matrix")

    def __init__(self, matrix: np.ndarray):
        m = np.array(matrix, dtype=np.int8, copy=True)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("relation matrix must be square")
        if not np.array_equal(m, -m.T):
            raise ValueError("relation matrix must be antisymmetric")
        m.setflags(write=False)
        self.n = m.shape[0]
        self._matrix = m

    @classmethod
    def empty(cls, n: int) -> "PartialOrderRelation":
        return cls(np.zeros((n, n), dtype=np.int8))

    @classmethod
    def from_pairs(cls, n: int, pairs: Iterable[tuple[int, int]]) -> "PartialOrderRelation":
        m = np.zeros((n, n), dtype=np.int8)
        for x, y in pairs:
            m[x, y] = Relation.BEFORE
            m[y, x] = Relation.AFTER
        return cls(m)

    @property
    def matrix(self) -> np.ndarray:
        return self._matrix

    def state(self, x: int, y: int) -> Relation:
        return Relation(int(self._matrix[x, y]))

    def before(self, x: int, y: int) -> bool:
        return self._matrix[x, y] == Relation.BEFORE

    def comparable(self, x: int, y: int) -> bool:
        return self._matrix[x, y] != Relation.UNKNOWN

    def pairs(self) -> list[tuple[int, int]]:
        xs, ys = np.nonzero(self._matrix == Relation.BEFORE)
        return [(int(x), int(y)) for x, y in zip(xs, ys)]

    def is_total(self) -> bool:
        return len(self.incomparable_pairs()) == 0

    def incomparable_pairs(self) -> list[tuple[int, int]]:
        xs, ys = np.nonzero(np.triu(self._matrix == Relation.UNKNOWN, k=1))
        return [(int(x), int(y)) for x, y in zip(xs, ys)]

    def is_transitive(self) -> bool:
        b = (self._matrix == Relation.BEFORE).astype(np.int64)
        return not np.any(((b @ b) > 0) & (b == 0))

    def extends(self, order: "TotalOrder | list[int]") -> bool:
        """True when ``order`` is a linear extension of this relation."""
        pos = as_order(order).positions()
        xs, ys = np.nonzero(self._matrix == Relation.BEFORE)
        return bool(np.all(pos[xs] < pos[ys]))

    def dual(self) -> "PartialOrderRelation":
        return PartialOrderRelation(-self._matrix)

    def as_total_order(self) -> TotalOrder:
        """Linear order of a total relation, sorted by number of predecessors."""
        if not self.is_total():
            raise ValueError("relation is not total")
        preds = np.sum(self._matrix == Relation.AFTER, axis=1)
        return TotalOrder(tuple(int(x) for x in np.argsort(preds, kind="stable")))

    def __eq__(self, other) -> bool:
        if not isinstance(other, PartialOrderRelation):
            return NotImplemented
        return np.array_equal(self._matrix, other._matrix)

    __hash__ = None

    def __repr__(self) -> str:
        return f"PartialOrderRelation(n={self.n}, pairs={len(self.pairs())})"


# ── Betweenness ─────────────────────────────────────────────────────────

def betweenness_mask(d: Dissimilarity, eps: float) -> np.ndarray:
    """Boolean cube B[x, y, z], x < y, set when z must lie between x and y."""
    sq = d.square
    outer = sq[:, :, None]
    legs = np.maximum(sq[:, None, :], sq[None, :, :])
    mask = outer > legs + BETWEENNESS_GAP * eps
    mask &= np.triu(np.ones((d.n, d.n), dtype=bool), k=1)[:, :, None]
    return mask


def betweenness_triples(d: Dissimilarity, eps: float) -> list[BetweennessTriple]:
    if d.n < 3:
        return []
    xs, ys, zs = np.nonzero(betweenness_mask(d, eps))
    return [BetweennessTriple(int(x), int(y), int(z)) for x, y, z in zip(xs, ys, zs)]


# ── Closure engine ──────────────────────────────────────────────────────

class RelationBuilder:
    """Worklist closure of ≼ under transitivity and the betweenness rules.

    The relation is kept transitively closed after every insertion, so each
    newly oriented pair only needs to re-trigger the triples it belongs to.
    """

    def __init__(self, d: Dissimilarity, eps: float):
        self.n = d.n
        self.eps = eps
        self._state = np.zeros((d.n, d.n), dtype=np.int8)
        self._triples_by_pair: dict[tuple[int, int], list[BetweennessTriple]] = defaultdict(list)
        self.triple_count = 0
        for t in betweenness_triples(d, eps):
            self.triple_count += 1
            self._triples_by_pair[(t.x, t.y)].append(t)
            self._triples_by_pair[_key(t.x, t.z)].append(t)
            self._triples_by_pair[_key(t.z, t.y)].append(t)
        self.contradiction: Infeasible | None = None

    def relation(self) -> PartialOrderRelation:
        return PartialOrderRelation(self._state)

    def before(self, x: int, y: int) -> bool:
        return self._state[x, y] == Relation.BEFORE

    def add(self, x: int, y: int) -> bool:
        """Record x ≼ y and close. Returns False once a contradiction is found."""
        return self.add_all([(x, y)])

    def add_all(self, pairs: Iterable[tuple[int, int]]) -> bool:
        if self.contradiction is not None:
            return False
        queue: deque[tuple[int, int]] = deque()
        for x, y in pairs:
            if x == y:
                raise ValueError(f"cannot relate element {x} to itself")
            if not self._insert(x, y, queue):
                return False
        while queue:
            a, b = queue.popleft()
            for t in self._triples_by_pair.get(_key(a, b), ()):
                for u, v in _implied(t, a, b):
                    if not self._insert(u, v, queue):
                        return False
        return True

    def _insert(self, x: int, y: int, queue: deque) -> bool:
        state = self._state
        if state[x, y] == Relation.BEFORE:
            return True
        preds = np.flatnonzero(state[:, x] == Relation.BEFORE)
        succs = np.flatnonzero(state[y, :] == Relation.BEFORE)
        lower = np.append(preds, x)
        upper = np.append(succs, y)
        block = state[np.ix_(lower, upper)]
        if np.any((block == Relation.AFTER) | (lower[:, None] == upper[None, :])):
            self.contradiction = Infeasible(
                reason=f"canonical order forces {x} and {y} both ways", pair=(x, y))
            logger.debug("Contradiction at eps=%s on pair (%d, %d)", self.eps, x, y)
            return False
        new = np.argwhere(block == Relation.UNKNOWN)
        for r, c in new:
            u, v = int(lower[r]), int(upper[c])
            state[u, v] = Relation.BEFORE
            state[v, u] = Relation.AFTER
            queue.append((u, v))
        return True


def _key(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


def _implied(t: BetweennessTriple, a: int, b: int) -> list[tuple[int, int]]:
    """Pairs forced by a ≼ b given that t.z lies between t.x and t.y."""
    if {a, b} == {t.x, t.y}:
        return [(a, t.z), (t.z, b)]
    if a == t.z:
        end = b
        other = t.y if end == t.x else t.x
        return [(other, t.z)]
    end = a
    other = t.y if end == t.x else t.x
    return [(t.z, other)]


def build_canonical_order(d: Dissimilarity, eps: float,
                          seed: tuple[int, int] = (0, 1)) -> PartialOrderRelation | Infeasible:
    """Close the seed pair under the betweenness rules at ``eps``."""
    if d.n < 2:
        return PartialOrderRelation.empty(d.n)
    p, q = seed
    if p == q:
        raise ValueError("seed must be two distinct elements")
    builder = RelationBuilder(d, eps)
    if not builder.add(p, q):
        return builder.contradiction
    rel = builder.relation()
    logger.debug("Canonical order at eps=%s: %d triples, %d pairs, total=%s",
                 eps, builder.triple_count, len(rel.pairs()), rel.is_total())
    return rel


def close(rel: PartialOrderRelation, d: Dissimilarity, eps: float) -> PartialOrderRelation | Infeasible:
    """Re-run the closure from every pair already in ``rel``."""
    builder = RelationBuilder(d, eps)
    if not builder.add_all(rel.pairs()):
        return builder.contradiction
    return builder.relation()


# ── Diagnostics ─────────────────────────────────────────────────────────

def canonical_property_violations(d: Dissimilarity, rel: PartialOrderRelation,
                                  eps: float, limit: int = 10) -> list[str]:
    """Check the four distance properties of quintuple patterns in ≼.

    For w ≼ {v, z}, v ? z, u ≼ v, u ? z and w ? u the canonical order of a
    feasible instance satisfies:
    (i) d(v,w) ≈_2 d(z,w); (ii) d(v,z) ≲_2 min{d(v,w), d(z,w)};
    (iii) d(w,z) ≈_4 d(u,v) and d(u,z); (iv) d(w,u) ≲_2 min{d(w,v), d(u,v)}.
    Patterns without such a u are not constrained. Only meaningful when an
    ε-compatible order is known to exist.
    """
    sq = d.square
    m = rel.matrix
    n = rel.n
    found: list[str] = []
    for w in range(n):
        above = np.flatnonzero(m[w] == Relation.BEFORE)
        for v in above:
            for z in above:
                if v == z or m[v, z] != Relation.UNKNOWN:
                    continue
                us = [u for u in np.flatnonzero(m[:, v] == Relation.BEFORE)
                      if u not in (w, z) and m[u, z] == Relation.UNKNOWN
                      and m[w, u] == Relation.UNKNOWN]
                if not us:
                    continue
                if not roughly_equal(sq[v, w], sq[z, w], 2, eps):
                    found.append(f"(i) w={w} v={v} z={z}")
                if not at_least(min(sq[v, w], sq[z, w]), sq[v, z], 2, eps):
                    found.append(f"(ii) w={w} v={v} z={z}")
                for u in us:
                    if not (roughly_equal(sq[w, z], sq[u, v], 4, eps)
                            and roughly_equal(sq[w, z], sq[u, z], 4, eps)):
                        found.append(f"(iii) w={w} v={v} z={z} u={u}")
                    if not at_least(min(sq[w, v], sq[u, v]), sq[w, u], 2, eps):
                        found.append(f"(iv) w={w} v={v} z={z} u={u}")
                if len(found) >= limit:
                    return found
    return found
