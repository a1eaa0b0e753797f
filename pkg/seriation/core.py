"""Dissimilarity matrices, total orders and the optimal fit for a fixed order.

All epsilon thresholds are exact floating comparisons; inputs that need
bit-exact ties should be scaled to integers before fitting.
"""
import logging
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

logger = logging.getLogger(__name__)

# Multipliers of epsilon used by the threshold relations across the engine
BETWEENNESS_GAP = 2
SEPARATION_GAP = 3
ARROW_MIDRANGE_GAP = 4
L2_GAP = 5
STRONG_SEPARATION_GAP = 9
PAIR_ADMISSIBLE_FACTOR = 12
ARROW_WITNESS_GAP = 16
APPROXIMATION_FACTOR = 16


class DimensionMismatchError(ValueError):
    """Two matrices (or a matrix and an order) disagree on the element count."""


class AlgorithmInvariantError(RuntimeError):
    """A structural property the algorithm relies on does not hold."""


@dataclass(frozen=True)
class Infeasible:
    """Negative answer: no epsilon-compatible order exists."""
    reason: str
    pair: tuple[int, int] | None = None


# ── Threshold relations ─────────────────────────────────────────────────

def roughly_equal(a: float, b: float, c: float, eps: float) -> bool:
    """a ≈_c b, i.e. |a − b| ≤ c·eps."""
    return abs(a - b) <= c * eps


def at_least(a: float, b: float, c: float, eps: float) -> bool:
    """a ≳_c b, i.e. a ≥ b − c·eps."""
    return a >= b - c * eps


# ── Domain types ────────────────────────────────────────────────────────

class Dissimilarity:
    """Symmetric nonnegative matrix with zero diagonal.

    Only the strict upper triangle is stored, row by row; ``value`` maps any
    pair onto it so symmetry holds by construction.
    """

    __slots__ = ("n", "_flat", "_square")

    def __init__(self, n: int, flat: Iterable[float]):
        if n < 1:
            raise ValueError("a dissimilarity needs at least one element")
        values = np.array(list(flat) if not isinstance(flat, np.ndarray) else flat,
                          dtype=float).ravel()
        if values.size != n * (n - 1) // 2:
            raise DimensionMismatchError(
                f"expected {n * (n - 1) // 2} upper-triangle values for n={n}, got {values.size}")
        if not np.all(np.isfinite(values)):
            raise ValueError("dissimilarity values must be finite")
        if np.any(values < 0):
            raise ValueError("dissimilarity values must be nonnegative")
        values.setflags(write=False)
        self.n = n
        self._flat = values
        self._square = None

    @classmethod
    def from_square(cls, matrix, tolerance: float = 0.0) -> "Dissimilarity":
        """Build from a full square matrix, rejecting asymmetry beyond ``tolerance`` (relative)."""
        m = np.asarray(matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionMismatchError(f"matrix must be square, got shape {m.shape}")
        n = m.shape[0]
        scale = np.maximum(1.0, np.maximum(np.abs(m), np.abs(m.T)))
        if np.any(np.abs(np.diag(m)) > tolerance):
            raise ValueError("diagonal entries must be zero")
        if np.any(np.abs(m - m.T) > tolerance * scale):
            raise ValueError("matrix is not symmetric")
        sym = (m + m.T) / 2
        return cls(n, sym[np.triu_indices(n, k=1)])

    @classmethod
    def from_function(cls, n: int, fn) -> "Dissimilarity":
        return cls(n, [fn(x, y) for x in range(n) for y in range(x + 1, n)])

    def _index(self, x: int, y: int) -> int:
        a, b = (x, y) if x < y else (y, x)
        return a * (2 * self.n - a - 1) // 2 + (b - a - 1)

    def value(self, x: int, y: int) -> float:
        if x == y:
            return 0.0
        return float(self._flat[self._index(x, y)])

    def values(self) -> np.ndarray:
        """Read-only upper-triangle values."""
        return self._flat

    @property
    def square(self) -> np.ndarray:
        """Read-only full matrix (built once)."""
        if self._square is None:
            sq = np.zeros((self.n, self.n))
            iu = np.triu_indices(self.n, k=1)
            sq[iu] = self._flat
            sq[(iu[1], iu[0])] = self._flat
            sq.setflags(write=False)
            self._square = sq
        return self._square

    def restrict(self, elements: Sequence[int]) -> "Dissimilarity":
        idx = np.asarray(elements, dtype=int)
        return Dissimilarity.from_square(self.square[np.ix_(idx, idx)])

    def permuted(self, order: "TotalOrder | Sequence[int]") -> "Dissimilarity":
        """Matrix whose row k is the row of the k-th element of ``order``."""
        return self.restrict(as_order(order).perm)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dissimilarity):
            return NotImplemented
        return self.n == other.n and np.array_equal(self._flat, other._flat)

    __hash__ = None

    def __repr__(self) -> str:
        return f"Dissimilarity(n={self.n})"


@dataclass(frozen=True)
class TotalOrder:
    """A permutation of 0..n-1; ``perm[k]`` is the element at position k."""
    perm: tuple[int, ...]

    def __post_init__(self):
        perm = tuple(int(x) for x in self.perm)
        if sorted(perm) != list(range(len(perm))):
            raise ValueError(f"not a permutation of 0..{len(perm) - 1}: {perm}")
        object.__setattr__(self, "perm", perm)

    @classmethod
    def identity(cls, n: int) -> "TotalOrder":
        return cls(tuple(range(n)))

    def reversed(self) -> "TotalOrder":
        return TotalOrder(self.perm[::-1])

    def positions(self) -> np.ndarray:
        pos = np.empty(len(self.perm), dtype=int)
        pos[list(self.perm)] = np.arange(len(self.perm))
        return pos

    def __len__(self) -> int:
        return len(self.perm)

    def __iter__(self):
        return iter(self.perm)


def as_order(order: "TotalOrder | Sequence[int]") -> TotalOrder:
    return order if isinstance(order, TotalOrder) else TotalOrder(tuple(order))


@dataclass(frozen=True)
class FitResult:
    order: TotalOrder
    fitted: Dissimilarity
    achieved_error: float
    accepted_epsilon: float
    search_mode: str = "fixed"
    attempts: tuple = ()
    modes_agree: bool | None = None


class NestedGap(NamedTuple):
    outer: tuple[int, int]
    inner: tuple[int, int]
    gap: float


# ── Sub-interval maxima ─────────────────────────────────────────────────

def nested_max(block: np.ndarray) -> np.ndarray:
    """Upper-triangle maxima over nested pairs.

    ``block`` is a matrix (or a stack of matrices) already written in order
    coordinates. Entry [a, b], a < b, of the result is the max of
    block[u, v] over a ≤ u ≤ v ≤ b. The lower triangle is left untouched.
    """
    m = block.shape[-1]
    out = np.array(block, dtype=float, copy=True)
    for gap in range(2, m):
        i = np.arange(m - gap)
        out[..., i, i + gap] = np.maximum(
            block[..., i, i + gap],
            np.maximum(out[..., i + 1, i + gap], out[..., i, i + gap - 1]),
        )
    return out


def sequence_violation(square: np.ndarray, seq: Sequence[int]) -> float:
    """Least eps making the elements of ``seq``, in that order, eps-compatible."""
    m = len(seq)
    if m <= 2:
        return 0.0
    idx = np.asarray(seq, dtype=int)
    block = square[np.ix_(idx, idx)]
    gaps = nested_max(block) - block
    return max(float(gaps[np.triu_indices(m, k=1)].max()), 0.0) / 2


def sequence_violations(square: np.ndarray, seqs: np.ndarray) -> np.ndarray:
    """Batched ``sequence_violation`` over the rows of an equal-length (B, m) array."""
    seqs = np.asarray(seqs, dtype=int)
    if seqs.ndim != 2:
        raise ValueError("expected a 2-d array of sequences")
    batch, m = seqs.shape
    if m <= 2 or batch == 0:
        return np.zeros(batch)
    blocks = square[seqs[:, :, None], seqs[:, None, :]]
    rows, cols = np.triu_indices(m, k=1)
    gaps = (nested_max(blocks) - blocks)[:, rows, cols]
    return np.maximum(gaps.max(axis=1), 0.0) / 2


def _check_size(d: Dissimilarity, order: TotalOrder):
    if len(order) != d.n:
        raise DimensionMismatchError(f"order has {len(order)} elements, matrix has {d.n}")


# ── Operations ──────────────────────────────────────────────────────────

def linf_distance(d1: Dissimilarity, d2: Dissimilarity) -> float:
    if d1.n != d2.n:
        raise DimensionMismatchError(f"cannot compare n={d1.n} with n={d2.n}")
    if d1.n < 2:
        return 0.0
    return float(np.max(np.abs(d1.values() - d2.values())))


def compatibility_violation(d: Dissimilarity, order: "TotalOrder | Sequence[int]") -> float:
    """Least eps ≥ 0 such that ``order`` is eps-compatible with ``d``."""
    order = as_order(order)
    _check_size(d, order)
    return sequence_violation(d.square, order.perm)


def check_robinson(d: Dissimilarity, order: "TotalOrder | Sequence[int]") -> bool:
    return compatibility_violation(d, order) == 0.0


def subinterval_max(d: Dissimilarity, order: "TotalOrder | Sequence[int]") -> Dissimilarity:
    """The Robinsonian upper envelope of ``d`` along ``order``."""
    order = as_order(order)
    _check_size(d, order)
    if d.n <= 2:
        return d
    perm = np.asarray(order.perm)
    upper = np.triu(nested_max(d.square[np.ix_(perm, perm)]), k=1)
    result = np.empty((d.n, d.n))
    result[np.ix_(perm, perm)] = upper + upper.T
    return Dissimilarity.from_square(result)


def fit_for_order(d: Dissimilarity, order: "TotalOrder | Sequence[int]") -> FitResult:
    """Optimal l∞ fit by a Robinsonian dissimilarity compatible with ``order``."""
    order = as_order(order)
    envelope = subinterval_max(d, order)
    eps_tilde = linf_distance(d, envelope) / 2
    fitted = Dissimilarity(d.n, np.maximum(envelope.values() - eps_tilde, 0.0))
    return FitResult(order=order, fitted=fitted,
                     achieved_error=eps_tilde, accepted_epsilon=eps_tilde)


def nested_gap_witness(d: Dissimilarity, order: "TotalOrder | Sequence[int]") -> NestedGap | None:
    """The nested quadruple x ⪯ u ⪯ v ⪯ y maximizing d(u,v) − d(x,y)."""
    order = as_order(order)
    _check_size(d, order)
    if d.n < 2:
        return None
    perm = np.asarray(order.perm)
    block = d.square[np.ix_(perm, perm)]
    gaps = np.triu(nested_max(block) - block, k=1)
    gaps[np.tril_indices(d.n)] = -np.inf
    a, b = np.unravel_index(int(np.argmax(gaps)), gaps.shape)
    inner = np.triu(block[a:b + 1, a:b + 1], k=1)
    u, v = np.unravel_index(int(np.argmax(inner)), inner.shape)
    if inner[u, v] <= block[a, b]:
        u, v = 0, b - a
    return NestedGap(outer=(int(perm[a]), int(perm[b])),
                     inner=(int(perm[a + u]), int(perm[a + v])),
                     gap=float(gaps[a, b]))


def candidate_errors(d: Dissimilarity) -> list[float]:
    """Sorted set of halves of absolute differences of off-diagonal entries."""
    values = np.unique(d.values())
    if values.size == 0:
        return [0.0]
    halves = np.abs(values[:, None] - values[None, :]) / 2
    return [float(v) for v in np.unique(halves)]
