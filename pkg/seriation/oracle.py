"""Exact brute-force reference and instance generators for tests."""
import itertools
import logging
from dataclasses import dataclass

import numpy as np

from config import ORACLE_MAX_N
from seriation.core import Dissimilarity, TotalOrder, sequence_violations, subinterval_max

logger = logging.getLogger(__name__)

BATCH_SIZE = 20000
PROFILES = ("line", "envelope")


class OracleLimitError(ValueError):
    """Matrix too large for exhaustive search."""


@dataclass(frozen=True)
class OracleResult:
    epsilon_star: float
    witness_order: TotalOrder


@dataclass(frozen=True)
class PlantedRobinson:
    d: Dissimilarity
    hidden_order: TotalOrder


def _orders(n: int):
    """All permutations with perm[0] < perm[-1], one per reversal class."""
    for perm in itertools.permutations(range(n)):
        if perm[0] < perm[-1]:
            yield perm


def exact_fit(d: Dissimilarity, max_n: int = ORACLE_MAX_N) -> OracleResult:
    """Minimum fixed-order error over every order (modulo reversal)."""
    if d.n > max_n:
        raise OracleLimitError(f"oracle limited to n <= {max_n}, got n={d.n}")
    if d.n <= 2:
        return OracleResult(0.0, TotalOrder.identity(d.n))
    best, witness = np.inf, None
    orders = _orders(d.n)
    while True:
        batch = np.array(list(itertools.islice(orders, BATCH_SIZE)), dtype=int)
        if batch.size == 0:
            break
        errors = sequence_violations(d.square, batch)
        k = int(np.argmin(errors))
        if errors[k] < best:
            best, witness = float(errors[k]), tuple(batch[k])
    logger.debug("Oracle n=%d: eps*=%s", d.n, best)
    return OracleResult(best, TotalOrder(witness))


def is_eps_robinsonian(d: Dissimilarity, eps: float, max_n: int = ORACLE_MAX_N) -> bool:
    return exact_fit(d, max_n).epsilon_star <= eps


def gen_robinson(n: int, seed: int | None = None, decimals: int = 6,
                 profile: str = "line", max_value: int = 20) -> PlantedRobinson:
    """Random Robinsonian matrix with the order it was planted under.

    ``line`` draws points on a line and passes their gaps through a random
    concave increasing profile h(t) = a·t + b·(1 − exp(−t/s)), then relabels
    the elements uniformly at random. ``envelope`` takes the subinterval
    maximum of a random integer matrix along a random hidden order, so rows
    plateau and jump.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if profile not in PROFILES:
        raise ValueError(f"unknown profile {profile!r}, expected one of {PROFILES}")
    rng = np.random.default_rng(seed)
    if profile == "envelope":
        hidden = TotalOrder(tuple(int(x) for x in rng.permutation(n)))
        raw = Dissimilarity(n, rng.integers(0, max_value + 1, size=n * (n - 1) // 2).astype(float))
        return PlantedRobinson(subinterval_max(raw, hidden), hidden)
    points = np.sort(rng.uniform(0.0, 10.0, size=n))
    a, b = rng.uniform(0.2, 1.0), rng.uniform(0.0, 5.0)
    s = rng.uniform(0.5, 5.0)
    gaps = np.abs(points[:, None] - points[None, :])
    positional = np.round(a * gaps + b * (1.0 - np.exp(-gaps / s)), decimals)
    perm = rng.permutation(n)
    labelled = np.zeros((n, n))
    labelled[np.ix_(perm, perm)] = positional
    return PlantedRobinson(Dissimilarity.from_square(labelled), TotalOrder(tuple(perm)))


def perturb(d: Dissimilarity, eta: float, seed: int | None = None, decimals: int | None = 6) -> Dissimilarity:
    """Add independent uniform noise in [−eta, eta] to every pair, floored at 0."""
    if eta < 0:
        raise ValueError("eta must be nonnegative")
    if eta == 0:
        return d
    rng = np.random.default_rng(seed)
    noise = rng.uniform(-eta, eta, size=d.values().size)
    if decimals is not None:
        noise = np.clip(np.round(noise, decimals), -eta, eta)
    return Dissimilarity(d.n, np.maximum(d.values() + noise, 0.0))
