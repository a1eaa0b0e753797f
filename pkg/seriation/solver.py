"""Factor-16 l∞ fitting by a Robinsonian dissimilarity.

``fit`` searches the candidate list Δ for the smallest ε at which
``Refiner`` assembles an order; every assembled order is checked to be
16ε-compatible before it is accepted. An ``Infeasible`` answer at ε means
no ε-compatible order exists.
"""
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import networkx as nx
import numpy as np

from config import DIAGNOSTICS, SEARCH_MODE, STRICT_VERIFY
from seriation import twosat
from seriation.canonical_order import RelationBuilder, canonical_property_violations
from seriation.cell_graphs import (
    CellDecomposition, CellDigraph, ClusterStructure, OmegaSets, SegmentMembers,
    build_cells, build_clusters, build_G, format_arcs, omega_sets,
)
from seriation.chain_holes import ChainContext, build_chain_context
from seriation.core import (
    APPROXIMATION_FACTOR, ARROW_MIDRANGE_GAP, ARROW_WITNESS_GAP,
    AlgorithmInvariantError, Dissimilarity, FitResult, Infeasible, TotalOrder,
    candidate_errors, compatibility_violation, fit_for_order, sequence_violation,
)

logger = logging.getLogger(__name__)

FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
REJECTED = "rejected"

SEARCH_MODES = ("binary", "linear")

SolveOutcome = TotalOrder | Infeasible


@dataclass(frozen=True)
class EpsilonAttempt:
    epsilon: float
    outcome: str
    reason: str = ""


@dataclass
class CellGroup:
    """Ordered cells of X⁺_ij (placed in hole j-1) or X⁻_ij (placed in hole i)."""
    segment: tuple[int, int]
    plus: bool
    cells: list[tuple[int, ...]]
    seeds: list[list[tuple[int, int]]] = field(default_factory=list)

    @property
    def hole(self) -> int:
        i, j = self.segment
        return j - 1 if self.plus else i


@dataclass
class HolePlan:
    """Cell groups per hole, left to right."""
    holes: dict[int, list[CellGroup]] = field(default_factory=dict)

    def add(self, group: CellGroup):
        if group.cells:
            self.holes.setdefault(group.hole, []).append(group)

    def ordered(self, hole: int) -> list[CellGroup]:
        # X⁺ groups by increasing segment start, then X⁻ groups by decreasing segment end
        groups = self.holes.get(hole, [])
        plus = sorted((g for g in groups if g.plus), key=lambda g: g.segment[0])
        minus = sorted((g for g in groups if not g.plus), key=lambda g: -g.segment[1])
        return plus + minus


@dataclass
class SegmentPlan:
    segment: tuple[int, int]
    minus: CellGroup
    plus: CellGroup
    decomposition: CellDecomposition
    clusters: ClusterStructure
    digraph: CellDigraph
    phi: twosat.TwoSatInstance


# ── Φ and the bipartition ───────────────────────────────────────────────

def build_phi(g: CellDigraph, cs: ClusterStructure,
              omega: dict[int, OmegaSets] | None = None) -> twosat.TwoSatInstance:
    """One variable per cell; same cluster equal, twins and Ω arcs apart."""
    inst = twosat.TwoSatInstance(var_count=g.count)
    for k, cluster in enumerate(cs.clusters):
        for a in range(len(cluster)):
            for b in range(a + 1, len(cluster)):
                inst.add(*twosat.encode_equal(cluster[a], cluster[b]))
        twin = cs.twin[k]
        if twin is not None and twin > k:
            for c1 in cluster:
                for c2 in cs.clusters[twin]:
                    inst.add(*twosat.encode_not_equal(c1, c2))
    for c, sets in sorted((omega or {}).items()):
        for tail, _ in sets.one + sets.two:
            inst.add(*twosat.encode_not_equal(c, tail))
        for _, head in sets.three:
            inst.add(*twosat.encode_not_equal(c, head))
    return inst


def _cell_key(cd: CellDecomposition, c: int) -> int:
    return min(cd.cell_elements(c))


def partition_and_sort(ctx: ChainContext, i: int, j: int) -> SegmentPlan | Infeasible:
    sm = SegmentMembers.from_context(ctx, i, j)
    cd = build_cells(sm)
    cs = build_clusters(cd)
    if isinstance(cs, Infeasible):
        return cs
    g = build_G(cd, cs)
    if isinstance(g, Infeasible):
        return g
    omega = omega_sets(g, cs)
    phi = build_phi(g, cs, omega)
    assignment = twosat.solve(phi)
    if isinstance(assignment, twosat.Unsatisfiable):
        return Infeasible(reason=f"cell bipartition of X_{i},{j} unsatisfiable: {assignment.reason}")

    sides = {False: [], True: []}
    for c in range(g.count):
        sides[assignment[c]].append(c)
    orders = {}
    for side, cells in sides.items():
        sub = g.graph(cells=cells)
        if not nx.is_directed_acyclic_graph(sub):
            raise AlgorithmInvariantError(f"X_{i},{j} side {int(side)} is cyclic after the bipartition")
        topo = list(nx.lexicographical_topological_sort(sub, key=lambda c: _cell_key(cd, c)))
        orders[side] = topo if side else topo[::-1]

    def group(plus: bool) -> CellGroup:
        cells, seeds = [], []
        for c in orders[plus]:
            members = cd.cells[c]
            cells.append(tuple(sm.members[x] for x in members))
            pairs = [(sm.members[x], sm.members[y])
                     for x in members for y in members if cd.arrow[x, y]]
            seeds.append(pairs if plus else [(y, x) for x, y in pairs])
        return CellGroup(segment=(i, j), plus=plus, cells=cells, seeds=seeds)

    logger.debug("X_%d,%d: %d cells left, %d cells right", i, j, len(orders[False]), len(orders[True]))
    return SegmentPlan(segment=(i, j), minus=group(False), plus=group(True),
                       decomposition=cd, clusters=cs, digraph=g, phi=phi)


# ── Diagnostics ─────────────────────────────────────────────────────────

def plus_order_violations(ctx: ChainContext, plan: SegmentPlan) -> list[str]:
    """Consecutive cells of the right-hand side must respect the d_x and distance order."""
    eps = ctx.eps
    sq = ctx.d.square
    left = [x for cell in plan.minus.cells for x in cell]
    found = []
    for first, second in zip(plan.plus.cells, plan.plus.cells[1:]):
        for y in first:
            for z in second:
                if ctx.d_x(y) > ctx.d_x(z) + ARROW_MIDRANGE_GAP * eps:
                    found.append(f"d_x order of {y} before {z}")
                for x in left:
                    if sq[x, y] > sq[x, z] + ARROW_WITNESS_GAP * eps:
                        found.append(f"distance from {x} to {y} before {z}")
    return found


def cell_triple_violations(sq: np.ndarray, placed: list[list[int]], eps: float) -> list[str]:
    """For x, y, z from three placed cells in that order, d(x,z) ≳_16 max{d(x,y), d(y,z)}."""
    found = []
    for a in range(len(placed)):
        for b in range(a + 1, len(placed)):
            for c in range(b + 1, len(placed)):
                xs, ys, zs = placed[a], placed[b], placed[c]
                outer = sq[np.ix_(xs, zs)][:, None, :]
                legs = np.maximum(sq[np.ix_(xs, ys)][:, :, None], sq[np.ix_(ys, zs)][None, :, :])
                if np.any(outer < legs - APPROXIMATION_FACTOR * eps):
                    found.append(f"cells {a}, {b}, {c}")
    return found


# ── Refine ──────────────────────────────────────────────────────────────

class Refiner:
    """Builds a 16ε-compatible order of a subset of the ground set, or proves none is ε-compatible."""

    def __init__(self, d: Dissimilarity, eps: float, diagnostics: bool = DIAGNOSTICS,
                 dump_dir: Path | None = None):
        self.d = d
        self.eps = eps
        self.diagnostics = diagnostics
        self.dump_dir = Path(dump_dir) if dump_dir else None
        self.stats = {"calls": 0, "max_depth": 0, "segments": 0, "dumps": 0}

    def refine(self, elements: Sequence[int], seed_pairs: Sequence[tuple[int, int]] = (),
               depth: int = 0) -> list[int] | Infeasible:
        """Order ``elements`` (ids of the full matrix) or report infeasibility."""
        elements = [int(x) for x in elements]
        self.stats["calls"] += 1
        self.stats["max_depth"] = max(self.stats["max_depth"], depth)
        m = len(elements)
        if m <= 2:
            if m == 2 and any(p == (elements[1], elements[0]) for p in seed_pairs):
                elements.reverse()
            return elements

        local = {x: k for k, x in enumerate(elements)}
        sub = self.d.restrict(elements)
        builder = RelationBuilder(sub, self.eps)
        seeds = [(local[x], local[y]) for x, y in seed_pairs] or [(0, 1)]
        if not builder.add_all(seeds):
            return _globalise(builder.contradiction, elements)
        rel = builder.relation()
        if rel.is_total():
            return [elements[x] for x in rel.as_total_order()]

        ctx = build_chain_context(sub, self.eps, builder)
        if isinstance(ctx, Infeasible):
            return _globalise(ctx, elements)
        if self.diagnostics:
            self._log_diagnostics("hole size", ctx.hole_size_violations())
            self._log_diagnostics("pairwise admissibility", ctx.pairwise_violations())

        plan = HolePlan()
        for (i, j) in ctx.classes():
            self.stats["segments"] += 1
            seg = partition_and_sort(ctx, i, j)
            if isinstance(seg, Infeasible):
                return _globalise(seg, elements)
            if self.dump_dir is not None:
                self._dump(seg, elements, depth)
            if self.diagnostics:
                self._log_diagnostics("cell order", plus_order_violations(ctx, seg))
            plan.add(seg.minus)
            plan.add(seg.plus)

        order: list[int] = []
        for hole in range(ctx.hole_count):
            if hole >= 1:
                order.append(elements[ctx.chain[hole - 1]])
            placed = []
            for group in plan.ordered(hole):
                for cell, seeds in zip(group.cells, group.seeds):
                    if len(cell) >= m:
                        raise AlgorithmInvariantError(f"cell of {len(cell)} elements does not shrink {m}")
                    cell_ids = [elements[x] for x in cell]
                    cell_seeds = [(elements[x], elements[y]) for x, y in seeds]
                    inner = self.refine(cell_ids, cell_seeds, depth + 1)
                    if isinstance(inner, Infeasible):
                        return inner
                    placed.append(inner)
            if self.diagnostics and len(placed) >= 3:
                self._log_diagnostics("cell triple",
                                      cell_triple_violations(self.d.square, placed, self.eps))
            for cell_order in placed:
                order.extend(cell_order)

        if len(order) != m:
            raise AlgorithmInvariantError(f"assembled {len(order)} of {m} elements")
        # the properties only hold when some eps-compatible order exists
        if self.diagnostics and depth == 0 and sequence_violation(self.d.square, order) <= self.eps:
            self._log_diagnostics("canonical order",
                                  canonical_property_violations(sub, rel, self.eps))
        return order

    def _log_diagnostics(self, name: str, found: list[str]):
        if found:
            logger.warning("Diagnostic %s at eps=%s: %d violations (first: %s)",
                           name, self.eps, len(found), found[0])

    def _dump(self, seg: SegmentPlan, elements: list[int], depth: int):
        self.dump_dir.mkdir(parents=True, exist_ok=True)
        self.stats["dumps"] += 1
        i, j = seg.segment
        stem = self.dump_dir / f"{self.stats['dumps']:03d}_depth{depth}_X{i}_{j}"
        header = "# elements " + " ".join(str(x) for x in elements) + "\n"
        stem.with_suffix(".graph").write_text(
            header + format_arcs(seg.decomposition, seg.clusters, seg.digraph))
        stem.with_suffix(".cnf").write_text(
            twosat.to_dimacs(seg.phi, comment=f"X_{i},{j} eps={self.eps!r} depth={depth}"))


def _globalise(result: Infeasible, elements: list[int]) -> Infeasible:
    if result.pair is None:
        return result
    x, y = result.pair
    return Infeasible(reason=result.reason, pair=(elements[x], elements[y]))


def refine(d: Dissimilarity, eps: float, elements: Sequence[int] | None = None,
           seed_pairs: Sequence[tuple[int, int]] = ()) -> SolveOutcome:
    elements = list(range(d.n)) if elements is None else list(elements)
    result = Refiner(d, eps).refine(elements, seed_pairs)
    if isinstance(result, Infeasible):
        return result
    return TotalOrder(tuple(result))


# ── Verification and search ─────────────────────────────────────────────

def verify_16(d: Dissimilarity, order: TotalOrder | Sequence[int], eps: float) -> bool:
    return compatibility_violation(d, order) <= APPROXIMATION_FACTOR * eps


def attempt_epsilon(d: Dissimilarity, eps: float, strict: bool = STRICT_VERIFY,
                    diagnostics: bool = DIAGNOSTICS,
                    dump_dir: Path | None = None) -> tuple[TotalOrder | None, EpsilonAttempt]:
    refiner = Refiner(d, eps, diagnostics=diagnostics, dump_dir=dump_dir)
    try:
        result = refiner.refine(range(d.n))
        if isinstance(result, Infeasible):
            logger.debug("eps=%s infeasible: %s", eps, result.reason)
            return None, EpsilonAttempt(eps, INFEASIBLE, result.reason)
        result = TotalOrder(tuple(result))
        if not verify_16(d, result, eps):
            raise AlgorithmInvariantError(
                f"order violates 16-eps compatibility ({compatibility_violation(d, result)} > 16*{eps})")
    except AlgorithmInvariantError as exc:
        if strict:
            raise
        logger.error("eps=%s rejected: %s", eps, exc)
        return None, EpsilonAttempt(eps, REJECTED, str(exc))
    logger.debug("eps=%s feasible after %d refine calls", eps, refiner.stats["calls"])
    return result, EpsilonAttempt(eps, FEASIBLE)


def fit(d: Dissimilarity, search: str | None = None, strict: bool = STRICT_VERIFY,
        diagnostics: bool = DIAGNOSTICS, dump_dir: Path | None = None) -> FitResult:
    search = search or SEARCH_MODE
    if search not in SEARCH_MODES:
        raise ValueError(f"unknown search mode {search!r}, expected one of {SEARCH_MODES}")
    if d.n == 1:
        return replace(fit_for_order(d, TotalOrder.identity(1)), search_mode=search,
                       accepted_epsilon=0.0)

    deltas = candidate_errors(d)
    attempts: list[EpsilonAttempt] = []
    found: dict[int, TotalOrder | None] = {}

    def attempt_at(k: int) -> bool:
        if k not in found:
            order, attempt = attempt_epsilon(d, deltas[k], strict=strict, diagnostics=diagnostics)
            found[k] = order
            attempts.append(attempt)
        return found[k] is not None

    best = None
    if search == "binary":
        if attempt_at(0):
            best = 0
        else:
            lo, hi = 1, len(deltas) - 1
            while lo <= hi:
                mid = (lo + hi) // 2
                if attempt_at(mid):
                    best, hi = mid, mid - 1
                else:
                    lo = mid + 1
    else:
        for k in range(len(deltas)):
            if attempt_at(k):
                best = k
                break

    if best is None:
        best = len(deltas) - 1
        order = TotalOrder.identity(d.n)
        if not verify_16(d, order, deltas[best]):
            raise AlgorithmInvariantError("largest candidate error does not admit the identity order")
        found[best] = order
        attempts.append(EpsilonAttempt(deltas[best], FEASIBLE, "fallback to the identity order"))
        logger.warning("No candidate accepted; falling back to the identity order at eps=%s", deltas[best])

    eps = deltas[best]
    if dump_dir is not None:
        attempt_epsilon(d, eps, strict=False, diagnostics=False, dump_dir=dump_dir)
    result = replace(fit_for_order(d, found[best]), accepted_epsilon=eps,
                     search_mode=search, attempts=tuple(attempts))
    if result.achieved_error > APPROXIMATION_FACTOR * eps:
        raise AlgorithmInvariantError("achieved error exceeds 16 times the accepted epsilon")
    logger.info("Fit n=%d: |Δ|=%d, %s search, %d attempts, accepted eps=%s, error=%s",
                d.n, len(deltas), search, len(attempts), eps, result.achieved_error)
    return result


def compare_search_modes(d: Dissimilarity, strict: bool = STRICT_VERIFY) -> FitResult:
    """Binary-search fit annotated with whether linear search accepts the same ε."""
    binary = fit(d, "binary", strict=strict)
    linear = fit(d, "linear", strict=strict)
    agree = binary.accepted_epsilon == linear.accepted_epsilon
    if not agree:
        logger.warning("Search modes disagree: binary eps=%s, linear eps=%s",
                       binary.accepted_epsilon, linear.accepted_epsilon)
    return replace(binary, modes_agree=agree)
