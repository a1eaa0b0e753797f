"""Blocks, cells, clusters and the cell digraph of one segment class X_ij.

Everything here works on local indices 0..m-1 of the class members; the
``members`` tuple maps them back to element ids.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum

import networkx as nx
import numpy as np

from seriation.chain_holes import ChainContext
from seriation.core import (
    ARROW_MIDRANGE_GAP, ARROW_WITNESS_GAP, L2_GAP, SEPARATION_GAP,
    STRONG_SEPARATION_GAP, AlgorithmInvariantError, Infeasible,
)

logger = logging.getLogger(__name__)


class ArcType(str, Enum):
    G1 = "G1"
    G2 = "G2"
    G3 = "G3"


class CycleKind(str, Enum):
    ONE = "1-cycle"
    TWO_AFTER = "2-cycle-after"     # tail -G2-> head -G2-> next, G3 path back to tail
    TWO_BEFORE = "2-cycle-before"   # prev -G2-> tail -G2-> head, G3 path back to prev


@dataclass(frozen=True, eq=False)
class SegmentMembers:
    """The members of X_ij with their pairwise distances and d_x values."""
    i: int
    j: int
    eps: float
    members: tuple[int, ...]
    dist: np.ndarray
    d_x: np.ndarray

    @classmethod
    def from_context(cls, ctx: ChainContext, i: int, j: int) -> "SegmentMembers":
        members = tuple(ctx.classes().get((i, j), ()))
        idx = np.asarray(members, dtype=int)
        return cls(i=i, j=j, eps=ctx.eps, members=members,
                   dist=np.array(ctx.d.square[np.ix_(idx, idx)]),
                   d_x=np.array([ctx.d_x(x) for x in members], dtype=float))

    @property
    def m(self) -> int:
        return len(self.members)

    def local(self, x: int) -> int:
        return self.members.index(x)

    def pair_max(self) -> np.ndarray:
        return np.maximum(self.d_x[:, None], self.d_x[None, :])


def _off_diagonal(mask: np.ndarray) -> np.ndarray:
    np.fill_diagonal(mask, False)
    return mask


def _pairs(mask: np.ndarray, members: tuple[int, ...]) -> set[tuple[int, int]]:
    xs, ys = np.nonzero(np.triu(mask, k=1))
    return {(members[x], members[y]) for x, y in zip(xs, ys)}


# ── Element relations ───────────────────────────────────────────────────

def linked_matrix(sm: SegmentMembers, gap: float = SEPARATION_GAP) -> np.ndarray:
    return _off_diagonal(sm.pair_max() > sm.dist + gap * sm.eps)


def separated_matrix(sm: SegmentMembers, gap: float = SEPARATION_GAP) -> np.ndarray:
    return _off_diagonal(sm.dist > sm.pair_max() + gap * sm.eps)


def linked_separated(sm: SegmentMembers) -> tuple[set[tuple[int, int]], set[tuple[int, int]]]:
    """Linked pairs d(x,y) ≪_3 max{d_x,d_y} and separated pairs d(x,y) ≫_3 max{d_x,d_y}."""
    return _pairs(linked_matrix(sm), sm.members), _pairs(separated_matrix(sm), sm.members)


def arrow_matrices(sm: SegmentMembers, linked: np.ndarray | None = None):
    """Return (arrow, midrange_gap, witness) boolean matrices.

    midrange_gap[x, y] is d_x ≪_4 d_y. witness[x, y] holds when some third
    member z, unlinked to both, has d(x,z) ≪_16 d(y,z). The arrow x ↣ y is
    midrange_gap, or witness together with d_x ≳_4 d_y.
    """
    eps = sm.eps
    if linked is None:
        linked = linked_matrix(sm)
    dx = sm.d_x
    gap = _off_diagonal(dx[None, :] > dx[:, None] + ARROW_MIDRANGE_GAP * eps)
    free = ~linked
    np.fill_diagonal(free, False)
    far = sm.dist[None, :, :] > sm.dist[:, None, :] + ARROW_WITNESS_GAP * eps
    witness = _off_diagonal((free[:, None, :] & free[None, :, :] & far).any(axis=2))
    not_below = dx[:, None] >= dx[None, :] - ARROW_MIDRANGE_GAP * eps
    return _off_diagonal(gap | (not_below & witness)), gap, witness


def arrow(sm: SegmentMembers, x: int, y: int) -> bool:
    if x == y:
        return False
    arrows, _, _ = arrow_matrices(sm)
    return bool(arrows[sm.local(x), sm.local(y)])


# ── Blocks and cells ────────────────────────────────────────────────────

@dataclass(eq=False)
class CellDecomposition:
    members: SegmentMembers
    linked: np.ndarray
    separated: np.ndarray
    arrow: np.ndarray
    midrange_gap: np.ndarray
    witness: np.ndarray
    l_arcs: list[tuple[int, int, str]]
    blocks: list[tuple[int, ...]]
    cells: list[tuple[int, ...]]
    block_of: np.ndarray
    cell_of: np.ndarray

    def cell_elements(self, c: int) -> tuple[int, ...]:
        return tuple(self.members.members[x] for x in self.cells[c])

    def cell_indicator(self) -> np.ndarray:
        ind = np.zeros((self.members.m, len(self.cells)), dtype=np.int64)
        ind[np.arange(self.members.m), self.cell_of] = 1
        return ind

    def block_indicator(self) -> np.ndarray:
        ind = np.zeros((self.members.m, len(self.blocks)), dtype=np.int64)
        ind[np.arange(self.members.m), self.block_of] = 1
        return ind

    def cell_relation(self, mask: np.ndarray) -> np.ndarray:
        """Lift an element relation to cells: some x in C' and y in C relate."""
        ind = self.cell_indicator()
        return (ind.T @ mask.astype(np.int64) @ ind) > 0

    def arrows(self) -> list[tuple[int, int]]:
        xs, ys = np.nonzero(self.arrow)
        return [(self.members.members[x], self.members.members[y]) for x, y in zip(xs, ys)]


def _components(graph: nx.Graph) -> list[tuple[int, ...]]:
    return sorted((tuple(sorted(c)) for c in graph), key=lambda c: c[0])


def build_cells(sm: SegmentMembers) -> CellDecomposition:
    m = sm.m
    linked = linked_matrix(sm)
    separated = separated_matrix(sm)
    arrows, gap, witness = arrow_matrices(sm, linked)

    block_graph = nx.Graph()
    block_graph.add_nodes_from(range(m))
    block_graph.add_edges_from(zip(*np.nonzero(np.triu(linked, k=1))))
    blocks = _components(nx.connected_components(block_graph))
    block_of = np.empty(m, dtype=int)
    for b, members in enumerate(blocks):
        block_of[list(members)] = b

    strong_link = linked_matrix(sm, L2_GAP)
    if not np.array_equal(strong_link, strong_link.T) or np.any(strong_link & ~linked):
        raise AlgorithmInvariantError("L2 arcs must be symmetric and linked")
    same_block = block_of[:, None] == block_of[None, :]
    l1 = arrows & same_block
    digraph = nx.DiGraph()
    digraph.add_nodes_from(range(m))
    l_arcs = []
    for x, y in zip(*np.nonzero(l1 | strong_link)):
        kind = "L2" if strong_link[x, y] else "L1"
        digraph.add_edge(int(x), int(y))
        l_arcs.append((sm.members[x], sm.members[y], kind))
    cells = _components(nx.strongly_connected_components(digraph))
    cell_of = np.empty(m, dtype=int)
    for c, members in enumerate(cells):
        cell_of[list(members)] = c
        if len({block_of[x] for x in members}) != 1:
            raise AlgorithmInvariantError(f"cell {c} spans several blocks")

    logger.debug("X_%d,%d: %d members, %d blocks, %d cells", sm.i, sm.j, m, len(blocks), len(cells))
    return CellDecomposition(members=sm, linked=linked, separated=separated, arrow=arrows,
                             midrange_gap=gap, witness=witness, l_arcs=l_arcs,
                             blocks=blocks, cells=cells, block_of=block_of, cell_of=cell_of)


# ── Clusters ────────────────────────────────────────────────────────────

@dataclass(eq=False)
class ClusterStructure:
    clusters: list[tuple[int, ...]]
    cluster_of: list[int]
    twin: list[int | None]
    principal: list[bool]
    s_edges: list[tuple[int, int, str]] = field(default_factory=list)

    def twins(self, a: int, b: int) -> bool:
        return self.twin[a] == b


def build_clusters(cd: CellDecomposition) -> ClusterStructure | Infeasible:
    sm = cd.members
    block_ind = cd.block_indicator()
    block_sep = (block_ind.T @ cd.separated.astype(np.int64) @ block_ind) > 0
    inside = np.flatnonzero(np.diag(block_sep))
    if inside.size:
        b = int(inside[0])
        xs, ys = np.nonzero(cd.separated & (cd.block_of[:, None] == b) & (cd.block_of[None, :] == b))
        pair = (sm.members[xs[0]], sm.members[ys[0]])
        return Infeasible(reason=f"linked block contains the separated pair {pair}", pair=pair)

    cell_arrow = cd.cell_relation(cd.arrow)
    mutual = _off_diagonal(cell_arrow & cell_arrow.T).astype(np.int64)
    cell_block = np.zeros((len(cd.cells), len(cd.blocks)), dtype=np.int64)
    cell_block[np.arange(len(cd.cells)), [cd.block_of[c[0]] for c in cd.cells]] = 1
    block_mutual = _off_diagonal((cell_block.T @ mutual @ cell_block) > 0)

    s_graph = nx.Graph()
    s_graph.add_nodes_from(range(len(cd.cells)))
    s_edges = []
    cell_blocks = [int(cd.block_of[c[0]]) for c in cd.cells]
    for c1 in range(len(cd.cells)):
        for c2 in range(c1 + 1, len(cd.cells)):
            b1, b2 = cell_blocks[c1], cell_blocks[c2]
            if b1 == b2:
                continue
            if block_sep[b1, b2]:
                s_edges.append((c1, c2, "S1"))
            elif block_mutual[b1, b2]:
                s_edges.append((c1, c2, "S2"))
            else:
                continue
            s_graph.add_edge(c1, c2)

    clusters: list[tuple[int, ...]] = []
    twin: list[int | None] = []
    principal: list[bool] = []
    cluster_of = [0] * len(cd.cells)
    strong = separated_matrix(sm, STRONG_SEPARATION_GAP)
    for component in _components(nx.connected_components(s_graph)):
        if len(component) == 1:
            cluster_of[component[0]] = len(clusters)
            clusters.append(component)
            twin.append(None)
            principal.append(False)
            continue
        sub = s_graph.subgraph(component)
        if not nx.is_bipartite(sub):
            return Infeasible(reason=f"cell separation graph is not bipartite on cells {list(component)}")
        colour = nx.bipartite.color(sub)
        flip = colour[component[0]]
        sides = [tuple(c for c in component if colour[c] == flip),
                 tuple(c for c in component if colour[c] != flip)]
        first = len(clusters)
        elements = [[x for c in side for x in cd.cells[c]] for side in sides]
        is_principal = bool(strong[np.ix_(elements[0], elements[1])].any())
        for k, side in enumerate(sides):
            for c in side:
                cluster_of[c] = first + k
            clusters.append(side)
            twin.append(first + 1 - k)
            principal.append(is_principal)

    logger.debug("X_%d,%d: %d clusters, %d S-edges", sm.i, sm.j, len(clusters), len(s_edges))
    return ClusterStructure(clusters=clusters, cluster_of=cluster_of, twin=twin,
                            principal=principal, s_edges=s_edges)


# ── Cell digraph ────────────────────────────────────────────────────────

@dataclass(eq=False)
class CellDigraph:
    count: int
    arcs: dict[tuple[int, int], ArcType]

    def arc_type(self, tail: int, head: int) -> ArcType | None:
        return self.arcs.get((tail, head))

    def has_arc(self, tail: int, head: int, kinds=tuple(ArcType)) -> bool:
        return self.arcs.get((tail, head)) in kinds

    def successors(self, c: int, kinds=tuple(ArcType)) -> list[int]:
        return sorted(h for (t, h), k in self.arcs.items() if t == c and k in kinds)

    def predecessors(self, c: int, kinds=tuple(ArcType)) -> list[int]:
        return sorted(t for (t, h), k in self.arcs.items() if h == c and k in kinds)

    def arcs_of(self, kind: ArcType) -> list[tuple[int, int]]:
        return sorted(a for a, k in self.arcs.items() if k is kind)

    @property
    def g3_cells(self) -> set[int]:
        return {h for (_, h), k in self.arcs.items() if k is ArcType.G3}

    def graph(self, kinds=tuple(ArcType), cells=None) -> nx.DiGraph:
        g = nx.DiGraph()
        nodes = sorted(range(self.count) if cells is None else cells)
        g.add_nodes_from(nodes)
        keep = set(nodes)
        g.add_edges_from(sorted(a for a, k in self.arcs.items()
                                if k in kinds and a[0] in keep and a[1] in keep))
        return g


def build_G(cd: CellDecomposition, cs: ClusterStructure) -> CellDigraph | Infeasible:
    count = len(cd.cells)
    g1 = np.zeros((count, count), dtype=bool)
    for a in range(count):
        for b in range(count):
            g1[a, b] = cs.twins(cs.cluster_of[a], cs.cluster_of[b])
    g2 = _off_diagonal(cd.cell_relation(cd.midrange_gap) & ~(g1 | g1.T))
    g3 = _off_diagonal(cd.cell_relation(cd.witness) & ~(g1 | g1.T | g2 | g2.T))
    arcs: dict[tuple[int, int], ArcType] = {}
    for kind, mask in ((ArcType.G1, g1), (ArcType.G2, g2), (ArcType.G3, g3)):
        for t, h in zip(*np.nonzero(mask)):
            arcs[(int(t), int(h))] = kind
    g = CellDigraph(count=count, arcs=arcs)

    try:
        cycle = nx.find_cycle(g.graph((ArcType.G3,)))
        return Infeasible(reason=f"G3-cycle through cells {[t for t, _ in cycle]}")
    except nx.NetworkXNoCycle:
        pass
    try:
        cycle = nx.find_cycle(g.graph((ArcType.G2,)))
        raise AlgorithmInvariantError(f"G2-cycle through cells {[t for t, _ in cycle]}")
    except nx.NetworkXNoCycle:
        pass
    return g


def find_mixed_cycle(g: CellDigraph, arc: tuple[int, int], cluster: tuple[int, ...] | set[int],
                     kind: CycleKind) -> list[int] | None:
    """Shortest induced 1- or 2-cycle through the G2-arc ``arc`` whose G3 heads lie in ``cluster``.

    Returns the cycle as a list of cells starting at the first G2 tail, or None.
    """
    tail, head = arc
    if g.arc_type(tail, head) is not ArcType.G2 or not cluster:
        return None
    cluster = set(cluster)
    g2 = (ArcType.G2,)

    if kind is CycleKind.ONE:
        candidates = [[tail, head]]
    elif kind is CycleKind.TWO_AFTER:
        candidates = [[tail, head, nxt] for nxt in g.successors(head, g2) if nxt != tail]
    else:
        candidates = [[prv, tail, head] for prv in g.predecessors(tail, g2) if prv != head]

    best = None
    for spine in candidates:
        path = _g3_return_path(g, spine, cluster)
        if path is not None and (best is None or len(spine) + len(path) < len(best)):
            best = spine + path
    return best


def _g3_return_path(g: CellDigraph, spine: list[int], cluster: set[int]) -> list[int] | None:
    """Intermediate cells of the shortest G3 path from spine[-1] back to spine[0]."""
    start, end = spine[-1], spine[0]
    if end not in cluster or end not in g.g3_cells:
        return None
    g2g3 = (ArcType.G2, ArcType.G3)
    pool = []
    for c in sorted(cluster - set(spine)):
        if any(g.has_arc(s, c, g2g3) for s in spine[:-1]):
            continue
        if any(g.has_arc(c, s) for s in spine[1:]):
            continue
        pool.append(c)
    search = g.graph((ArcType.G3,), cells=pool + [start, end])
    search.remove_edges_from([(end, c) for c in list(search.successors(end))])
    search.remove_edges_from([(c, start) for c in list(search.predecessors(start))])
    try:
        route = nx.shortest_path(search, start, end)
    except nx.NetworkXNoPath:
        return None
    return route[1:-1]


@dataclass(frozen=True)
class OmegaSets:
    one: tuple[tuple[int, int], ...] = ()
    two: tuple[tuple[int, int], ...] = ()
    three: tuple[tuple[int, int], ...] = ()


def omega_sets(g: CellDigraph, cs: ClusterStructure) -> dict[int, OmegaSets]:
    """Per cell C: Ω1 and Ω2 hold G2-arcs entering C, Ω3 holds G2-arcs leaving C."""
    one: dict[int, set] = {c: set() for c in range(g.count)}
    two: dict[int, set] = {c: set() for c in range(g.count)}
    three: dict[int, set] = {c: set() for c in range(g.count)}
    for tail, head in g.arcs_of(ArcType.G2):
        for k, cluster in enumerate(cs.clusters):
            if cs.cluster_of[head] != k:
                if find_mixed_cycle(g, (tail, head), cluster, CycleKind.ONE):
                    one[head].add((tail, head))
                if find_mixed_cycle(g, (tail, head), cluster, CycleKind.TWO_AFTER):
                    two[head].add((tail, head))
            if cs.cluster_of[tail] == k:
                if find_mixed_cycle(g, (tail, head), cluster, CycleKind.TWO_BEFORE):
                    three[tail].add((tail, head))
    return {c: OmegaSets(tuple(sorted(one[c])), tuple(sorted(two[c])), tuple(sorted(three[c])))
            for c in range(g.count)}


# ── Debug dumps ─────────────────────────────────────────────────────────

def format_arcs(cd: CellDecomposition, cs: ClusterStructure | None = None,
                g: CellDigraph | None = None) -> str:
    """One typed arc per line: L1/L2 between elements, S1/S2 and G1/G2/G3 between cells."""
    sm = cd.members
    lines = [f"# segment {sm.i} {sm.j} eps {sm.eps!r}"]
    for c in range(len(cd.cells)):
        lines.append(f"# cell {c} " + " ".join(str(x) for x in cd.cell_elements(c)))
    lines.extend(f"{kind} {x} {y}" for x, y, kind in cd.l_arcs)
    if cs is not None:
        for k, cluster in enumerate(cs.clusters):
            lines.append(f"# cluster {k} cells " + " ".join(str(c) for c in cluster)
                         + (" principal" if cs.principal[k] else ""))
        lines.extend(f"{kind} {a} {b}" for a, b, kind in cs.s_edges)
    if g is not None:
        lines.extend(f"{kind.value} {t} {h}" for (t, h), kind in sorted(g.arcs.items()))
    return "\n".join(lines) + "\n"
