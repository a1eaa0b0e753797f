"""2-SAT over an implication graph.

Unsatisfiability is read off the strongly connected components (a
variable equivalent to its own negation). A satisfying assignment is then
built by propagating implications, trying ``False`` first for every
variable in index order, so results are deterministic.
"""
import logging
from dataclasses import dataclass, field

import networkx as nx

logger = logging.getLogger(__name__)


@dataclass(frozen=True, order=True)
class Literal:
    var: int
    positive: bool = True

    def __neg__(self) -> "Literal":
        return Literal(self.var, not self.positive)

    def __str__(self) -> str:
        return f"x{self.var}" if self.positive else f"¬x{self.var}"


Clause = tuple[Literal, Literal]


@dataclass
class TwoSatInstance:
    var_count: int
    clauses: list[Clause] = field(default_factory=list)

    def add(self, *clauses: Clause):
        for a, b in clauses:
            for lit in (a, b):
                if not 0 <= lit.var < self.var_count:
                    raise ValueError(f"literal {lit} outside 0..{self.var_count - 1}")
            self.clauses.append((a, b))


@dataclass(frozen=True)
class Assignment:
    values: tuple[bool, ...]

    def __getitem__(self, var: int) -> bool:
        return self.values[var]

    def satisfies(self, lit: Literal) -> bool:
        return self.values[lit.var] == lit.positive


@dataclass(frozen=True)
class Unsatisfiable:
    var: int

    @property
    def reason(self) -> str:
        return f"x{self.var} is equivalent to its negation"


def encode_equal(a: int, b: int) -> list[Clause]:
    return [(Literal(a), Literal(b, False)), (Literal(a, False), Literal(b))]


def encode_not_equal(a: int, b: int) -> list[Clause]:
    return [(Literal(a), Literal(b)), (Literal(a, False), Literal(b, False))]


def implication_graph(inst: TwoSatInstance) -> nx.DiGraph:
    g = nx.DiGraph()
    for v in range(inst.var_count):
        g.add_node(Literal(v, True))
        g.add_node(Literal(v, False))
    for a, b in inst.clauses:
        g.add_edge(-a, b)
        g.add_edge(-b, a)
    return g


def satisfied(inst: TwoSatInstance, assignment: Assignment) -> bool:
    return all(assignment.satisfies(a) or assignment.satisfies(b) for a, b in inst.clauses)


def solve(inst: TwoSatInstance) -> Assignment | Unsatisfiable:
    g = implication_graph(inst)
    component = {}
    for k, scc in enumerate(nx.strongly_connected_components(g)):
        for lit in scc:
            component[lit] = k
    for v in range(inst.var_count):
        if component[Literal(v, True)] == component[Literal(v, False)]:
            logger.debug("2-SAT unsatisfiable on x%d (%d clauses)", v, len(inst.clauses))
            return Unsatisfiable(v)

    values: dict[int, bool] = {}
    for v in range(inst.var_count):
        if v in values:
            continue
        trial = _propagate(g, Literal(v, False), values)
        if trial is None:
            trial = _propagate(g, Literal(v, True), values)
        if trial is None:
            return Unsatisfiable(v)
        values = trial
    assignment = Assignment(tuple(values[v] for v in range(inst.var_count)))
    if not satisfied(inst, assignment):
        raise RuntimeError("2-SAT propagation produced a non-satisfying assignment")
    return assignment


def _propagate(g: nx.DiGraph, lit: Literal, values: dict[int, bool]) -> dict[int, bool] | None:
    """Assign ``lit`` and everything it implies; None on conflict."""
    result = dict(values)
    stack = [lit]
    while stack:
        current = stack.pop()
        known = result.get(current.var)
        if known is not None:
            if known != current.positive:
                return None
            continue
        result[current.var] = current.positive
        stack.extend(g.successors(current))
    return result


def to_dimacs(inst: TwoSatInstance, comment: str | None = None) -> str:
    lines = []
    if comment:
        lines.extend(f"c {line}" for line in comment.splitlines())
    lines.append(f"p cnf {inst.var_count} {len(inst.clauses)}")
    for a, b in inst.clauses:
        lits = [(lit.var + 1) * (1 if lit.positive else -1) for lit in (a, b)]
        lines.append(f"{lits[0]} {lits[1]} 0")
    return "\n".join(lines) + "\n"
