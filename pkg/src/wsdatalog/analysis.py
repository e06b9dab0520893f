"""Syntactic analyses: sticky marking, dependency graph, position ranks,
and membership in the sticky / weakly-acyclic / weakly-sticky classes."""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

from .model import Atom, Position, Rule, Variable, positions_of, schema_of

INFINITY = math.inf


@dataclass(frozen=True)
class Marking:
    """Marked (rule index, variable name) pairs; marking a pair marks every
    body occurrence of that variable in that rule."""

    marked: FrozenSet[Tuple[int, str]] = frozenset()

    def is_marked(self, rule_index: int, var) -> bool:
        name = var.name if isinstance(var, Variable) else var
        return (rule_index, name) in self.marked

    def for_rule(self, rule_index: int) -> Set[str]:
        return {v for i, v in self.marked if i == rule_index}


def mark_variables(rules: Sequence[Rule]) -> Marking:
    marked: Set[Tuple[int, str]] = set()
    for i, r in enumerate(rules):
        head_vars = set(r.head.variables())
        for v in r.body_variables():
            if v not in head_vars:
                marked.add((i, v.name))

    # position -> rules whose head carries a body variable there
    head_carriers: Dict[Position, List[Tuple[int, str]]] = defaultdict(list)
    for i, r in enumerate(rules):
        body_vars = set(r.body_variables())
        for pos, t in r.head.positions():
            if isinstance(t, Variable) and t in body_vars:
                head_carriers[pos].append((i, t.name))

    body_positions: Dict[Tuple[int, str], List[Position]] = defaultdict(list)
    for i, r in enumerate(rules):
        for a in r.body:
            for pos, t in a.positions():
                if isinstance(t, Variable):
                    body_positions[(i, t.name)].append(pos)

    work = list(marked)
    while work:
        pair = work.pop()
        for pos in body_positions[pair]:
            for carrier in head_carriers.get(pos, ()):
                if carrier not in marked:
                    marked.add(carrier)
                    work.append(carrier)
    return Marking(frozenset(marked))


@dataclass(frozen=True)
class DependencyGraph:
    vertices: FrozenSet[Position]
    normal_edges: FrozenSet[Tuple[Position, Position]]
    special_edges: FrozenSet[Tuple[Position, Position]]


def build_dependency_graph(rules: Sequence[Rule], schema: Optional[Mapping[str, int]] = None) -> DependencyGraph:
    """Edges run from the body positions of each frontier variable to its head
    positions (normal) and to every existential head position (special)."""
    full = dict(schema_of(rules))
    for p, n in (schema or {}).items():
        full.setdefault(p, n)
    normal, special = set(), set()
    for r in rules:
        head_positions: Dict[Variable, List[Position]] = defaultdict(list)
        for pos, t in r.head.positions():
            if isinstance(t, Variable):
                head_positions[t].append(pos)
        existential = [pos for v in r.existential_vars for pos in head_positions[v]]
        for a in r.body:
            for pos, t in a.positions():
                if isinstance(t, Variable) and t not in r.existential_vars and t in head_positions:
                    for target in head_positions[t]:
                        normal.add((pos, target))
                    for target in existential:
                        special.add((pos, target))
    return DependencyGraph(frozenset(positions_of(full)), frozenset(normal), frozenset(special))


def _strongly_connected(vertices: List[Position], succ: Mapping[Position, List[Position]]) -> List[List[Position]]:
    """Tarjan's algorithm, iterative. Components come out in reverse topological order."""
    index: Dict[Position, int] = {}
    low: Dict[Position, int] = {}
    on_stack: Set[Position] = set()
    stack: List[Position] = []
    comps: List[List[Position]] = []
    counter = 0
    for root in vertices:
        if root in index:
            continue
        work = [(root, 0)]
        while work:
            v, child = work.pop()
            if child == 0:
                index[v] = low[v] = counter
                counter += 1
                stack.append(v)
                on_stack.add(v)
            nbrs = succ.get(v, [])
            if child < len(nbrs):
                work.append((v, child + 1))
                w = nbrs[child]
                if w not in index:
                    work.append((w, 0))
                elif w in on_stack:
                    low[v] = min(low[v], index[w])
                continue
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                comps.append(comp)
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
    return comps


@dataclass(frozen=True)
class RankMap:
    rank: Mapping[Position, float]

    @property
    def pi_f(self) -> FrozenSet[Position]:
        return frozenset(p for p, r in self.rank.items() if r != INFINITY)

    @property
    def pi_inf(self) -> FrozenSet[Position]:
        return frozenset(p for p, r in self.rank.items() if r == INFINITY)

    def __getitem__(self, pos: Position):
        return self.rank[pos]


def compute_ranks(g: DependencyGraph) -> RankMap:
    vertices = sorted(g.vertices)
    succ: Dict[Position, List[Position]] = defaultdict(list)
    for u, v in sorted(g.normal_edges | g.special_edges):
        if v not in succ[u]:
            succ[u].append(v)
    comps = _strongly_connected(vertices, succ)
    comp_of = {v: i for i, comp in enumerate(comps) for v in comp}

    infinite_seed = {comp_of[u] for u, v in g.special_edges if comp_of[u] == comp_of[v]}
    infinite: Set[Position] = set()
    work = [v for c in infinite_seed for v in comps[c]]
    infinite.update(work)
    while work:
        u = work.pop()
        for v in succ.get(u, []):
            if v not in infinite:
                infinite.add(v)
                work.append(v)

    incoming: Dict[int, List[Tuple[int, int]]] = defaultdict(list)
    for u, v in g.normal_edges | g.special_edges:
        cu, cv = comp_of[u], comp_of[v]
        if cu != cv:
            incoming[cv].append((cu, 1 if (u, v) in g.special_edges else 0))
    comp_rank: Dict[int, int] = {}
    # Tarjan emits sinks first, so sources are at the end.
    for c in reversed(range(len(comps))):
        best = 0
        for src, weight in incoming.get(c, []):
            best = max(best, comp_rank.get(src, 0) + weight)
        comp_rank[c] = best
    rank = {v: (INFINITY if v in infinite else comp_rank[comp_of[v]]) for v in vertices}
    return RankMap(rank)


def ranks_for(rules: Sequence[Rule], schema: Optional[Mapping[str, int]] = None) -> RankMap:
    return compute_ranks(build_dependency_graph(rules, schema))


@dataclass(frozen=True)
class ClassReport:
    sticky: bool
    weakly_acyclic: bool
    weakly_sticky: bool
    zero_infinity: bool
    marking: Marking = field(default_factory=Marking, compare=False)
    ranks: RankMap = field(default_factory=lambda: RankMap({}), compare=False)


def repeated_body_variables(rule: Rule) -> List[Variable]:
    counts = Counter(t for a in rule.body for t in a.args if isinstance(t, Variable))
    return [v for v, n in counts.items() if n > 1]


def body_positions(rule: Rule, var: Variable) -> List[Position]:
    return [pos for a in rule.body for pos, t in a.positions() if t == var]


def classify(rules: Sequence[Rule], schema: Optional[Mapping[str, int]] = None) -> ClassReport:
    marking = mark_variables(rules)
    ranks = ranks_for(rules, schema)
    pi_f = ranks.pi_f
    sticky = True
    weakly_sticky = True
    for i, r in enumerate(rules):
        for v in repeated_body_variables(r):
            if not marking.is_marked(i, v):
                continue
            sticky = False
            if not any(pos in pi_f for pos in body_positions(r, v)):
                weakly_sticky = False
    weakly_acyclic = not ranks.pi_inf
    zero_infinity = all(
        pos not in pi_f
        for r in rules
        for pos, t in r.head.positions()
        if t in r.existential_vars
    )
    return ClassReport(sticky, weakly_acyclic, weakly_sticky, zero_infinity, marking, ranks)
