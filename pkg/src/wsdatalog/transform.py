"""Program transformations: rank reduction by Skolem-constant expansion, and
partial grounding of weak variables into a sticky program."""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Mapping, Optional, Sequence, Set, Tuple

from .analysis import ClassReport, Marking, RankMap, body_positions, classify, repeated_body_variables
from .chase import GroundingConfig, ground_ws, minimal_model, resumptions_for
from .errors import PreconditionViolated
from .model import (FILLER, Atom, ConjunctiveQuery, Constant, Filler, FunctionConstant, Position, Program, Rule,
                    Variable, active_domain, apply, iter_homomorphisms, schema_of)

_EXPANDED = re.compile(r"(.*)_x([0-9]+)")


def _lineage(predicate: str) -> Tuple[str, int]:
    m = _EXPANDED.fullmatch(predicate)
    return (m.group(1), int(m.group(2))) if m else (predicate, 0)


def _next_name(predicate: str) -> str:
    base, gen = _lineage(predicate)
    return f"{base}_x{gen + 1}"


def _max_function_id(rules: Sequence[Rule], queries=()) -> int:
    top = 0
    atoms = [a for r in rules for a in (*r.body, r.head)] + [a for q in queries for a in q.body]
    for a in atoms:
        for t in a.args:
            if isinstance(t, FunctionConstant):
                top = max(top, t.id)
    return top


@dataclass
class ExpansionMap:
    """Record of every expansion step: which positions were widened, by how
    much, and the predicate renaming that resulted."""

    steps: List[Tuple[Dict[Position, int], Dict[str, str]]] = field(default_factory=list)

    def width(self, pos: Position, step: int = -1) -> int:
        if not self.steps:
            return 1
        return self.steps[step][0].get(pos, 1)

    def renamed(self, predicate: str) -> str:
        for _, names in self.steps:
            predicate = names.get(predicate, predicate)
        return predicate


def _schema(p: Program, q: Optional[ConjunctiveQuery]):
    return schema_of(p.rules, p.database, [q] if q else [])


def _pick_existential(rules: Sequence[Rule], ranks: RankMap):
    best = None
    for i, r in enumerate(rules):
        for pos, t in r.head.positions():
            if t in r.existential_vars and ranks[pos] != float("inf"):
                key = (ranks[pos], i, pos.index)
                if best is None or key < best[0]:
                    best = (key, i, t)
    return None if best is None else (best[1], best[2])


def _expanded_positions(rules: Sequence[Rule], start: Set[Position]) -> Set[Position]:
    """Close ``start`` under forward value flow: a body variable sitting at an
    expanded position carries its value to all of its head positions."""
    expanded = set(start)
    changed = True
    while changed:
        changed = False
        for r in rules:
            for a in r.body:
                for pos, t in a.positions():
                    if pos in expanded and isinstance(t, Variable):
                        for hpos, ht in r.head.positions():
                            if ht == t and hpos not in expanded:
                                expanded.add(hpos)
                                changed = True
    return expanded


class _Primer:
    """Hands out primed copies V', V'', ... avoiding names already taken."""

    def __init__(self, taken: Set[str]):
        self.taken = set(taken)
        self.blocks: Dict[Variable, List[Variable]] = {}

    def block(self, v: Variable, width: int) -> List[Variable]:
        if v not in self.blocks:
            out = [v]
            name = v.name
            while len(out) < width:
                name += "'"
                if name in self.taken:
                    continue
                self.taken.add(name)
                out.append(Variable(name))
            self.blocks[v] = out
        return self.blocks[v]


def _widen_atom(a: Atom, expanded: Set[Position], width: int, renames: Mapping[str, str],
                block_vars: Set[Variable], primer: _Primer, skolem: Optional[Tuple[Variable, List]]) -> Atom:
    if a.predicate not in renames:
        return a
    args = []
    for pos, t in a.positions():
        if pos not in expanded:
            args.append(t)
        elif skolem is not None and t == skolem[0]:
            args.extend(skolem[1])
        elif isinstance(t, Variable) and t in block_vars:
            args.extend(primer.block(t, width))
        else:
            args.append(t)
            args.extend([FILLER] * (width - 1))
    return Atom(renames[a.predicate], tuple(args))


def _block_variables(body: Sequence[Atom], expanded: Set[Position]) -> Set[Variable]:
    return {t for a in body for pos, t in a.positions() if pos in expanded and isinstance(t, Variable)}


def _rewrite_rule(r: Rule, expanded, width, renames, skolem=None) -> Rule:
    taken = {v.name for v in r.body_variables()} | {v.name for v in r.head.variables()}
    primer = _Primer(taken)
    blocks = _block_variables(r.body, expanded)
    body = tuple(_widen_atom(a, expanded, width, renames, blocks, primer, None) for a in r.body)
    head = _widen_atom(r.head, expanded, width, renames, blocks, primer, skolem)
    existentials = r.existential_vars - ({skolem[0]} if skolem else set())
    return Rule(body, head, existentials)


def _rewrite_query(q: ConjunctiveQuery, expanded, width, renames) -> ConjunctiveQuery:
    primer = _Primer({v.name for v in q.variables()})
    blocks = _block_variables(q.body, expanded)
    body = tuple(_widen_atom(a, expanded, width, renames, blocks, primer, None) for a in q.body)
    return ConjunctiveQuery(q.head_predicate, q.answer_vars, body)


def reduce_rank_step(p: Program, q: Optional[ConjunctiveQuery], expansion: ExpansionMap,
                     next_function: int) -> Optional[Tuple[Program, Optional[ConjunctiveQuery]]]:
    rules = list(p.rules)
    ranks = classify(rules, _schema(p, q)).ranks
    choice = _pick_existential(rules, ranks)
    if choice is None:
        return None
    i, y = choice
    rule = rules[i]
    frontier = rule.frontier()
    width = 1 + len(frontier)
    if not frontier:
        # a nullary Skolem term is just a constant; no widening needed
        rules[i] = Rule(rule.body, apply({y: FunctionConstant(next_function)}, rule.head),
                        rule.existential_vars - {y})
        expansion.steps.append(({}, {}))
        return Program(tuple(rules), p.database), q
    start = {pos for pos, t in rule.head.positions() if t == y}
    expanded = _expanded_positions(rules, start)
    renames = {pos.predicate: _next_name(pos.predicate) for pos in sorted(expanded)}
    skolem = (y, [FunctionConstant(next_function), *frontier])

    out = []
    for j, r in enumerate(rules):
        out.append(_rewrite_rule(r, expanded, width, renames, skolem if j == i else None))
    db_preds = {a.predicate for a in p.database}
    for pred in sorted(renames):
        if pred in db_preds:
            arity = _schema(p, q)[pred]
            xs = tuple(Variable(f"X{k}") for k in range(1, arity + 1))
            head = []
            for k, x in enumerate(xs, start=1):
                head.append(x)
                if Position(pred, k) in expanded:
                    head.extend([FILLER] * (width - 1))
            out.append(Rule((Atom(pred, xs),), Atom(renames[pred], tuple(head))))
    expansion.steps.append(({pos: width for pos in expanded}, renames))
    new_q = _rewrite_query(q, expanded, width, renames) if q is not None else None
    return Program(tuple(out), p.database), new_q


def reduce_rank(p: Program, q: Optional[ConjunctiveQuery] = None, max_iterations: int = 10_000,
                expansion: Optional[ExpansionMap] = None):
    """Remove every existential variable that sits at a finite-rank position.

    Returns ``(program, query)``; the query is rewritten alongside the rules
    so that it ranges over the expanded predicates.
    """
    expansion = expansion if expansion is not None else ExpansionMap()
    next_function = _max_function_id(p.rules, [q] if q else []) + 1
    for _ in range(max_iterations):
        step = reduce_rank_step(p, q, expansion, next_function)
        if step is None:
            return p, q
        p, q = step
        next_function += 1
    raise PreconditionViolated(f"rank reduction did not converge in {max_iterations} iterations")


# --- partial grounding ----------------------------------------------------------

@dataclass(frozen=True)
class WeakVariableReport:
    weak: Mapping[int, Tuple[Variable, ...]]

    def for_rule(self, i: int) -> Tuple[Variable, ...]:
        return self.weak.get(i, ())

    @property
    def weak_rules(self) -> List[int]:
        return sorted(i for i, vs in self.weak.items() if vs)


def weak_variables(rules: Sequence[Rule], marking: Marking, ranks: RankMap) -> WeakVariableReport:
    pi_f = ranks.pi_f
    weak = {}
    for i, r in enumerate(rules):
        vs = tuple(v for v in repeated_body_variables(r)
                   if marking.is_marked(i, v) and any(pos in pi_f for pos in body_positions(r, v)))
        if vs:
            weak[i] = vs
    return WeakVariableReport(weak)


def grounding_domain(p: Program) -> List:
    """Active domain of the database plus the rigid terms written in the rules
    (function constants and fillers introduced by rank reduction included)."""
    terms = set(active_domain(p.database))
    for r in p.rules:
        for a in (*r.body, r.head):
            for t in a.args:
                if isinstance(t, (Constant, FunctionConstant, Filler)):
                    terms.add(t)
    return sorted(terms, key=lambda t: t.sort_key)


def restrict_grounding_domain(p: Program, rule: Rule, var: Variable,
                              cfg: Optional[GroundingConfig] = None) -> FrozenSet:
    """Values ``var`` can take when ``rule`` fires, found by grounding ``p``
    against the query whose body is the rule body."""
    aux = ConjunctiveQuery("q_g", (var,), rule.body)
    cfg = cfg or GroundingConfig(resumptions_for(aux))
    model = minimal_model(ground_ws(p, cfg))
    values = set()
    for h in iter_homomorphisms(rule.body, model):
        t = h[var]
        if isinstance(t, (Constant, FunctionConstant, Filler)):
            values.add(t)
    return frozenset(values)


def _require_partial_preconditions(p: Program) -> ClassReport:
    report = classify(p.rules, schema_of(p.rules, p.database))
    if not report.weakly_sticky:
        raise PreconditionViolated("partial grounding needs a weakly sticky program")
    if not report.zero_infinity:
        raise PreconditionViolated("partial grounding needs no existential variable at a finite-rank position")
    return report


def partial_grounding(p: Program, restrict: bool = False,
                      cfg: Optional[GroundingConfig] = None) -> Program:
    """Replace each weak variable by every value of the grounding domain."""
    report = _require_partial_preconditions(p)
    weak = weak_variables(p.rules, report.marking, report.ranks)
    domain = grounding_domain(p)
    out: List[Rule] = []
    for i, r in enumerate(p.rules):
        vs = weak.for_rule(i)
        if not vs:
            out.append(r)
            continue
        if restrict:
            choices = [sorted(restrict_grounding_domain(p, r, v, cfg), key=lambda t: t.sort_key) for v in vs]
        else:
            choices = [domain] * len(vs)
        for values in itertools.product(*choices):
            out.append(apply(dict(zip(vs, values)), r))
    return Program(tuple(out), p.database)
