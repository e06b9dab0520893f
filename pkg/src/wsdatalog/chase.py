"""Query-driven grounding (GroundWS), ground-program evaluation, and a
bounded restricted chase used as a reference oracle."""

from __future__ import annotations

import heapq
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Mapping, Optional, Sequence, Set, Tuple

from .analysis import classify
from .errors import NotWeaklySticky, RuleCapExceeded
from .model import (Atom, ConjunctiveQuery, FrozenNull, Instance, LabeledNull, Program, Rule, Variable,
                    answers, apply, iter_homomorphisms, pi_homomorphic, schema_of)


@dataclass(frozen=True)
class GroundingConfig:
    resumptions: int = 0
    max_rules: int = 1_000_000

    def __post_init__(self):
        if self.resumptions < 0:
            raise ValueError("resumptions must be >= 0")


@dataclass
class GroundProgram:
    ground_rules: List[Rule]
    database: FrozenSet[Atom]
    resumptions_performed: int = 0
    level: Dict[Atom, int] = field(default_factory=dict)
    phase_of: List[int] = field(default_factory=list)

    @property
    def program(self) -> Program:
        return Program(tuple(self.ground_rules), self.database)


def resumptions_for(q: ConjunctiveQuery) -> int:
    return len(q.variables())


def _max_term_ids(atoms) -> int:
    top = 0
    for a in atoms:
        for t in a.args:
            if isinstance(t, (LabeledNull, FrozenNull)):
                top = max(top, t.id)
    return top


def _freeze_term(t):
    return FrozenNull(t.id) if isinstance(t, LabeledNull) else t


def _freeze_atom(a: Atom) -> Atom:
    return Atom(a.predicate, tuple(_freeze_term(t) for t in a.args))


def _freeze_rule(r: Rule) -> Rule:
    return Rule(tuple(_freeze_atom(a) for a in r.body), _freeze_atom(r.head), r.existential_vars)


class _GroundWS:
    def __init__(self, p: Program, cfg: GroundingConfig, pi_f):
        self.rules = list(p.rules)
        self.cfg = cfg
        self.pi_f = pi_f
        self.database = p.database
        self.instance = Instance(sorted(p.database, key=lambda a: a.sort_key))
        self.level: Dict[Atom, int] = {a: 0 for a in p.database}
        self.heads = Instance()
        self.ground: List[Rule] = []
        self.phase_of: List[int] = []
        self.applied: Set[Tuple[int, Tuple]] = set()
        self.next_null = _max_term_ids(p.database) + 1
        self.body_vars = [r.body_variables() for r in self.rules]
        self.existentials = [sorted(r.existential_vars, key=lambda v: v.name) for r in self.rules]

    # -- candidate bookkeeping ---------------------------------------------
    def _key(self, i: int, h: Mapping) -> Tuple:
        return (i, tuple(h[v] for v in self.body_vars[i]))

    def _push(self, i: int, h: Mapping):
        key = self._key(i, h)
        if key in self.applied or key in self.seen:
            return
        self.seen.add(key)
        body = [apply(h, a) for a in self.rules[i].body]
        lvl = max((self.level[a] for a in body), default=0)
        heapq.heappush(self.queue, (lvl, i, tuple(a.sort_key for a in body), key, body))

    def _seed(self):
        self.queue: List = []
        self.seen: Set = set()
        for i, r in enumerate(self.rules):
            for h in iter_homomorphisms(r.body, self.instance):
                self._push(i, h)

    def _on_new_atom(self, atom: Atom):
        for i, r in enumerate(self.rules):
            for j, pattern in enumerate(r.body):
                if pattern.predicate != atom.predicate or pattern.arity != atom.arity:
                    continue
                start: Dict = {}
                ok = True
                for s, t in zip(pattern.args, atom.args):
                    if isinstance(s, Variable):
                        if start.setdefault(s, t) != t:
                            ok = False
                            break
                    elif s != t:
                        ok = False
                        break
                if not ok:
                    continue
                rest = r.body[:j] + r.body[j + 1:]
                for h in iter_homomorphisms(rest, self.instance, start):
                    self._push(i, h)

    # -- applicability (b) ----------------------------------------------------
    def _blocked(self, head: Atom, fresh: Set) -> bool:
        fixed = {}
        for idx, (pos, t) in enumerate(head.positions()):
            if t in fresh:
                continue
            if isinstance(t, LabeledNull) and pos not in self.pi_f:
                continue
            fixed[idx] = t
        for other in self.heads.candidates(head.predicate, fixed):
            if pi_homomorphic(head, other, self.pi_f, fresh):
                return True
        return False

    def _run_phase(self, phase: int):
        self._seed()
        while self.queue:
            lvl, i, _, key, body = heapq.heappop(self.queue)
            if key in self.applied:
                continue
            r = self.rules[i]
            h = dict(zip(self.body_vars[i], key[1]))
            placeholders = {v: LabeledNull(-(n + 1)) for n, v in enumerate(self.existentials[i])}
            probe = apply({**h, **placeholders}, r.head)
            if self._blocked(probe, set(placeholders.values())):
                continue
            for v in self.existentials[i]:
                h[v] = LabeledNull(self.next_null)
                self.next_null += 1
            head = apply(h, r.head)
            if len(self.ground) >= self.cfg.max_rules:
                raise RuleCapExceeded(f"grounding exceeded {self.cfg.max_rules} rules")
            self.applied.add(key)
            self.ground.append(Rule(tuple(body), head))
            self.phase_of.append(phase)
            self.heads.add(head)
            if head not in self.level:
                self.level[head] = lvl + 1
            if self.instance.add(head):
                self._on_new_atom(head)

    def _freeze(self):
        self.ground = [_freeze_rule(r) for r in self.ground]
        self.instance = Instance(_freeze_atom(a) for a in self.instance)
        self.heads = Instance(_freeze_atom(a) for a in self.heads)
        self.level = {_freeze_atom(a): n for a, n in self.level.items()}
        self.applied = {(i, tuple(_freeze_term(t) for t in ts)) for i, ts in self.applied}

    def run(self) -> GroundProgram:
        for phase in range(self.cfg.resumptions + 1):
            if phase:
                self._freeze()
            self._run_phase(phase)
        return GroundProgram(self.ground, self.database, self.cfg.resumptions, self.level, self.phase_of)


def ground_ws(p: Program, cfg: GroundingConfig = GroundingConfig()) -> GroundProgram:
    """Ground ``p`` with ``cfg.resumptions`` freeze-and-resume rounds.

    Rules are applied in order of the maximum level of their body atoms, then
    rule index, then the canonical order of the instantiated body.
    """
    report = classify(p.rules, schema_of(p.rules, p.database))
    if not report.weakly_sticky:
        raise NotWeaklySticky("program is not weakly sticky")
    return _GroundWS(p, cfg, report.ranks.pi_f).run()


def minimal_model(gp: GroundProgram) -> FrozenSet[Atom]:
    """Least fixpoint of the database under the ground rules (counting algorithm)."""
    model = set(gp.database)
    waiting: Dict[Atom, List[int]] = defaultdict(list)
    missing: List[int] = []
    ready: List[Atom] = []
    for i, r in enumerate(gp.ground_rules):
        need = {a for a in r.body if a not in model}
        missing.append(len(need))
        for a in need:
            waiting[a].append(i)
        if not need:
            ready.append(r.head)
    while ready:
        a = ready.pop()
        if a in model:
            continue
        model.add(a)
        for i in waiting.pop(a, ()):
            missing[i] -= 1
            if missing[i] == 0:
                ready.append(gp.ground_rules[i].head)
    return frozenset(model)


def answer_over_ground(q: ConjunctiveQuery, gp: GroundProgram) -> FrozenSet[tuple]:
    return answers(q, minimal_model(gp))


# --- reference oracle ---------------------------------------------------------

@dataclass
class ChaseResult:
    atoms: FrozenSet[Atom]
    saturated: bool
    level: Dict[Atom, int] = field(default_factory=dict)


def restricted_chase(p: Program, max_depth: int) -> ChaseResult:
    """Breadth-first restricted chase. Round k applies every active trigger
    that uses at least one atom created in round k-1; atoms created in round
    k have level k. Stops after ``max_depth`` rounds."""
    instance = Instance(sorted(p.database, key=lambda a: a.sort_key))
    level = {a: 0 for a in p.database}
    next_null = _max_term_ids(p.database) + 1
    rules = list(p.rules)
    delta = set(p.database)
    depth = 0
    while delta:
        triggers = {}
        for i, r in enumerate(rules):
            for j, pattern in enumerate(r.body):
                for atom in delta:
                    if atom.predicate != pattern.predicate:
                        continue
                    start = {}
                    ok = True
                    for s, t in zip(pattern.args, atom.args):
                        if isinstance(s, Variable):
                            if start.setdefault(s, t) != t:
                                ok = False
                                break
                        elif s != t:
                            ok = False
                            break
                    if not ok:
                        continue
                    for h in iter_homomorphisms(r.body[:j] + r.body[j + 1:], instance, start):
                        body = tuple(apply(h, a) for a in r.body)
                        triggers[(i, tuple(a.sort_key for a in body))] = h
        new = set()
        for key in sorted(triggers):
            i = key[0]
            h = triggers[key]
            r = rules[i]
            if any(True for _ in iter_homomorphisms([r.head], instance, h)):
                continue
            if depth >= max_depth:
                return ChaseResult(frozenset(instance), False, level)
            ext = dict(h)
            for v in sorted(r.existential_vars, key=lambda v: v.name):
                ext[v] = LabeledNull(next_null)
                next_null += 1
            head = apply(ext, r.head)
            if instance.add(head):
                level[head] = depth + 1
                new.add(head)
        depth += 1
        delta = new
    return ChaseResult(frozenset(instance), True, level)


def oracle_chase(p: Program, max_depth: int) -> FrozenSet[Atom]:
    return restricted_chase(p, max_depth).atoms


def certain_answers_oracle(q: ConjunctiveQuery, p: Program, max_depth: int) -> FrozenSet[tuple]:
    return answers(q, oracle_chase(p, max_depth))
