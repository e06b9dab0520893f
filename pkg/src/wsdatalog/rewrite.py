"""UCQ rewriting for sticky rule sets, UCQ evaluation, SQL emission, and the
end-to-end hybrid answering pipeline."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Dict, FrozenSet, List, Mapping, Optional, Sequence, Set, Tuple

from .analysis import classify
from .errors import DisjunctCapExceeded, NotSticky, NotWeaklySticky, UnknownPredicate
from .model import (RIGID, SPECIAL, Atom, ConjunctiveQuery, Constant, Instance, Program, Rule, Variable, answers, apply,
                    conjunction_variables, iter_homomorphisms, schema_of)
from .transform import partial_grounding, reduce_rank


@dataclass(frozen=True)
class UCQRewriting:
    query: ConjunctiveQuery
    disjuncts: Tuple[ConjunctiveQuery, ...]

    def __len__(self):
        return len(self.disjuncts)

    def __iter__(self):
        return iter(self.disjuncts)

    def __str__(self):
        return "".join(f"{d}\n" for d in self.disjuncts)


# --- containment ------------------------------------------------------------------

def subsumes(general: ConjunctiveQuery, specific: ConjunctiveQuery, _index=None) -> bool:
    """True when every answer of ``specific`` is an answer of ``general`` on
    every database, i.e. ``general`` maps into ``specific`` fixing answers."""
    if len(general.answer_vars) != len(specific.answer_vars):
        return False
    binding: Dict = {}
    for g, s in zip(general.answer_vars, specific.answer_vars):
        if isinstance(g, Variable):
            if binding.setdefault(g, s) != s:
                return False
        elif g != s:
            return False
    into = _index if _index is not None else specific.body
    return next(iter_homomorphisms(general.body, into, binding), None) is not None


def equivalent(a: ConjunctiveQuery, b: ConjunctiveQuery) -> bool:
    return subsumes(a, b) and subsumes(b, a)


def core(q: ConjunctiveQuery) -> ConjunctiveQuery:
    """Drop body atoms while the query stays equivalent."""
    body = list(dict.fromkeys(q.body))
    if len({a.predicate for a in body}) == len(body):
        return ConjunctiveQuery(q.head_predicate, q.answer_vars, tuple(body))
    i = len(body) - 1
    while i >= 0 and len(body) > 1:
        smaller = ConjunctiveQuery(q.head_predicate, q.answer_vars, tuple(body[:i] + body[i + 1:]))
        answer_vars = {t for t in q.answer_vars if isinstance(t, Variable)}
        if answer_vars <= set(smaller.variables()) and subsumes(ConjunctiveQuery(
                q.head_predicate, q.answer_vars, tuple(body)), smaller):
            body = list(smaller.body)
        i -= 1
    return ConjunctiveQuery(q.head_predicate, q.answer_vars, tuple(body))


# --- unification ---------------------------------------------------------------------

class _UnionFind:
    def __init__(self, preferred):
        self.parent: Dict = {}
        self.preferred = preferred

    def find(self, t):
        root = t
        while self.parent.get(root, root) != root:
            root = self.parent[root]
        while self.parent.get(t, t) != root:
            self.parent[t], t = root, self.parent[t]
        return root

    def _rank(self, t):
        if isinstance(t, RIGID):
            return (0,)
        return (1, self.preferred.get(t, len(self.preferred)), t.name)

    def union(self, a, b) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return True
        if isinstance(ra, RIGID) and isinstance(rb, RIGID):
            return False
        if self._rank(rb) < self._rank(ra):
            ra, rb = rb, ra
        self.parent[rb] = ra
        return True


def _rename_apart(rule: Rule, taken) -> Rule:
    mapping = {}
    used = set(taken)
    for v in conjunction_variables([*rule.body, rule.head]):
        name, k = v.name, 1
        while name in used:
            name = f"{v.name}{k}"
            k += 1
        used.add(name)
        mapping[v] = Variable(name)
    return apply(mapping, rule) if any(k != v for k, v in mapping.items()) else rule


def _rewrite_step(q: ConjunctiveQuery, subset: Sequence[int], rule: Rule) -> Optional[ConjunctiveQuery]:
    """Resolve the atoms ``subset`` of ``q`` against ``rule``'s head."""
    order = {v: i for i, v in enumerate(conjunction_variables(
        [Atom("", tuple(t for t in q.answer_vars if isinstance(t, Variable))), *q.body]))}
    uf = _UnionFind(order)
    head = rule.head
    for j in subset:
        for s, t in zip(q.body[j].args, head.args):
            if not uf.union(s, t):
                return None
    rest = [a for j, a in enumerate(q.body) if j not in subset]
    theta = {}
    for t in set(order) | set(conjunction_variables([*rule.body, head])):
        theta[t] = uf.find(t)
    images_elsewhere = {theta.get(t, t) for a in rest for t in a.args}
    images_elsewhere |= {theta.get(t, t) for t in q.answer_vars}
    for z in rule.existential_vars:
        img = theta[z]
        if not isinstance(img, Variable) or img in images_elsewhere:
            return None
        for t in head.args:
            if t != z and theta.get(t, t) == img:
                return None
    body = [apply(theta, a) for a in (*rule.body, *rest)]
    return ConjunctiveQuery(q.head_predicate, tuple(theta.get(t, t) for t in q.answer_vars),
                            tuple(dict.fromkeys(body)))


def _expansions(q: ConjunctiveQuery, rules: Sequence[Rule]):
    taken = {v.name for v in q.variables()}
    for rule in rules:
        idx = [j for j, a in enumerate(q.body) if a.predicate == rule.head.predicate]
        if not idx:
            continue
        fresh = _rename_apart(rule, taken)
        for size in range(1, len(idx) + 1):
            for subset in combinations(idx, size):
                out = _rewrite_step(q, subset, fresh)
                if out is not None:
                    yield out


def _canonical_text(q: ConjunctiveQuery) -> str:
    return str(q)


def _renaming_key(q: ConjunctiveQuery) -> Tuple:
    """Identical for queries that differ only in variable names."""
    names: Dict[Variable, int] = {}

    def term(t):
        if isinstance(t, Variable):
            return ("v", names.setdefault(t, len(names)))
        return t

    answer = tuple(term(t) for t in q.answer_vars)
    return answer, tuple((a.predicate, tuple(term(t) for t in a.args)) for a in q.body)


def _unsatisfiable(q: ConjunctiveQuery, derived) -> bool:
    """True when ``q`` can never yield an answer: an answer slot holds a
    generated constant, or a database-only atom holds one."""
    if any(isinstance(t, SPECIAL) for t in q.answer_vars):
        return True
    return any(a.predicate not in derived and any(isinstance(t, SPECIAL) for t in a.args) for a in q.body)


def rewrite_sticky(q: ConjunctiveQuery, rules: Sequence[Rule], max_disjuncts: int = 100_000,
                   feasible: Optional[Callable[[ConjunctiveQuery], bool]] = None) -> UCQRewriting:
    """Saturate ``q`` under backward resolution with ``rules``.

    ``feasible`` optionally rejects disjuncts known to have no match on the
    target database; their rewritings cannot match either, so both are skipped.

    Each new query is reduced to its core. It is dropped when a live query
    subsumes it; otherwise it retires every live query it subsumes. The
    result is the original query followed by the surviving rewritings.
    """
    rules = list(rules)
    if not classify(rules).sticky:
        raise NotSticky("query rewriting needs a sticky rule set")
    derived = {r.head.predicate for r in rules}
    live: Dict[int, Tuple[ConjunctiveQuery, FrozenSet[str], Instance]] = {}

    def signature(d):
        return frozenset(a.predicate for a in d.body)

    live[0] = (q, signature(q), Instance(q.body))
    queue = deque([0])
    seen = {_renaming_key(q)}
    serial = 1
    while queue:
        n = queue.popleft()
        if n not in live:
            continue
        for new in _expansions(live[n][0], rules):
            key = _renaming_key(new)
            if key in seen or _unsatisfiable(new, derived) or (feasible and not feasible(new)):
                continue
            seen.add(key)
            new = core(new)
            preds, index = signature(new), Instance(new.body)
            if any(sig <= preds and subsumes(k, new, index) for k, sig, _ in live.values()):
                continue
            for m in [m for m, (k, sig, idx) in live.items() if preds <= sig and subsumes(new, k, idx)]:
                del live[m]
            if len(live) >= max_disjuncts:
                raise DisjunctCapExceeded(f"rewriting exceeded {max_disjuncts} disjuncts")
            live[serial] = (new, preds, index)
            queue.append(serial)
            serial += 1
    out = [q]
    for d in sorted((k for k, _, _ in live.values()), key=lambda d: (len(d.body), _canonical_text(d))):
        if not equivalent(d, q):
            out.append(d)
    return UCQRewriting(q, tuple(out))


def evaluate_ucq(u: UCQRewriting, database) -> FrozenSet[tuple]:
    out = set()
    for d in u.disjuncts:
        out |= answers(d, database)
    return frozenset(out)


# --- SQL ------------------------------------------------------------------------------

@dataclass(frozen=True)
class SqlSchema:
    tables: Mapping[str, str]
    columns: Mapping[str, Tuple[str, ...]]

    @classmethod
    def default(cls, arities: Mapping[str, int]) -> "SqlSchema":
        return cls({p: p for p in arities},
                   {p: tuple(f"c{i}" for i in range(1, n + 1)) for p, n in arities.items()})


def _literal(c: Constant) -> str:
    return "'" + c.name.replace("'", "''") + "'"


def _aliases(q: ConjunctiveQuery) -> List[str]:
    out, seen = [], {}
    for t in q.answer_vars:
        base = t.name.lower().replace("'", "_") if isinstance(t, Variable) else "a"
        seen[base] = seen.get(base, 0) + 1
        out.append(base if seen[base] == 1 else f"{base}_{seen[base]}")
    return out


def _select(d: ConjunctiveQuery, schema: SqlSchema, aliases: Sequence[str]) -> str:
    where: List[str] = []
    first: Dict[Variable, str] = {}
    froms = []
    for k, a in enumerate(d.body):
        if a.predicate not in schema.tables:
            raise UnknownPredicate(f"no table for predicate {a.predicate}")
        cols = schema.columns[a.predicate]
        froms.append(f"{schema.tables[a.predicate]} AS t{k}")
        for i, t in enumerate(a.args):
            ref = f"t{k}.{cols[i]}"
            if isinstance(t, Variable):
                if t in first:
                    where.append(f"{first[t]} = {ref}")
                else:
                    first[t] = ref
            elif isinstance(t, Constant):
                where.append(f"{ref} = {_literal(t)}")
            else:
                where.append("1 = 0")
    select = []
    for t, alias in zip(d.answer_vars, aliases):
        if isinstance(t, Variable):
            select.append(f"{first[t]} AS {alias}")
        elif isinstance(t, Constant):
            select.append(f"{_literal(t)} AS {alias}")
        else:
            select.append(f"NULL AS {alias}")
            where.append("1 = 0")
    if not select:
        select = ["1 AS holds"]
    sql = f"SELECT {', '.join(select)} FROM {', '.join(froms)}"
    if where:
        sql += " WHERE " + " AND ".join(dict.fromkeys(where))
    return sql


def emit_sql(u: UCQRewriting, schema: Optional[SqlSchema] = None) -> str:
    if schema is None:
        schema = SqlSchema.default(schema_of(queries=u.disjuncts))
    aliases = _aliases(u.query)
    return " UNION ".join(_select(d, schema, aliases) for d in u.disjuncts)


# --- hybrid pipeline ----------------------------------------------------------------------

@dataclass
class HybridResult:
    answers: FrozenSet[tuple]
    reduced: Program
    reduced_query: ConjunctiveQuery
    grounded: Program
    rewriting: UCQRewriting


_NULL = object()  # stands for "some labeled null" in the value analysis


class _Reachable:
    """Over-approximation of the terms each position can hold in any chase of
    ``database`` under ``rules``; used to drop dead rules and disjuncts."""

    def __init__(self, rules: Sequence[Rule], database):
        self.nonempty: Set[str] = set()
        self.values: Dict[Tuple[str, int], Set] = {}
        for a in database:
            self._add_atom(a.predicate, [{t} for t in a.args])
        changed = True
        while changed:
            changed = False
            for r in rules:
                env = self._bindings(r.body)
                if env is None:
                    continue
                slots = [env[t] if isinstance(t, Variable) and t in env
                         else {_NULL} if isinstance(t, Variable) else {t} for t in r.head.args]
                changed |= self._add_atom(r.head.predicate, slots)
        self.live_rules = [r for r in rules if self._bindings(r.body) is not None]

    def _add_atom(self, pred, slots) -> bool:
        grew = pred not in self.nonempty
        self.nonempty.add(pred)
        for i, vals in enumerate(slots):
            bucket = self.values.setdefault((pred, i), set())
            before = len(bucket)
            bucket |= vals
            grew |= len(bucket) != before
        return grew

    def _bindings(self, body) -> Optional[Dict]:
        env: Dict = {}
        for a in body:
            if a.predicate not in self.nonempty:
                return None
            for i, t in enumerate(a.args):
                vals = self.values.get((a.predicate, i), set())
                if isinstance(t, Variable):
                    env[t] = env[t] & vals if t in env else set(vals)
                    if not env[t]:
                        return None
                elif t not in vals:
                    return None
        return env

    def satisfiable(self, q: ConjunctiveQuery) -> bool:
        return self._bindings(q.body) is not None


def hybrid_pipeline(p: Program, q: ConjunctiveQuery, max_disjuncts: int = 100_000) -> HybridResult:
    report = classify(p.rules, schema_of(p.rules, p.database, [q]))
    if not report.weakly_sticky:
        raise NotWeaklySticky("program is not weakly sticky")
    reduced, q2 = reduce_rank(p, q)
    grounded = partial_grounding(reduced)
    reach = _Reachable(grounded.rules, grounded.database)
    u = rewrite_sticky(q2, reach.live_rules, max_disjuncts, reach.satisfiable)
    return HybridResult(evaluate_ucq(u, grounded.database), reduced, q2, grounded, u)


def hybrid_answer(p: Program, q: ConjunctiveQuery, max_disjuncts: int = 100_000) -> FrozenSet[tuple]:
    return hybrid_pipeline(p, q, max_disjuncts).answers
