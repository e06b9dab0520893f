"""Core value types: terms, atoms, rules, queries, programs, and homomorphisms.

Every type here is an immutable value. Generated terms (labeled nulls,
frozen nulls, function constants, the filler) live in disjoint namespaces
from source constants, so they can never collide with user data.
"""

from __future__ import annotations

import re
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, List, Mapping, NamedTuple, Optional, Sequence, Tuple, Union

from .errors import SemanticError

_BARE_CONSTANT = re.compile(r"[a-z][A-Za-z0-9_]*|[0-9]+(?:\.[0-9]+)?")


@dataclass(frozen=True, slots=True)
class Constant:
    name: str

    def __post_init__(self):
        if not isinstance(self.name, str) or not self.name:
            raise ValueError("constant names must be nonempty strings")

    @property
    def sort_key(self):
        return (0, self.name)

    def __str__(self):
        if _BARE_CONSTANT.fullmatch(self.name):
            return self.name
        escaped = self.name.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'


@dataclass(frozen=True, slots=True)
class Variable:
    name: str

    @property
    def sort_key(self):
        return (5, self.name)

    def __str__(self):
        return self.name


@dataclass(frozen=True, slots=True)
class LabeledNull:
    id: int

    @property
    def sort_key(self):
        return (1, self.id)

    def __str__(self):
        return f"_n{self.id}"


@dataclass(frozen=True, slots=True)
class FrozenNull:
    id: int

    @property
    def sort_key(self):
        return (2, self.id)

    def __str__(self):
        return f"_f{self.id}"


@dataclass(frozen=True, slots=True)
class FunctionConstant:
    id: int

    @property
    def sort_key(self):
        return (3, self.id)

    def __str__(self):
        return f"#f{self.id}"


@dataclass(frozen=True, slots=True)
class Filler:
    @property
    def sort_key(self):
        return (4, 0)

    def __str__(self):
        return "#_"


FILLER = Filler()

Term = Union[Constant, Variable, LabeledNull, FrozenNull, FunctionConstant, Filler]
Substitution = Mapping[Term, Term]

# Terms that behave as constants under homomorphisms.
RIGID = (Constant, FrozenNull, FunctionConstant, Filler)
# Generated constants that must never surface in answers or the active domain.
SPECIAL = (FrozenNull, FunctionConstant, Filler)
NULLS = (LabeledNull, FrozenNull)


def is_variable(term) -> bool:
    return isinstance(term, Variable)


def is_answer_value(term) -> bool:
    """True for ordinary data constants, the only terms allowed in answers."""
    return isinstance(term, Constant)


class Position(NamedTuple):
    """Argument slot ``predicate[index]``; the index is 1-based."""

    predicate: str
    index: int

    def __str__(self):
        return f"{self.predicate}[{self.index}]"


@dataclass(frozen=True, slots=True)
class Atom:
    predicate: str
    args: Tuple[Term, ...] = ()

    def __post_init__(self):
        if not isinstance(self.args, tuple):
            object.__setattr__(self, "args", tuple(self.args))

    @property
    def arity(self) -> int:
        return len(self.args)

    @property
    def sort_key(self):
        return (self.predicate, tuple(t.sort_key for t in self.args))

    def positions(self) -> Iterator[Tuple[Position, Term]]:
        for i, t in enumerate(self.args, start=1):
            yield Position(self.predicate, i), t

    def variables(self) -> List[Variable]:
        return [t for t in self.args if isinstance(t, Variable)]

    def is_ground(self) -> bool:
        return not any(isinstance(t, Variable) for t in self.args)

    def __str__(self):
        return f"{self.predicate}({','.join(str(t) for t in self.args)})"


def conjunction_variables(atoms: Iterable[Atom]) -> List[Variable]:
    """Distinct variables in first-occurrence order."""
    seen = {}
    for a in atoms:
        for t in a.args:
            if isinstance(t, Variable) and t not in seen:
                seen[t] = None
    return list(seen)


@dataclass(frozen=True, slots=True)
class Rule:
    body: Tuple[Atom, ...]
    head: Atom
    existential_vars: frozenset = frozenset()

    def __post_init__(self):
        if not isinstance(self.body, tuple):
            object.__setattr__(self, "body", tuple(self.body))
        if not isinstance(self.existential_vars, frozenset):
            object.__setattr__(self, "existential_vars", frozenset(self.existential_vars))

    def body_variables(self) -> List[Variable]:
        return conjunction_variables(self.body)

    def frontier(self) -> List[Variable]:
        """Body variables that also occur in the head, in head order."""
        body = set(self.body_variables())
        return [v for v in conjunction_variables([self.head]) if v in body]

    def is_ground(self) -> bool:
        return self.head.is_ground() and all(a.is_ground() for a in self.body)

    def validate(self):
        body_vars = set(self.body_variables())
        clash = body_vars & self.existential_vars
        if clash:
            names = ", ".join(sorted(v.name for v in clash))
            raise SemanticError(f"existential variable used in body: {names}")
        for v in self.head.variables():
            if v not in body_vars and v not in self.existential_vars:
                raise SemanticError(f"unsafe rule: head variable {v} does not occur in the body")
        stray = self.existential_vars - set(self.head.variables())
        if stray:
            names = ", ".join(sorted(v.name for v in stray))
            raise SemanticError(f"existential variable absent from head: {names}")
        return self

    def __str__(self):
        body = ", ".join(str(a) for a in self.body)
        if self.existential_vars:
            ex = ",".join(v.name for v in sorted(self.existential_vars, key=lambda v: v.name))
            return f"{body} -> exists {ex}: {self.head}."
        return f"{body} -> {self.head}."


@dataclass(frozen=True, slots=True)
class ConjunctiveQuery:
    """``head_predicate(answer_vars) :- body``.

    User queries carry only variables in ``answer_vars``; rewritten disjuncts
    may carry constants there when unification bound an answer variable.
    """

    head_predicate: str
    answer_vars: Tuple[Term, ...]
    body: Tuple[Atom, ...]

    def __post_init__(self):
        if not isinstance(self.answer_vars, tuple):
            object.__setattr__(self, "answer_vars", tuple(self.answer_vars))
        if not isinstance(self.body, tuple):
            object.__setattr__(self, "body", tuple(self.body))

    @property
    def is_boolean(self) -> bool:
        return not self.answer_vars

    def variables(self) -> List[Variable]:
        return conjunction_variables(self.body)

    def validate(self):
        body_vars = set(self.variables())
        for v in self.answer_vars:
            if isinstance(v, Variable) and v not in body_vars:
                raise SemanticError(f"answer variable {v} does not occur in the query body")
        return self

    def __str__(self):
        head = f"{self.head_predicate}({','.join(str(t) for t in self.answer_vars)})"
        return f"{head} :- {', '.join(str(a) for a in self.body)}."


@dataclass(frozen=True, slots=True)
class Program:
    rules: Tuple[Rule, ...] = ()
    database: frozenset = frozenset()

    def __post_init__(self):
        if not isinstance(self.rules, tuple):
            object.__setattr__(self, "rules", tuple(self.rules))
        if not isinstance(self.database, frozenset):
            object.__setattr__(self, "database", frozenset(self.database))

    def validate(self):
        for a in self.database:
            if not all(isinstance(t, Constant) for t in a.args):
                raise SemanticError(f"database atom {a} must contain only constants")
        for r in self.rules:
            r.validate()
        schema_of(self.rules, self.database)
        return self


def schema_of(rules: Iterable[Rule] = (), facts: Iterable[Atom] = (),
              queries: Iterable[ConjunctiveQuery] = ()) -> Dict[str, int]:
    """Predicate arities over rules, facts, and queries; raises on a mismatch."""
    arity: Dict[str, int] = {}

    def note(a: Atom):
        known = arity.setdefault(a.predicate, a.arity)
        if known != a.arity:
            raise SemanticError(
                f"arity mismatch for predicate {a.predicate}: {known} vs {a.arity}")

    for r in rules:
        for a in r.body:
            note(a)
        note(r.head)
    for a in facts:
        note(a)
    for q in queries:
        for a in q.body:
            note(a)
    return arity


def positions_of(schema: Mapping[str, int]) -> List[Position]:
    return [Position(p, i) for p in sorted(schema) for i in range(1, schema[p] + 1)]


# --- substitutions -----------------------------------------------------------

def apply(subst: Substitution, target):
    """Apply ``subst`` to a term, atom, rule, query, or sequence of atoms."""
    if isinstance(target, Atom):
        return Atom(target.predicate, tuple(subst.get(t, t) for t in target.args))
    if isinstance(target, Rule):
        renamed = (subst.get(v, v) for v in target.existential_vars)
        return Rule(tuple(apply(subst, a) for a in target.body), apply(subst, target.head),
                    frozenset(v for v in renamed if isinstance(v, Variable)))
    if isinstance(target, ConjunctiveQuery):
        return ConjunctiveQuery(target.head_predicate,
                                tuple(subst.get(t, t) for t in target.answer_vars),
                                tuple(apply(subst, a) for a in target.body))
    if isinstance(target, (list, tuple)):
        return type(target)(apply(subst, a) for a in target)
    return subst.get(target, target)


def compose(outer: Substitution, inner: Substitution) -> Dict[Term, Term]:
    """The substitution ``outer ∘ inner`` (apply ``inner`` first)."""
    out = {k: outer.get(v, v) for k, v in inner.items()}
    for k, v in outer.items():
        out.setdefault(k, v)
    return out


# --- instances and homomorphisms --------------------------------------------

class Instance:
    """A set of atoms indexed by predicate and by (predicate, slot, term).

    Insertion order is kept so that every enumeration is deterministic.
    """

    def __init__(self, atoms: Iterable[Atom] = ()):
        self._atoms: Dict[Atom, None] = {}
        self._by_pred: Dict[str, List[Atom]] = defaultdict(list)
        self._by_arg: Dict[Tuple[str, int, Term], List[Atom]] = defaultdict(list)
        for a in atoms:
            self.add(a)

    def add(self, atom: Atom) -> bool:
        if atom in self._atoms:
            return False
        self._atoms[atom] = None
        self._by_pred[atom.predicate].append(atom)
        for i, t in enumerate(atom.args):
            self._by_arg[(atom.predicate, i, t)].append(atom)
        return True

    def __contains__(self, atom) -> bool:
        return atom in self._atoms

    def __iter__(self):
        return iter(self._atoms)

    def __len__(self):
        return len(self._atoms)

    def with_predicate(self, predicate: str) -> List[Atom]:
        return self._by_pred.get(predicate, [])

    def candidates(self, predicate: str, fixed: Mapping[int, Term]) -> List[Atom]:
        """Atoms of ``predicate`` that may agree with ``fixed`` (0-based slots)."""
        best = self._by_pred.get(predicate, [])
        for i, t in fixed.items():
            bucket = self._by_arg.get((predicate, i, t), [])
            if len(bucket) < len(best):
                best = bucket
                if not best:
                    break
        return best


def _as_instance(into) -> Instance:
    return into if isinstance(into, Instance) else Instance(into)


def _match_atom(pattern: Atom, target: Atom, binding: Dict[Term, Term], bindable) -> Optional[Dict[Term, Term]]:
    if pattern.predicate != target.predicate or pattern.arity != target.arity:
        return None
    out = binding
    copied = False
    for p, t in zip(pattern.args, target.args):
        if bindable(p):
            bound = out.get(p)
            if bound is None:
                if not copied:
                    out = dict(out)
                    copied = True
                out[p] = t
            elif bound != t:
                return None
        elif p != t:
            return None
    return out


def iter_homomorphisms(conjunction: Sequence[Atom], into, binding: Optional[Mapping[Term, Term]] = None,
                       bindable=is_variable) -> Iterator[Dict[Term, Term]]:
    """Yield every extension of ``binding`` mapping ``conjunction`` into ``into``.

    Unordered; use :func:`find_homomorphisms` for the canonical order.
    """
    inst = _as_instance(into)
    atoms = list(conjunction)
    start = dict(binding or {})

    def bound_slots(a: Atom, b: Mapping[Term, Term]) -> Dict[int, Term]:
        fixed = {}
        for i, t in enumerate(a.args):
            if bindable(t):
                if t in b:
                    fixed[i] = b[t]
            else:
                fixed[i] = t
        return fixed

    def search(remaining: List[Atom], b: Dict[Term, Term]):
        if not remaining:
            yield b
            return
        # most-constrained atom first
        best_i, best_cands = 0, None
        for i, a in enumerate(remaining):
            cands = inst.candidates(a.predicate, bound_slots(a, b))
            if best_cands is None or len(cands) < len(best_cands):
                best_i, best_cands = i, cands
                if not cands:
                    return
        pattern = remaining[best_i]
        rest = remaining[:best_i] + remaining[best_i + 1:]
        for target in list(best_cands):
            nb = _match_atom(pattern, target, b, bindable)
            if nb is not None:
                yield from search(rest, nb)

    yield from search(atoms, start)


def homomorphism_key(h: Mapping[Term, Term]):
    return tuple((k.name if isinstance(k, Variable) else str(k), v.sort_key)
                 for k, v in sorted(h.items(), key=lambda kv: (kv[0].sort_key)))


def find_homomorphisms(conjunction: Sequence[Atom], into, remap_nulls: bool = False) -> List[Dict[Term, Term]]:
    """All homomorphisms from ``conjunction`` into ``into``, in canonical order.

    Only variables are bindable unless ``remap_nulls`` is set, in which case
    labeled nulls on the ``conjunction`` side may be remapped too.
    """
    bindable = (lambda t: isinstance(t, (Variable, LabeledNull))) if remap_nulls else is_variable
    found = {}
    for h in iter_homomorphisms(conjunction, into, bindable=bindable):
        found[homomorphism_key(h)] = h
    return [found[k] for k in sorted(found)]


def pi_homomorphic(a: Atom, b: Atom, pi, free=()) -> bool:
    """Whether some homomorphism maps ``a`` onto ``b`` while fixing every
    term of ``a`` that sits at a position in ``pi``.

    Labeled nulls listed in ``free`` may be remapped wherever they occur.
    """
    for t in a.args + b.args:
        if isinstance(t, Variable):
            raise ValueError("pi_homomorphic expects ground atoms")
    if a.predicate != b.predicate or a.arity != b.arity:
        return False
    fixed = {t for pos, t in a.positions() if pos in pi and t not in free}
    h: Dict[Term, Term] = {}
    for s, t in zip(a.args, b.args):
        if isinstance(s, LabeledNull) and s not in fixed:
            prev = h.setdefault(s, t)
            if prev != t:
                return False
        elif s != t:
            return False
    return True


def active_domain(database: Iterable[Atom]) -> frozenset:
    return frozenset(t for a in database for t in a.args if isinstance(t, Constant))


def answers(query: ConjunctiveQuery, atoms) -> frozenset:
    """Evaluate ``query`` over a finite instance, keeping only tuples of
    ordinary constants. A Boolean query yields ``{()}`` when satisfied."""
    inst = _as_instance(atoms)
    out = set()
    for h in iter_homomorphisms(query.body, inst):
        row = tuple(h.get(t, t) for t in query.answer_vars)
        if all(is_answer_value(t) for t in row):
            out.add(row)
            if query.is_boolean:
                break
    return frozenset(out)
