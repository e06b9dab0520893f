"""Text format for programs, facts, and queries.

Grammar (``%`` starts a line comment)::

    fact   ::= atom "."
    rule   ::= atom ("," atom)* "->" ["exists" VAR ("," VAR)* ":"] atom "."
    query  ::= atom ":-" atom ("," atom)* "."
    atom   ::= PRED ["(" [term ("," term)*] ")"]

Lowercase identifiers, numbers, and double-quoted strings are constants;
uppercase identifiers (optionally primed, ``Y'``) are variables. Generated
terms have reserved lexemes: ``_n<k>`` labeled null, ``_f<k>`` frozen null,
``#f<k>`` function constant, ``#_`` filler. Predicates ending in ``_x<k>``
are reserved for expanded predicates. Reserved lexemes are rejected unless
``allow_generated`` is set, which is how serialized engine output is read
back.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional

from .errors import ParseError, SemanticError
from .model import (FILLER, Atom, ConjunctiveQuery, Constant, FrozenNull, FunctionConstant, LabeledNull,
                    Program, Rule, Variable, schema_of)

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>%[^\n]*)
  | (?P<arrow>->)
  | (?P<neck>:-)
  | (?P<null>_n[0-9]+)
  | (?P<frozen>_f[0-9]+)
  | (?P<func>\#f[0-9]+)
  | (?P<filler>\#_)
  | (?P<var>[A-Z][A-Za-z0-9_]*'*)
  | (?P<ident>[a-z][A-Za-z0-9_]*)
  | (?P<number>[0-9]+(?:\.[0-9]+)?)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<punct>[(),.:])
""", re.VERBOSE)

_RESERVED_PREDICATE = re.compile(r".*_x[0-9]+")
_GENERATED = {"null", "frozen", "func", "filler"}


@dataclass
class _Token:
    kind: str
    text: str
    line: int
    column: int


def _tokenize(text: str) -> List[_Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind not in ("ws", "comment"):
            value = m.group()
            if kind == "punct":
                kind = value
            tokens.append(_Token(kind, value, line, pos - line_start + 1))
        chunk = m.group()
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            line_start = pos + chunk.rindex("\n") + 1
        pos = m.end()
    tokens.append(_Token("eof", "", line, pos - line_start + 1))
    return tokens


def _unquote(s: str) -> str:
    return re.sub(r"\\(.)", r"\1", s[1:-1])


@dataclass
class SourceProgram:
    rules: List[Rule] = field(default_factory=list)
    facts: set = field(default_factory=set)
    parse_origin: Dict[int, int] = field(default_factory=dict)
    query: Optional[ConjunctiveQuery] = None

    @property
    def program(self) -> Program:
        return Program(tuple(self.rules), frozenset(self.facts))


class _Parser:
    def __init__(self, text: str, allow_generated: bool):
        self.tokens = _tokenize(text)
        self.i = 0
        self.allow_generated = allow_generated

    @property
    def tok(self) -> _Token:
        return self.tokens[self.i]

    def error(self, message, tok=None):
        tok = tok or self.tok
        return ParseError(message, tok.line, tok.column)

    def expect(self, kind):
        tok = self.tok
        if tok.kind != kind:
            found = tok.text or "end of input"
            raise self.error(f"expected {kind!r}, found {found!r}")
        self.i += 1
        return tok

    def term(self):
        tok = self.tok
        if tok.kind in _GENERATED and not self.allow_generated:
            raise self.error(f"reserved lexeme {tok.text!r} is not allowed in source text")
        self.i += 1
        if tok.kind == "var":
            return Variable(tok.text)
        if tok.kind in ("ident", "number"):
            return Constant(tok.text)
        if tok.kind == "string":
            name = _unquote(tok.text)
            if not name:
                raise self.error("empty string constant", tok)
            return Constant(name)
        if tok.kind == "null":
            return LabeledNull(int(tok.text[2:]))
        if tok.kind == "frozen":
            return FrozenNull(int(tok.text[2:]))
        if tok.kind == "func":
            return FunctionConstant(int(tok.text[2:]))
        if tok.kind == "filler":
            return FILLER
        self.i -= 1
        raise self.error(f"expected a term, found {tok.text or 'end of input'!r}")

    def atom(self) -> Atom:
        tok = self.tok
        if tok.kind != "ident":
            raise self.error(f"expected a predicate name, found {tok.text or 'end of input'!r}")
        if _RESERVED_PREDICATE.fullmatch(tok.text) and not self.allow_generated:
            raise self.error(f"predicate name {tok.text!r} uses the reserved '_x<k>' suffix")
        self.i += 1
        args = []
        if self.tok.kind == "(":
            self.i += 1
            if self.tok.kind != ")":
                args.append(self.term())
                while self.tok.kind == ",":
                    self.i += 1
                    args.append(self.term())
            self.expect(")")
        return Atom(tok.text, tuple(args))

    def statement(self, out: SourceProgram):
        start = self.tok
        first = self.atom()
        if self.tok.kind == "neck":
            self.i += 1
            body = [self.atom()]
            while self.tok.kind == ",":
                self.i += 1
                body.append(self.atom())
            self.expect(".")
            answer = []
            for t in first.args:
                if not isinstance(t, Variable):
                    raise self.error("query heads may contain only variables", start)
                answer.append(t)
            q = ConjunctiveQuery(first.predicate, tuple(answer), tuple(body))
            try:
                q.validate()
            except SemanticError as exc:
                raise SemanticError(f"line {start.line}: {exc}") from None
            if out.query is not None:
                raise self.error("at most one query per document", start)
            out.query = q
            return
        body = [first]
        while self.tok.kind == ",":
            self.i += 1
            body.append(self.atom())
        if self.tok.kind == ".":
            self.i += 1
            if len(body) > 1:
                raise self.error("a conjunction of facts is not a statement", start)
            fact = body[0]
            for t in fact.args:
                if not isinstance(t, Constant):
                    raise SemanticError(f"line {start.line}: fact {fact} must contain only constants")
            out.facts.add(fact)
            return
        self.expect("arrow")
        existentials = []
        if (self.tok.kind == "ident" and self.tok.text == "exists"
                and self.tokens[self.i + 1].kind == "var"):
            self.i += 1
            existentials.append(Variable(self.expect("var").text))
            while self.tok.kind == ",":
                self.i += 1
                existentials.append(Variable(self.expect("var").text))
            self.expect(":")
        head = self.atom()
        if self.tok.kind == ",":
            raise self.error("rule heads must be a single atom")
        self.expect(".")
        rule = Rule(tuple(body), head, frozenset(existentials))
        try:
            rule.validate()
        except SemanticError as exc:
            raise SemanticError(f"line {start.line}: {exc}") from None
        out.parse_origin[len(out.rules)] = start.line
        out.rules.append(rule)

    def document(self) -> SourceProgram:
        out = SourceProgram()
        while self.tok.kind != "eof":
            self.statement(out)
        try:
            schema_of(out.rules, out.facts, [out.query] if out.query else [])
        except SemanticError as exc:
            raise SemanticError(str(exc)) from None
        return out


def parse_source(text: str, allow_generated: bool = False) -> SourceProgram:
    """Parse rules, facts, and at most one query."""
    return _Parser(text, allow_generated).document()


def parse_program(text: str, allow_generated: bool = False) -> Program:
    src = parse_source(text, allow_generated)
    if src.query is not None:
        raise ParseError("queries are not allowed in a program; use parse_source")
    return src.program


def parse_query(text: str, allow_generated: bool = False) -> ConjunctiveQuery:
    src = parse_source(text, allow_generated)
    if src.query is None or src.rules or src.facts:
        raise ParseError("expected exactly one query of the form 'q(X) :- body.'")
    return src.query


def parse_queries(text: str, allow_generated: bool = True) -> List[ConjunctiveQuery]:
    """Parse a newline-separated list of queries, as written for UCQs."""
    return [parse_query(line, allow_generated)
            for line in text.splitlines() if line.strip() and not line.lstrip().startswith("%")]


def _atom_key(a: Atom):
    return a.sort_key


def serialize_program(p: Program, query: Optional[ConjunctiveQuery] = None) -> str:
    """Canonical text: facts in canonical order, then rules in program order."""
    lines = [f"{a}." for a in sorted(p.database, key=_atom_key)]
    lines += [str(r) for r in p.rules]
    if query is not None:
        lines.append(str(query))
    return "".join(line + "\n" for line in lines)


def serialize_query(q: ConjunctiveQuery) -> str:
    return str(q)


@dataclass(frozen=True)
class CsvBinding:
    predicate: str
    arity: int
    path: str


def load_csv(binding: CsvBinding) -> frozenset:
    """One ground atom per CSV row; every field becomes a constant."""
    facts = set()
    with open(binding.path, newline="", encoding="utf-8") as fh:
        for row_no, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            if len(row) != binding.arity:
                raise ParseError(f"{binding.path}: row {row_no} has {len(row)} fields, "
                                 f"expected {binding.arity}")
            if any(not field for field in row):
                raise ParseError(f"{binding.path}: row {row_no} has an empty field")
            facts.add(Atom(binding.predicate, tuple(Constant(f) for f in row)))
    return frozenset(facts)
