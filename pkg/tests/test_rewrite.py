import random
import sqlite3

import pytest
from hypothesis import given, settings, strategies as st

from wsdatalog.analysis import classify
from wsdatalog.chase import certain_answers_oracle
from wsdatalog.errors import DisjunctCapExceeded, NotSticky, UnknownPredicate
from wsdatalog.model import SPECIAL, Constant, schema_of
from wsdatalog.rewrite import (SqlSchema, core, emit_sql, equivalent, evaluate_ucq, hybrid_answer, hybrid_pipeline,
                               rewrite_sticky, subsumes)
from wsdatalog.syntax import parse_program, parse_query, serialize_program

from gen import random_ws_case

INTRO = """\
emp(joe). mgr(ann).
emp(X) -> exists Y: rep(X,Y).
rep(X,Y) -> mgr(Y).
"""

HYBRID = """\
v(a).
p(X,Y) -> exists Z: p(Y,Z).
p(X,Y), p(Y,Z) -> u(Y).
v(X) -> exists Y: r(X,Y).
r(X,Y), s(X,Z) -> c(Z).
c(X) -> exists Y: p(X,Y).
"""


def test_subsumption_and_core():
    general = parse_query("q(X) :- p(X,Y).")
    specific = parse_query("q(X) :- p(X,Y), p(X,a).")
    assert subsumes(general, specific) and not subsumes(specific, general)
    assert str(core(specific)) == "q(X) :- p(X,a)."
    assert equivalent(core(specific), specific)
    assert not subsumes(parse_query("q(X) :- p(X,Y)."), parse_query("q(Y) :- p(X,Y)."))


def test_two_disjunct_rewriting():
    u = rewrite_sticky(parse_query("q(W) :- p(W)."), parse_program("t(X,Y) -> p(Y).").rules)
    assert [str(d) for d in u] == ["q(W) :- p(W).", "q(W) :- t(X,W)."]


def test_intro_rewriting_answers_joe():
    p = parse_program(INTRO)
    u = rewrite_sticky(parse_query("q(W1) :- rep(W1,W2)."), p.rules)
    assert "q(W1) :- emp(W1)." in [str(d) for d in u]
    assert evaluate_ucq(u, p.database) == {(Constant("joe"),)}


def test_existential_cannot_bind_answer_or_join():
    rules = parse_program("emp(X) -> exists Y: rep(X,Y).").rules
    u = rewrite_sticky(parse_query("q(W2) :- rep(W1,W2)."), rules)
    assert len(u) == 1
    u = rewrite_sticky(parse_query("q() :- rep(W1,W2), mgr(W2)."), rules)
    assert len(u) == 1


def test_rewriting_needs_sticky_rules():
    with pytest.raises(NotSticky):
        rewrite_sticky(parse_query("q(X) :- s(X,Z)."), parse_program("p(X,Y), p(Y,Z) -> s(X,Z).").rules)


def test_disjunct_cap():
    rules = parse_program("t(X,Y) -> p(Y).\nr(X,Y) -> p(Y).").rules
    with pytest.raises(DisjunctCapExceeded):
        rewrite_sticky(parse_query("q(W) :- p(W)."), rules, max_disjuncts=2)


def test_emit_sql_golden():
    u = rewrite_sticky(parse_query("q(W1) :- rep(W1,W2)."), parse_program(INTRO).rules)
    assert emit_sql(u) == "SELECT t0.c1 AS w1 FROM rep AS t0 UNION SELECT t0.c1 AS w1 FROM emp AS t0"


def test_emit_sql_constants_joins_and_boolean():
    u = rewrite_sticky(parse_query("q() :- p(X,Y), p(Y,a)."), [])
    assert emit_sql(u) == "SELECT 1 AS holds FROM p AS t0, p AS t1 WHERE t0.c2 = t1.c1 AND t1.c2 = 'a'"


def test_emit_sql_custom_schema_and_unknown_table():
    u = rewrite_sticky(parse_query("q(X) :- emp(X)."), [])
    schema = SqlSchema({"emp": "staff"}, {"emp": ("name",)})
    assert emit_sql(u, schema) == "SELECT t0.name AS x FROM staff AS t0"
    with pytest.raises(UnknownPredicate):
        emit_sql(u, SqlSchema({}, {}))


def test_hybrid_intro_queries():
    p = parse_program(INTRO)
    assert hybrid_answer(p, parse_query("q(W1) :- rep(W1,W2).")) == {(Constant("joe"),)}
    assert hybrid_answer(p, parse_query("q(W1) :- mgr(W1).")) == {(Constant("ann"),)}


def test_hybrid_grounds_weak_join():
    p = parse_program(HYBRID)
    q = parse_query("q() :- u(X).")
    res = hybrid_pipeline(p, q)
    assert "r_x1(a,Y,Y'), s(a,Z) -> c(Z)." in serialize_program(res.grounded).splitlines()
    assert classify(res.grounded.rules).sticky
    assert res.answers == certain_answers_oracle(q, p, 8) == frozenset()


def test_value_analysis_drops_dead_rules():
    from wsdatalog.rewrite import _Reachable
    p = parse_program("r(a,b). s(c).\nr(X,b) -> t(X).\nr(b,X) -> t(X).\nu(X) -> t(X).\n"
                      "s(X) -> exists Y: w(X,Y).\nw(X,Y), r(Y,Z) -> t(Z).")
    reach = _Reachable(p.rules, p.database)
    assert [str(r) for r in reach.live_rules] == ["r(X,b) -> t(X).", "s(X) -> exists Y: w(X,Y)."]
    assert reach.satisfiable(parse_query("q(X) :- t(X), w(c,Y)."))
    assert not reach.satisfiable(parse_query("q() :- t(b)."))


# -- properties ------------------------------------------------------------------

def _sqlite_answers(u, database):
    schema = schema_of(facts=database, queries=u.disjuncts)
    conn = sqlite3.connect(":memory:")
    for pred, n in schema.items():
        cols = ", ".join(f"c{i} TEXT" for i in range(1, n + 1)) or "dummy TEXT"
        conn.execute(f"CREATE TABLE {pred} ({cols})")
    for a in database:
        marks = ", ".join("?" for _ in a.args)
        conn.execute(f"INSERT INTO {a.predicate} VALUES ({marks})", [t.name for t in a.args])
    rows = conn.execute(emit_sql(u)).fetchall()
    if u.query.is_boolean:
        return frozenset({()}) if rows else frozenset()
    return frozenset(tuple(Constant(v) for v in row) for row in rows)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**9))
def test_sticky_rewriting_matches_oracle(seed):
    p, q = random_ws_case(random.Random(seed), require_sticky=True)
    u = rewrite_sticky(q, p.rules)
    assert evaluate_ucq(u, p.database) == certain_answers_oracle(q, p, 8)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**9))
def test_sql_round_trip(seed):
    p, q = random_ws_case(random.Random(seed), require_sticky=True)
    u = rewrite_sticky(q, p.rules)
    assert _sqlite_answers(u, p.database) == evaluate_ucq(u, p.database)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**9), st.randoms(use_true_random=False))
def test_rule_order_does_not_matter(seed, shuffler):
    p, q = random_ws_case(random.Random(seed), require_sticky=True)
    rules = list(p.rules)
    shuffler.shuffle(rules)
    a, b = rewrite_sticky(q, p.rules), rewrite_sticky(q, rules)
    assert len(a) == len(b)
    for d in a:
        assert any(equivalent(d, e) for e in b)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**9))
def test_hybrid_answers_hold_only_constants(seed):
    p, q = random_ws_case(random.Random(seed))
    res = hybrid_pipeline(p, q)
    assert all(isinstance(t, Constant) for row in res.answers for t in row)
    for d in res.rewriting.disjuncts[1:]:
        assert not any(isinstance(t, SPECIAL) for t in d.answer_vars)
