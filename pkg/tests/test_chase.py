import random

import pytest
from hypothesis import given, settings, strategies as st

from wsdatalog.chase import (GroundingConfig, answer_over_ground, certain_answers_oracle, ground_ws, minimal_model,
                             restricted_chase, resumptions_for)
from wsdatalog.errors import NotWeaklySticky, RuleCapExceeded
from wsdatalog.model import Constant, LabeledNull, Program, pi_homomorphic, schema_of
from wsdatalog.analysis import classify
from wsdatalog.syntax import parse_program, parse_query

from gen import random_ws_case

CHAIN = """\
p(a,b). c(b).
p(X,Y) -> exists Z: p(Y,Z).
p(X,Y), c(X), p(Y,Z) -> u(Y).
"""

INTRO = """\
emp(joe). mgr(ann).
emp(X) -> exists Y: rep(X,Y).
rep(X,Y) -> mgr(Y).
"""


def rules_text(gp):
    return [str(r) for r in gp.ground_rules]


def test_chain_no_resumption():
    gp = ground_ws(parse_program(CHAIN))
    assert rules_text(gp) == ["p(a,b) -> p(b,_n1)."]
    assert gp.phase_of == [0]


def test_chain_one_resumption():
    gp = ground_ws(parse_program(CHAIN), GroundingConfig(resumptions=1))
    assert rules_text(gp) == [
        "p(a,b) -> p(b,_f1).",
        "p(b,_f1) -> p(_f1,_n2).",
        "p(b,_f1), c(b), p(_f1,_n2) -> u(_f1).",
    ]
    assert gp.phase_of == [0, 1, 1]
    assert gp.resumptions_performed == 1


def test_chain_boolean_query_needs_resumption():
    p = parse_program(CHAIN)
    q = parse_query("q() :- u(X).")
    assert resumptions_for(q) == 1
    assert answer_over_ground(q, ground_ws(p)) == frozenset()
    assert answer_over_ground(q, ground_ws(p, GroundingConfig(resumptions=1))) == {()}
    assert certain_answers_oracle(q, p, 8) == {()}


def test_levels_are_recorded():
    gp = ground_ws(parse_program(CHAIN), GroundingConfig(resumptions=1))
    lv = {str(a): n for a, n in gp.level.items()}
    assert lv["p(a,b)"] == 0 and lv["c(b)"] == 0
    assert lv["p(b,_f1)"] == 1 and lv["p(_f1,_n2)"] == 2 and lv["u(_f1)"] == 3


def test_intro_answers():
    p = parse_program(INTRO)
    q1 = parse_query("q(W1) :- rep(W1,W2).")
    q2 = parse_query("q(W1) :- mgr(W1).")
    assert answer_over_ground(q1, ground_ws(p, GroundingConfig(resumptions_for(q1)))) == {(Constant("joe"),)}
    assert answer_over_ground(q2, ground_ws(p, GroundingConfig(resumptions_for(q2)))) == {(Constant("ann"),)}


def test_intro_chase():
    res = restricted_chase(parse_program(INTRO), 3)
    assert res.saturated
    assert {str(a) for a in res.atoms} == {"mgr(ann)", "emp(joe)", "rep(joe,_n1)", "mgr(_n1)"}


def test_frontier_free_existential_terminates():
    # no frontier means no dependency edges, so the invented position keeps rank 0
    p = parse_program("p(a,a).\np(Z,Z) -> exists E: p(E,E).\np(X,X) -> r(X,X).")
    for k in range(3):
        gp = ground_ws(p, GroundingConfig(resumptions=k))
        assert len(gp.ground_rules) == 3


def test_rejects_non_weakly_sticky():
    with pytest.raises(NotWeaklySticky):
        ground_ws(parse_program("p(a,b).\np(X,Y) -> exists Z: p(Y,Z).\np(X,Y), p(Y,Z) -> s(X,Z)."))


def test_rule_cap():
    with pytest.raises(RuleCapExceeded):
        ground_ws(parse_program(CHAIN), GroundingConfig(resumptions=3, max_rules=2))


def test_negative_resumptions_rejected():
    with pytest.raises(ValueError):
        GroundingConfig(resumptions=-1)


def test_empty_program():
    gp = ground_ws(Program())
    assert gp.ground_rules == [] and minimal_model(gp) == frozenset()


def test_minimal_model_is_least_fixpoint():
    p = parse_program("e(a,b). e(b,c).\ne(X,Y) -> t(X,Y).\nt(X,Y), e(Y,Z) -> t(X,Z).")
    m = minimal_model(ground_ws(p))
    assert {str(a) for a in m if a.predicate == "t"} == {"t(a,b)", "t(b,c)", "t(a,c)"}


def test_restricted_chase_reports_saturation():
    assert restricted_chase(parse_program(INTRO), 8).saturated
    res = restricted_chase(parse_program(CHAIN), 5)
    assert not res.saturated
    assert max(res.level.values()) == 5


def test_oracle_answers_contain_only_constants():
    p = parse_program(INTRO)
    got = certain_answers_oracle(parse_query("q(Y) :- mgr(Y)."), p, 8)
    assert got == {(Constant("ann"),)}


def test_deterministic_output():
    p = parse_program(CHAIN)
    first = rules_text(ground_ws(p, GroundingConfig(resumptions=2)))
    for _ in range(3):
        assert rules_text(ground_ws(p, GroundingConfig(resumptions=2))) == first


# -- properties ------------------------------------------------------------------

def last_phase_heads_distinct(gp, pi_f):
    """No final-phase head maps onto an earlier one of that phase while fixing finite-rank slots."""
    heads = [r.head for r, ph in zip(gp.ground_rules, gp.phase_of) if ph == gp.resumptions_performed]
    for j, later in enumerate(heads):
        for earlier in heads[:j]:
            if pi_homomorphic(later, earlier, pi_f):
                return False
    return True


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**9))
def test_no_duplicate_heads_within_a_phase(seed):
    p, q = random_ws_case(random.Random(seed))
    pi_f = classify(p.rules, schema_of(p.rules, p.database)).ranks.pi_f
    for k in range(resumptions_for(q) + 1):
        assert last_phase_heads_distinct(ground_ws(p, GroundingConfig(resumptions=k)), pi_f)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**9))
def test_grounding_agrees_with_oracle(seed):
    p, q = random_ws_case(random.Random(seed))
    gp = ground_ws(p, GroundingConfig(resumptions_for(q)))
    assert answer_over_ground(q, gp) == certain_answers_oracle(q, p, 8)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**9))
def test_more_resumptions_never_lose_answers(seed):
    p, q = random_ws_case(random.Random(seed))
    prev = frozenset()
    for k in range(resumptions_for(q) + 2):
        got = answer_over_ground(q, ground_ws(p, GroundingConfig(resumptions=k)))
        assert prev <= got
        prev = got


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**9))
def test_ground_model_is_sound(seed):
    # every atom derived from the ground program maps into the chase result
    p, q = random_ws_case(random.Random(seed))
    chase = restricted_chase(p, 8).atoms
    for a in minimal_model(ground_ws(p, GroundingConfig(resumptions=2))):
        if all(isinstance(t, Constant) for t in a.args):
            assert a in chase


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**9))
def test_ground_rules_are_ground_and_phases_ordered(seed):
    p, q = random_ws_case(random.Random(seed))
    gp = ground_ws(p, GroundingConfig(resumptions=2))
    assert all(r.is_ground() for r in gp.ground_rules)
    assert gp.phase_of == sorted(gp.phase_of)
    assert all(not isinstance(t, LabeledNull) for r, ph in zip(gp.ground_rules, gp.phase_of) if ph < 2
               for a in (*r.body, r.head) for t in a.args)
