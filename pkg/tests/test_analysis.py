import math
import random

from hypothesis import given, settings, strategies as st

from wsdatalog.analysis import (DependencyGraph, Marking, build_dependency_graph, classify, compute_ranks,
                                mark_variables)
from wsdatalog.model import Position, Variable, schema_of
from wsdatalog.syntax import parse_program

from gen import random_rule

MARKING_RULES = """\
r(X,Y), p(X,Z) -> s(X,Y,Z).
u(X) -> exists Y: r(Y,X).
s(X,Y,Z) -> u(Y).
"""

MIXED_RULES = """\
v(X) -> exists Y: r(X,Y).
p(X,Y) -> exists Z: p(Y,Z).
r(X,Y), r(Y,Z) -> p(X,Z).
p(X,Y), p(Y,Z) -> t(Y,Z).
"""


def P(pred, i):
    return Position(pred, i)


def test_marking_golden():
    m = mark_variables(parse_program(MARKING_RULES).rules)
    assert m.for_rule(0) == {"X", "Z"}
    assert m.for_rule(1) == set()
    assert m.for_rule(2) == {"X", "Z"}


def test_marking_no_marks():
    m = mark_variables(parse_program("p(X,Y) -> q(X,Y).").rules)
    assert m.marked == frozenset()


def test_marking_mixed_program():
    m = mark_variables(parse_program(MIXED_RULES).rules)
    assert {"X", "Y"} <= m.for_rule(1)
    assert {"Y"} <= m.for_rule(2)
    assert {"X"} <= m.for_rule(3)
    assert "Y" not in m.for_rule(3)
    assert m.is_marked(2, Variable("Y"))


def test_dependency_graph_golden():
    g = build_dependency_graph(parse_program(MARKING_RULES).rules)
    assert g.special_edges == {(P("u", 1), P("r", 1))}
    assert {(P("r", 1), P("s", 1)), (P("p", 1), P("s", 1)), (P("r", 2), P("s", 2)),
            (P("p", 2), P("s", 3)), (P("s", 2), P("u", 1))} <= g.normal_edges


def test_dependency_graph_no_existentials():
    g = build_dependency_graph(parse_program("p(X,Y) -> q(Y,X).").rules)
    assert g.special_edges == frozenset()
    assert g.normal_edges == {(P("p", 1), P("q", 2)), (P("p", 2), P("q", 1))}


def test_dependency_graph_self_loop_rule():
    g = build_dependency_graph(parse_program("p(X,Y) -> exists Z: p(Y,Z).").rules)
    assert g.normal_edges == {(P("p", 2), P("p", 1))}
    assert g.special_edges == {(P("p", 2), P("p", 2))}


def test_ranks_golden():
    ranks = compute_ranks(build_dependency_graph(parse_program(MARKING_RULES).rules))
    for pos in [P("u", 1), P("s", 2), P("r", 2), P("s", 3), P("p", 1), P("p", 2)]:
        assert ranks[pos] == 0
    assert ranks[P("r", 1)] == 1 and ranks[P("s", 1)] == 1
    assert ranks.pi_inf == frozenset()


def test_ranks_mixed_program():
    ranks = compute_ranks(build_dependency_graph(parse_program(MIXED_RULES).rules))
    assert ranks.pi_f == {P("v", 1), P("r", 1), P("r", 2)}
    assert ranks.pi_inf == {P("p", 1), P("p", 2), P("t", 1), P("t", 2)}


def test_ranks_empty_rules_over_schema():
    ranks = compute_ranks(build_dependency_graph([], {"p": 2}))
    assert ranks.rank == {P("p", 1): 0, P("p", 2): 0}


def test_classify_weakly_acyclic_program():
    rep = classify(parse_program(MARKING_RULES).rules)
    assert (rep.sticky, rep.weakly_acyclic, rep.weakly_sticky) == (False, True, True)


def test_classify_mixed_program():
    rep = classify(parse_program(MIXED_RULES).rules)
    assert (rep.sticky, rep.weakly_acyclic, rep.weakly_sticky) == (False, False, True)
    assert not rep.zero_infinity


def test_classify_not_weakly_sticky():
    rep = classify(parse_program("p(X,Y) -> exists Z: p(Y,Z).\np(X,Y), p(Y,Z) -> s(X,Z).").rules)
    assert not rep.weakly_sticky


def test_classify_vacuous():
    rep = classify([])
    assert rep.sticky and rep.weakly_acyclic and rep.weakly_sticky and rep.zero_infinity


# -- properties ------------------------------------------------------------------

def _marking_random_schedule(rules, rng):
    marked = set()
    for i, r in enumerate(rules):
        head = set(r.head.variables())
        marked |= {(i, v.name) for v in r.body_variables() if v not in head}
    changed = True
    while changed:
        changed = False
        order = list(enumerate(rules))
        rng.shuffle(order)
        for i, r in order:
            positions = [pos for a in r.body for pos, t in a.positions()
                         if isinstance(t, Variable) and (i, t.name) in marked]
            for pos in positions:
                for j, s in enumerate(rules):
                    body_vars = set(s.body_variables())
                    for hpos, t in s.head.positions():
                        if hpos == pos and t in body_vars and (j, t.name) not in marked:
                            marked.add((j, t.name))
                            changed = True
    return frozenset(marked)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**9))
def test_marking_schedule_independent(seed):
    rng = random.Random(seed)
    rules = [random_rule(rng) for _ in range(rng.randint(1, 4))]
    assert mark_variables(rules).marked == _marking_random_schedule(rules, rng)


def _ranks_by_walks(g: DependencyGraph):
    vertices = sorted(g.vertices)
    edges = [(u, v, 1 if (u, v) in g.special_edges else 0) for u, v in g.normal_edges | g.special_edges]
    s = len(g.special_edges)
    best = {v: 0 for v in vertices}
    for _ in range(len(vertices) * (s + 3)):
        nxt = dict(best)
        for u, v, w in edges:
            nxt[v] = max(nxt[v], best[u] + w)
        best = nxt
    return {v: (math.inf if best[v] > s else best[v]) for v in vertices}


POS = [P("a", 1), P("a", 2), P("b", 1), P("b", 2), P("c", 1), P("c", 2), P("d", 1), P("d", 2)]
EDGE = st.tuples(st.sampled_from(POS), st.sampled_from(POS))


@settings(max_examples=300, deadline=None)
@given(st.sets(EDGE, max_size=10), st.sets(EDGE, max_size=3))
def test_ranks_match_walk_enumeration(normal, special):
    g = DependencyGraph(frozenset(POS), frozenset(normal), frozenset(special))
    assert compute_ranks(g).rank == _ranks_by_walks(g)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10**9))
def test_class_implications_and_partition(seed):
    rng = random.Random(seed)
    rules = [random_rule(rng) for _ in range(rng.randint(1, 4))]
    rep = classify(rules)
    if rep.sticky or rep.weakly_acyclic:
        assert rep.weakly_sticky
    schema = schema_of(rules)
    every = {P(p, i) for p, n in schema.items() for i in range(1, n + 1)}
    assert rep.ranks.pi_f | rep.ranks.pi_inf == every
    assert not rep.ranks.pi_f & rep.ranks.pi_inf
