import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stmreg import Bindings, Formula, RegConfig, ResolutionQuery, resolve
from stmreg.core import UnknownPredicateError
from stmreg.harness import load_scenario
from stmreg.harness.worlds import random_world, unary_predicates
from stmreg.resolver import ResolutionError

from conftest import prop, ref


def query(*preds, var="X"):
    return ResolutionQuery(var, tuple((Formula(p, ((var, "object"),)), Bindings()) for p in preds))


def test_resolve_box_in_demo(demo):
    _, world = demo
    result = resolve(query("box"), world)
    assert result.candidates == (ref("objects_1"), ref("objects_2"))
    assert result.ambiguous
    for e in ("objects_1", "objects_2"):
        assert world["objects"].stm_contents(ref(e)) == [prop("box", e)]
    assert world["objects"].stm_contents(ref("objects_3")) == []


def test_resolve_table_is_unique(demo):
    _, world = demo
    result = resolve(query("table"), world)
    assert result.candidates == (ref("objects_3"),)
    assert not result.ambiguous


def test_spillover_prefixes():
    world = load_scenario("tall_red_box").build()
    result = resolve(query("tall", "red", "box"), world)
    assert result.candidates == (ref("objects_1"),)
    stm = lambda e: set(world["objects"].stm_contents(ref(e)))
    assert stm("objects_1") == {prop("tall", "objects_1"), prop("red", "objects_1"), prop("box", "objects_1")}
    assert stm("objects_2") == {prop("tall", "objects_2"), prop("red", "objects_2")}
    assert stm("objects_3") == {prop("tall", "objects_3")}
    assert stm("objects_4") == set()


def test_query_validation(demo):
    _, world = demo
    with pytest.raises(ResolutionError):
        ResolutionQuery("X", ())
    with pytest.raises(ResolutionError):
        ResolutionQuery("X", ((Formula("on", (("X", "object"), ("Y", "object"))), Bindings()),))
    with pytest.raises(ResolutionError):
        ResolutionQuery("Z", ((Formula("red", (("X", "object"),)), Bindings()),))
    with pytest.raises(UnknownPredicateError):
        resolve(query("purple"), world)


def test_population_can_be_disabled(demo):
    _, world = demo
    resolve(query("box"), world, RegConfig(populate_stm=False))
    assert world["objects"].stm_contents(ref("objects_1")) == []


@settings(max_examples=150, deadline=None)
@given(seed=st.integers(0, 10**6), data=st.data())
def test_resolver_matches_brute_force_filter(seed, data):
    world = random_world(random.Random(seed), binary=False, max_consultants=1)
    preds = unary_predicates(world)
    chosen = data.draw(st.lists(st.sampled_from(preds), min_size=1, max_size=4, unique=True))
    q = ResolutionQuery("X", tuple((f, Bindings()) for f in chosen))
    tau = 0.5
    result = resolve(q, world)
    expected = [
        e for e in world.entities() if all(world.lookup(e, f, {"X": e}) > tau for f in chosen)
    ]
    assert list(result.candidates) == expected

    # reversed order: same survivors
    fresh = random_world(random.Random(seed), binary=False, max_consultants=1)
    rev = ResolutionQuery("X", tuple((f, Bindings()) for f in reversed(chosen)))
    assert set(resolve(rev, fresh).candidates) == set(expected)

    # each entity's buffer holds exactly the longest satisfied prefix
    c = world.consultants[0]
    for e in world.entities():
        prefix = []
        for f in chosen:
            if world.lookup(e, f, {"X": e}) > tau:
                prefix.append(str(f.predicate))
            else:
                break
        assert sorted(p.predicate for p in c.stm_contents(e)) == sorted(prefix)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_monotone_filtering(seed):
    preds = unary_predicates(random_world(random.Random(seed), binary=False, max_consultants=1))
    survivors = None
    for k in range(1, len(preds) + 1):
        fresh = random_world(random.Random(seed), binary=False, max_consultants=1)
        q = ResolutionQuery("X", tuple((f, Bindings()) for f in preds[:k]))
        now = set(resolve(q, fresh).candidates)
        if survivors is not None:
            assert now <= survivors
        survivors = now
