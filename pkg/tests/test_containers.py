import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from metachem.containers import (
    EnvCollision,
    NotPresent,
    ParticleBag,
    SystemState,
    UnknownContainer,
    bag,
    container_add,
    container_read,
    container_remove,
    partition,
    retag,
    snapshot,
    subbag,
    untag,
)
from metachem.stringcat import build_micro_process

bags = st.dictionaries(st.sampled_from("abcdef"), st.integers(1, 4)).map(ParticleBag)


@pytest.fixture
def state():
    return SystemState.for_graph(build_micro_process())


def test_for_graph_has_exactly_the_containers(state):
    assert set(state.particles) == {"T:tanks", "T:tank", "S:composite"}
    assert state.environments == {}
    with pytest.raises(UnknownContainer):
        SystemState.for_graph(build_micro_process(), {"T:nope": ["a"]})


def test_read_copies(state):
    assert container_read(state, "T:tank") == ParticleBag()
    container_add(state, "S:composite", ["prexxpost"])
    first = container_read(state, "S:composite")
    assert first == bag("prexxpost")
    first._add(bag("zzz"))
    assert container_read(state, "S:composite") == bag("prexxpost")
    with pytest.raises(UnknownContainer):
        container_read(state, "S:missing")


def test_add_split_result(state):
    container_add(state, "S:composite", {"prex": 1, "xpost": 1})
    assert len(state.particles["S:composite"]) == 2
    before = snapshot(state)
    container_add(state, "S:composite", ParticleBag())
    assert snapshot(state) == before


def test_remove(state):
    container_add(state, "T:tank", ["a"])
    container_remove(state, "T:tank", ["a"])
    assert state.particles["T:tank"] == ParticleBag()
    container_add(state, "T:tank", ["a"])
    with pytest.raises(NotPresent):
        container_remove(state, "T:tank", ["a", "a"])


def test_environment_store():
    s = SystemState("s:x", {}, {"V:time": {"time": 5}})
    with pytest.raises(EnvCollision):
        container_add(s, "V:time", {"time": 6})
    container_remove(s, "V:time", ["time"])
    assert s.environments["V:time"] == {}
    with pytest.raises(NotPresent):
        container_remove(s, "V:time", ["time"])


def test_env_values_are_copied_in():
    s = SystemState("s:x", {}, {"V:log": {}})
    rows = [1, 2]
    container_add(s, "V:log", {"rows": rows})
    rows.append(3)
    assert s.environments["V:log"]["rows"] == [1, 2]


def test_subbag_examples():
    assert subbag(ParticleBag(), bag("q"))
    assert not subbag(ParticleBag({"x": 2}), ParticleBag({"x": 1}))
    assert subbag(ParticleBag({"x": 1, "y": 1}), ParticleBag({"x": 2, "y": 1, "z": 3}))


@given(bags, bags)
def test_subbag_matches_definition(a, b):
    expected = all(a.count(p) <= b.count(p) for p in set(a) | set(b))
    assert subbag(a, b) == expected


@given(bags, bags)
def test_add_then_remove_is_identity(a, b):
    assert (a + b) - b == a


@given(bags)
def test_counts_positive_and_size(b):
    assert all(n >= 1 for _, n in b.items())
    assert len(b) == sum(n for _, n in b.items()) == len(b.elements())


def test_bag_rejects_negative_counts():
    with pytest.raises(ValueError):
        ParticleBag({"a": -1})


def test_insertion_order_kept():
    b = ParticleBag()
    b._add(bag("second"))
    b._add(bag("first"))
    assert b.elements() == ["second", "first"]


def test_tags():
    assert untag((2, "ab")) == (2, "ab")
    assert untag("ab") == (None, "ab")
    assert retag(None, "ab") == "ab"
    parts = partition(ParticleBag({(0, "a"): 2, (1, "b"): 1, (0, "c"): 1}))
    assert parts[0] == ParticleBag({(0, "a"): 2, (0, "c"): 1})
    assert parts[1] == ParticleBag({(1, "b"): 1})


def test_snapshot_is_canonical():
    a = SystemState("s:x", {"T:t": ParticleBag(["b", "a"])}, {"V:v": {"y": 1, "x": (1.5, 2)}})
    b = SystemState("s:x", {"T:t": ParticleBag(["a", "b"])}, {"V:v": {"x": (1.5, 2), "y": 1}})
    assert snapshot(a) == snapshot(b)
    doc = json.loads(snapshot(a))
    assert doc["particles"]["T:t"] == [["a", 1], ["b", 1]]
