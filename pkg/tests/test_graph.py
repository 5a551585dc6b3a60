import pytest
from hypothesis import given
from hypothesis import strategies as st

from metachem.graph import (
    GraphError,
    GraphParseError,
    NodeId,
    NodeKind,
    access,
    hard,
    make_graph,
    parse_graph,
    serialize_graph,
    targets,
    to_dot,
    validate,
)
from metachem.stringcat import build_macro, build_micro_process


def codes(g):
    return [(v.code, v.severity) for v in validate(g)]


SPLIT_DOC = """
[nodes]
a:split action start
S:composite sample
[control]
a:split -> a:split
[info]
a:split read S:composite
a:split pull S:composite
a:split push S:composite
"""


def test_parse_split_document():
    g = parse_graph(SPLIT_DOC)
    assert len(g.nodes) == 2
    assert len(g.info_edges) == 3
    acc = access(g, "a:split")
    assert acc.readable == acc.pullable == acc.pushable == {"S:composite"}


def test_parse_empty_node_list():
    with pytest.raises(GraphParseError, match="no start node"):
        parse_graph("[nodes]\n[control]\n")


@pytest.mark.parametrize(
    "doc, fragment",
    [
        ("[nodes]\na:x action start\na:x action\n", "duplicate"),
        ("[nodes]\na:x blob start\n", "unknown kind"),
        ("[nodes]\na:x action start\n[control]\na:x -> s:y\n", "undeclared"),
        ("[nodes]\na:x action start\n[control]\na:x => a:x\n", "line 4"),
        ("[nodes]\nq:x action start\n", "bad node name"),
        ("[nodes]\na:x sampler start\n", "tagged"),
        ("[wat]\n", "unknown section"),
        ("[graph]\nlevel sideways\n", "level"),
    ],
)
def test_parse_errors(doc, fragment):
    with pytest.raises(GraphParseError, match=fragment):
        parse_graph(doc)


def test_parse_error_carries_line_number():
    with pytest.raises(GraphParseError) as exc:
        parse_graph("[nodes]\na:x action start\n[control]\na:x a:x\n")
    assert exc.value.line == 4


def test_stringcat_micro_graph_members():
    g = build_micro_process()
    assert set(g.containers) == {"T:tanks", "T:tank", "S:composite"}
    behaviors = {g.by_id[c].behavior_key for c in g.controls if c.kind is not NodeKind.TERMINATION}
    assert behaviors == {"s:choose", "s:sampler", "d:decomp", "a:split", "a:concat", "s:return", "s:commit"}


def test_targets():
    g = build_micro_process()
    assert targets(g, "d:decomp") == {"a:split", "s:sampler"}
    assert len(targets(g, "a:split")) == 1
    assert targets(g, "t:exit") == frozenset()
    with pytest.raises(GraphError):
        targets(g, "a:nope")


def test_access_of_time_observer():
    g = build_macro(True)
    acc = access(g, "o:time")
    assert acc.readable == acc.pullable == acc.pushable == {"V:time"}


def test_access_without_edges_and_on_containers():
    g = make_graph(["s:a", "t:end"], [("s:a", "t:end")], [], "s:a")
    acc = access(g, "s:a")
    assert not acc.readable and not acc.pullable and not acc.pushable
    g2 = build_macro(True)
    with pytest.raises(GraphError):
        access(g2, "T:tanks")


def _g(nodes, control, info, start, macro=False):
    return make_graph(nodes, control, info, start, macro)


def test_decision_with_two_targets_is_fine():
    g = _g(["d:x", "s:a", "s:b", "V:v"], [("d:x", "s:a"), ("d:x", "s:b"), ("s:a", "d:x"), ("s:b", "d:x")], [("d:x", "read", "V:v")], "d:x")
    assert codes(g) == []


def test_decision_needs_two_targets():
    g = _g(["d:x", "s:a"], [("d:x", "s:a"), ("s:a", "d:x")], [], "d:x")
    assert ("OUT_DEGREE", "hard") in codes(g)


def test_sampler_needs_one_target():
    g = _g(["s:a", "s:b", "s:c"], [("s:a", "s:b"), ("s:a", "s:c"), ("s:b", "s:a"), ("s:c", "s:a")], [], "s:a")
    assert ("OUT_DEGREE", "hard") in codes(g)


def test_termination_may_have_no_target():
    g = _g(["s:a", "t:end"], [("s:a", "t:end")], [], "s:a")
    assert codes(g) == []


def test_action_push_to_tank_is_hard_in_micro_graphs():
    g = _g(["a:x", "T:t"], [("a:x", "a:x")], [("a:x", "read,push", "T:t")], "a:x")
    assert codes(g) == [("ACCESS_PUSH", "hard")]


def test_action_on_tank_is_only_a_warning_at_macro_level():
    g = _g(["a:x", "T:t"], [("a:x", "a:x")], [("a:x", "io", "T:t")], "a:x", macro=True)
    assert codes(g) == [("NOTATION_ABUSE", "warn")]
    assert hard(validate(g)) == []


def test_pull_without_read():
    g = _g(["s:x", "T:t"], [("s:x", "s:x")], [("s:x", "pull", "T:t")], "s:x")
    assert ("PULL_WITHOUT_READ", "hard") in codes(g)


def test_push_without_read():
    g = _g(["s:x", "T:t"], [("s:x", "s:x")], [("s:x", "push", "T:t")], "s:x")
    assert ("PUSH_WITHOUT_READ", "hard") in codes(g)


@pytest.mark.parametrize(
    "kind, container, code",
    [
        ("o", "T:t", "ACCESS_PUSH"),
        ("o", "S:t", "ACCESS_PULL"),
        ("s", "V:t", "ACCESS_PUSH"),
        ("d", "V:t", "ACCESS_PUSH"),
    ],
)
def test_access_table(kind, container, code):
    c = f"{kind}:x"
    other = "s:y" if kind == "d" else None
    nodes = [c, container] + ([other, "s:z"] if other else [])
    control = [(c, "s:y"), (c, "s:z"), ("s:y", c), ("s:z", c)] if other else [(c, c)]
    kinds = "read,push" if code == "ACCESS_PUSH" else "read,pull"
    g = _g(nodes, control, [(c, kinds, container)], c)
    assert (code, "hard") in codes(g)


def test_unreachable_is_a_warning():
    g = _g(["s:a", "s:b", "t:end"], [("s:a", "t:end"), ("s:b", "t:end")], [], "s:a")
    assert codes(g) == [("UNREACHABLE", "warn")]


def test_kind_partition_and_dangling():
    g = _g(["s:a", "T:t"], [("s:a", "T:t")], [], "s:a")
    assert ("KIND_PARTITION", "hard") in codes(g)
    g = _g(["s:a"], [("s:a", "s:ghost")], [], "s:a")
    assert ("DANGLING_EDGE", "hard") in codes(g)


def test_validate_is_pure():
    g = build_macro(True)
    assert validate(g) == validate(g)


def test_to_dot_mentions_every_node():
    g = build_micro_process()
    dot = to_dot(g)
    assert dot.startswith("digraph")
    for n in g.by_id:
        assert f'"{n}"' in dot


def test_node_id_kinds():
    assert NodeId("S:composite").kind is NodeKind.SAMPLE
    assert NodeId("t:end").kind is NodeKind.TERMINATION
    with pytest.raises(ValueError):
        NodeId("composite")


# round trip over random graphs
labels = st.text("abcxyz_", min_size=1, max_size=4)
control_tags = st.sampled_from("sodat")
container_tags = st.sampled_from("TSV")


@st.composite
def graphs(draw):
    ctrl = sorted({f"{t}:{l}" for t, l in draw(st.lists(st.tuples(control_tags, labels), min_size=1, max_size=6))})
    cont = sorted({f"{t}:{l}" for t, l in draw(st.lists(st.tuples(container_tags, labels), max_size=4))})
    edges = draw(st.lists(st.tuples(st.sampled_from(ctrl), st.sampled_from(ctrl)), max_size=8))
    info = []
    if cont:
        info = draw(
            st.lists(
                st.tuples(st.sampled_from(ctrl), st.sampled_from(["read", "pull", "push", "io"]), st.sampled_from(cont)),
                max_size=8,
            )
        )
    return make_graph(ctrl + cont, edges, info, draw(st.sampled_from(ctrl)), draw(st.booleans()))


@given(graphs())
def test_serialize_round_trip(g):
    assert parse_graph(serialize_graph(g)) == g


@given(graphs())
def test_accepted_graphs_satisfy_edge_invariants(g):
    if hard(validate(g)):
        return
    for c in g.controls:
        acc = access(g, c)
        assert acc.pullable <= acc.readable and acc.pushable <= acc.readable
        n = len(targets(g, c))
        if c.kind is NodeKind.DECISION:
            assert n >= 2
        elif c.kind is not NodeKind.TERMINATION:
            assert n == 1
