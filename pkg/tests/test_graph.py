import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ensemble_spectra.graph import (
    ConstraintSpec,
    Graph,
    GraphFormatError,
    complement,
    constraint_value,
    degrees,
    format_edge_list,
    havel_hakimi,
    in_gamma,
    is_graphical,
    num_pairs,
    pair_index,
    parse_edge_list,
    read_edge_list,
    triu_pairs,
    write_edge_list,
)

from oracles import realized_degree_sequences

K4 = Graph.complete(4)
C4 = Graph.from_edges(4, [(0, 1), (1, 2), (2, 3), (0, 3)])


@st.composite
def graphs(draw, max_n=12):
    n = draw(st.integers(1, max_n))
    bits = draw(st.lists(st.booleans(), min_size=num_pairs(n), max_size=num_pairs(n)))
    return Graph.from_pair_bits(n, np.array(bits, dtype=bool))


def test_degrees_examples():
    assert degrees(Graph.empty(3)).tolist() == [0, 0, 0]
    assert degrees(K4).tolist() == [3, 3, 3, 3]
    path = Graph.from_edges(3, [(0, 1), (1, 2)])
    assert degrees(path).tolist() == [1, 2, 1]


def test_constraint_value_examples():
    assert constraint_value(K4, ConstraintSpec.edge_count(4, 0)) == 6
    assert constraint_value(C4, ConstraintSpec.constant_degree(4, 2)) == (2, 2, 2, 2)
    assert constraint_value(Graph.empty(5), ConstraintSpec.edge_count(5, 0)) == 0


def test_constraint_value_dimension_mismatch():
    with pytest.raises(ValueError):
        constraint_value(K4, ConstraintSpec.edge_count(5, 1))


def test_is_graphical_examples():
    assert not is_graphical(ConstraintSpec.constant_degree(3, 1))
    assert is_graphical(ConstraintSpec.degree_sequence((3, 3, 3, 3)))
    assert not is_graphical(ConstraintSpec.degree_sequence((3, 3, 1, 1)))


def test_is_graphical_out_of_range_is_false():
    assert not is_graphical(ConstraintSpec.degree_sequence((4, 1, 1, 1, 1, 0, 0, 0)[:4]))
    assert not is_graphical(ConstraintSpec.edge_count(4, 7))
    assert not is_graphical(ConstraintSpec.edge_count(4, -1))
    assert is_graphical(ConstraintSpec.edge_count(4, 6))


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 6])
def test_is_graphical_matches_enumeration(n):
    realized = realized_degree_sequences(n)
    for seq in itertools.product(range(n), repeat=n):
        assert is_graphical(ConstraintSpec.degree_sequence(seq)) == (seq in realized), seq


def test_complement_examples():
    assert complement(K4) == Graph.empty(4)
    assert complement(C4) == Graph.from_edges(4, [(0, 2), (1, 3)])
    assert complement(Graph.empty(5)) == Graph.complete(5)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_complement_involution_exhaustive(n):
    for mask in range(1 << num_pairs(n)):
        g = Graph.from_mask(n, mask)
        c = complement(g)
        assert complement(c) == g
        assert c.edge_count == num_pairs(n) - g.edge_count


@given(graphs())
@settings(max_examples=200, deadline=None)
def test_handshake(g):
    assert degrees(g).sum() == 2 * g.edge_count


@given(graphs())
@settings(max_examples=100, deadline=None)
def test_dense_round_trip_is_symmetric_loopless(g):
    a = g.to_dense()
    assert np.array_equal(a, a.T)
    assert not np.any(np.diag(a))
    assert Graph.from_dense(a) == g
    assert Graph.from_edges(g.n, g.edges()) == g
    assert Graph.from_mask(g.n, g.mask) == g


def test_pair_index_matches_triu_order():
    for n in range(1, 9):
        rows, cols = triu_pairs(n)
        for k, (i, j) in enumerate(zip(rows, cols)):
            assert pair_index(n, int(i), int(j)) == k


def test_bit_packing_spans_words():
    n = 20
    g = Graph.from_edges(n, [(0, 1), (18, 19), (5, 17)])
    assert g.words.dtype == np.dtype("<u8")
    assert len(g.words) == -(-num_pairs(n) // 64)
    assert g.has_edge(19, 18) and g.has_edge(5, 17) and not g.has_edge(0, 2)
    assert sorted(g.edges()) == [(0, 1), (5, 17), (18, 19)]


def test_graph_is_immutable():
    with pytest.raises(ValueError):
        K4.words[0] = 0


def test_from_dense_rejects_bad_input():
    with pytest.raises(GraphFormatError):
        Graph.from_dense(np.array([[1, 0], [0, 0]]))
    with pytest.raises(GraphFormatError):
        Graph.from_dense(np.array([[0, 1], [0, 0]]))


def test_in_gamma_examples():
    assert in_gamma(C4, ConstraintSpec.constant_degree(4, 2))
    assert not in_gamma(C4, ConstraintSpec.edge_count(4, 3))
    assert in_gamma(K4, ConstraintSpec.edge_count(4, 6))


def test_havel_hakimi_realizes_sequences():
    for n in range(1, 7):
        for seq in realized_degree_sequences(n):
            g = havel_hakimi(seq)
            assert tuple(degrees(g).tolist()) == seq
    with pytest.raises(ValueError):
        havel_hakimi((3, 3, 1, 1))


def test_edge_list_round_trip(tmp_path):
    path = tmp_path / "c4.txt"
    write_edge_list(C4, path)
    assert path.read_text().splitlines()[0] == "4 4"
    assert read_edge_list(path) == C4
    assert parse_edge_list(format_edge_list(Graph.empty(3))) == Graph.empty(3)


@pytest.mark.parametrize(
    "text",
    [
        "3 1\n1 1\n",  # loop
        "3 1\n2 1\n",  # i > j
        "3 2\n0 1\n0 1\n",  # duplicate
        "3 1\n0 3\n",  # out of range
        "3 2\n0 1\n",  # count mismatch
        "3\n",  # bad header
        "3 1\n0 x\n",  # not an integer
    ],
)
def test_edge_list_rejects_malformed(text):
    with pytest.raises(GraphFormatError):
        parse_edge_list(text)


def test_from_edges_rejects_bad_edges():
    with pytest.raises(GraphFormatError):
        Graph.from_edges(3, [(0, 0)])
    with pytest.raises(GraphFormatError):
        Graph.from_edges(3, [(0, 1), (1, 0)])
    with pytest.raises(GraphFormatError):
        Graph.from_edges(3, [(0, 5)])


def test_constraint_spec_json_round_trip(tmp_path):
    for spec in (ConstraintSpec.edge_count(5, 3), ConstraintSpec.degree_sequence((2, 2, 1, 1))):
        path = tmp_path / "c.json"
        path.write_text(spec.to_json())
        assert ConstraintSpec.load(path) == spec
        assert ConstraintSpec.from_dict(spec.to_dict()) == spec
    assert ConstraintSpec.edge_count(4, 3).digest != ConstraintSpec.edge_count(4, 2).digest


def test_constraint_spec_validation():
    with pytest.raises(ValueError):
        ConstraintSpec("triangles", 4, 1)
    with pytest.raises(ValueError):
        ConstraintSpec.from_dict({"n": 3, "kind": "degree_sequence", "target": [1, 1]})
    with pytest.raises(ValueError):
        ConstraintSpec.from_dict({"n": 3, "kind": "edge_count", "target": [1]})
    with pytest.raises(ValueError):
        ConstraintSpec.from_dict({"n": 3})
