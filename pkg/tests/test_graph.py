import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from signedvoter.graph import (
    GraphError, SignedGraph, degree_profile, from_arrays, from_edge_list, largest_connected_component,
    laplacian, read_edge_csv, transform, undirected, weak_components, write_edge_csv,
)
from conftest import random_signed_graph


def test_single_rating_reverses_direction():
    g = from_edge_list([("A", "B", 10)])
    assert g.n == 2
    a, b = g.labels.index("A"), g.labels.index("B")
    assert g.edges() == [(b, a, 10.0)]
    assert g.pos_in_strength[a] == 10 and g.pos_in_strength[b] == 0


def test_empty_edge_list():
    with pytest.raises(GraphError, match="empty edge list"):
        from_edge_list([])


def test_zero_rating_names_row():
    with pytest.raises(GraphError, match="row 2"):
        from_edge_list([(1, 2, 1), (2, 3, 0)])


def test_duplicate_keeps_last():
    g = from_edge_list([(1, 2, 5), (1, 3, 1), (1, 2, -4)])
    i1, i2 = g.labels.index(1), g.labels.index(2)
    (w,) = [w for s, t, w in g.edges() if (s, t) == (i2, i1)]
    assert w == -4


def test_rejects_self_loops_and_duplicates():
    with pytest.raises(GraphError):
        from_arrays(2, [0], [0], [1.0])
    with pytest.raises(GraphError):
        from_arrays(2, [0, 0], [1, 1], [1.0, 2.0])
    with pytest.raises(GraphError):
        from_arrays(2, [0], [1], [0.0])


def test_laplacian_positive_pair(pair_graph):
    assert np.array_equal(laplacian(pair_graph).toarray(), [[1, -1], [-1, 1]])


def test_laplacian_directed_negative_edge():
    # edge 2 -> 1 with weight -1 (0-based: 1 -> 0)
    g = from_arrays(2, [1], [0], [-1.0])
    assert np.array_equal(laplacian(g).toarray(), [[1, 1], [0, 0]])


def test_laplacian_diagonal_and_row_sums(rng):
    for _ in range(10):
        g = random_signed_graph(rng, 12)
        L = laplacian(g).toarray()
        strength = g.pos_in_strength + g.neg_in_strength
        assert np.allclose(np.diag(L), strength)
        off = np.abs(L - np.diag(np.diag(L))).sum(axis=1)
        assert np.allclose(off, strength)


def test_transforms():
    g = from_arrays(3, [0, 1], [1, 2], [-3.0, 2.0])
    m = transform(g, "mirror_positive")
    assert sorted(w for *_, w in m.edges()) == [2.0, 3.0]
    d = transform(g, "drop_negative")
    assert d.edges() == [(1, 2, 2.0)]
    assert transform(g, "identity") == g
    pos = from_arrays(3, [0, 1], [1, 2], [1.0, 2.0])
    for mode in ("identity", "mirror_positive", "drop_negative"):
        assert transform(pos, mode) == pos


def test_transform_edge_counts(rng):
    g = random_signed_graph(rng, 15)
    assert transform(g, "mirror_positive").num_edges == g.num_edges
    assert transform(g, "drop_negative").num_edges == g.num_edges - np.count_nonzero(g.weight < 0)


def test_lcc_two_triangles_plus_node():
    tri = [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (0, 6)]
    g = undirected(7, tri, 1.0)
    lcc = largest_connected_component(g)
    assert lcc.n == 4
    assert set(lcc.labels) == {0, 1, 2, 6}


def test_lcc_uses_weak_connectivity():
    g = from_arrays(4, [0, 1, 3], [1, 2, 2], [1.0, -1.0, 1.0])
    assert largest_connected_component(g).n == 4
    assert len(set(weak_components(g))) == 1


def test_lcc_of_connected_graph_is_itself(signed_star):
    assert largest_connected_component(signed_star) == signed_star


def test_degree_profile():
    g = from_arrays(5, [1, 2, 3], [0, 0, 0], [2.0, 3.0, -1.0])
    prof = degree_profile(g)
    assert prof[0] == (5.0, 1.0)
    assert prof[4] == (0.0, 0.0)


def test_csv_round_trip(tmp_path, rng):
    rows = [("u%d" % a, "u%d" % b, float(w)) for a, b, w in
            zip(rng.integers(0, 20, 80), rng.integers(0, 20, 80), rng.choice([-2, -1, 1, 3, 10], 80)) if a != b]
    g = from_edge_list(rows)
    path = tmp_path / "g.csv"
    write_edge_csv(g, path)
    h = read_edge_csv(path)
    assert h == g
    buf = io.StringIO()
    write_edge_csv(h, buf)
    assert buf.getvalue() == path.read_text()


def test_csv_header_and_timestamp(tmp_path):
    path = tmp_path / "r.csv"
    path.write_text("SOURCE,TARGET,RATING,TIME\n1,2,4,1289241911\n2,1,-1,1289241942\n")
    g = read_edge_csv(path)
    assert g.n == 2 and g.num_edges == 2
    path.write_text("1,2,4,1289241911\n")
    assert read_edge_csv(path).num_edges == 1


def test_gzip_input(tmp_path):
    import gzip
    path = tmp_path / "r.csv.gz"
    with gzip.open(path, "wt") as fh:
        fh.write("7,8,2\n8,9,-3\n")
    assert read_edge_csv(path).num_edges == 2


def test_undirected_mirrored_and_symmetric(rng):
    g = random_signed_graph(rng, 10, directed=False)
    edges = set(g.edges())
    assert all((t, s, w) in edges for s, t, w in edges)
    assert g.symmetric
    d = from_arrays(2, [0], [1], [1.0])
    assert not d.symmetric


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), n=st.integers(2, 12))
def test_strengths_recomputable(seed, n):
    g = random_signed_graph(np.random.default_rng(seed), n)
    pos = np.zeros(n)
    neg = np.zeros(n)
    for s, t, w in g.edges():
        if w > 0:
            pos[t] += w
        else:
            neg[t] -= w
    assert np.array_equal(pos, g.pos_in_strength)
    assert np.array_equal(neg, g.neg_in_strength)
