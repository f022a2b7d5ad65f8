import itertools
import random

import pytest
from hypothesis import given, settings, strategies as st

from veritas.graph import (
    EdgeListFile,
    EmptyGraphError,
    GraphParseError,
    SocialGraph,
    SyntheticScaleFree,
    dataset_fingerprint,
    hill_exponent,
    load_graph,
    pearson_similarity,
    scale_free_edges,
    write_edge_list,
)

from oracles import adjacency_rows, pearson_rows

# path graph 0-1-2-3-4, pair (0, 2): direct Pearson of the two adjacency rows
PATH5_PEARSON_0_2 = 0.6123724356957944
# C(3,2) core edges + 3 * 997 attachments
SYNTH_1000_3_42_EDGES = 2994


def write(tmp_path, text, name="g.txt"):
    p = tmp_path / name
    p.write_text(text)
    return EdgeListFile(str(p))


def test_triangle_file(tmp_path):
    g = load_graph(write(tmp_path, "0 1\n1 2\n2 0\n"))
    assert g.node_count == 3
    assert len(g.edges) == 3
    assert [g.degree(i) for i in range(3)] == [2, 2, 2]
    g.check_invariants()


def test_comments_duplicates_and_densify(tmp_path):
    text = "% sym unweighted\n# another comment\n10 30\n30 10\n10 30 1 1234\n30 50\n\n"
    g = load_graph(write(tmp_path, text))
    assert g.node_count == 3
    assert g.external_ids == (10, 30, 50)
    assert g.edges == {(0, 1), (1, 2)}


def test_self_loops_dropped_with_warning(tmp_path, caplog):
    g = load_graph(write(tmp_path, "0 0\n0 1\n2 2\n"))
    assert g.edges == {(0, 1)}
    assert "2 self-loop" in caplog.text


def test_load_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_graph(EdgeListFile(str(tmp_path / "missing.txt")))
    with pytest.raises(GraphParseError) as exc:
        load_graph(write(tmp_path, "0 1\n1 x\n"))
    assert exc.value.line_no == 2
    with pytest.raises(GraphParseError):
        load_graph(write(tmp_path, "0 1\n7\n"))
    with pytest.raises(EmptyGraphError):
        load_graph(write(tmp_path, "% nothing\n3 3\n"))


def test_load_idempotent(tmp_path):
    src = write(tmp_path, "5 9\n9 2\n2 5\n2 7\n")
    assert load_graph(src).adjacency == load_graph(src).adjacency


def test_synthetic_edge_count_pinned():
    g = load_graph(SyntheticScaleFree(1000, 3, 42))
    assert g.node_count == 1000
    assert len(g.edges) == SYNTH_1000_3_42_EDGES
    g.check_invariants()


@pytest.mark.parametrize("n,m", [(2, 1), (5, 1), (6, 2), (50, 4)])
def test_synthetic_edge_formula(n, m):
    assert len(set(scale_free_edges(n, m, 7))) == m * (m - 1) // 2 + m * (n - m)


def test_synthetic_deterministic():
    a = load_graph(SyntheticScaleFree(300, 2, 11))
    b = load_graph(SyntheticScaleFree(300, 2, 11))
    c = load_graph(SyntheticScaleFree(300, 2, 12))
    assert a.edges == b.edges
    assert a.edges != c.edges


def test_synthetic_precondition():
    with pytest.raises(ValueError):
        SyntheticScaleFree(3, 3, 0)
    with pytest.raises(ValueError):
        SyntheticScaleFree(5, 0, 0)


def test_edge_list_round_trip(tmp_path):
    g = load_graph(SyntheticScaleFree(200, 3, 5))
    p = tmp_path / "g.txt"
    write_edge_list(g, p, header="test")
    h = load_graph(EdgeListFile(str(p)))
    assert h.edges == g.edges
    fp = dataset_fingerprint(SyntheticScaleFree(200, 3, 5))
    assert len(fp) == 64 and fp == dataset_fingerprint(SyntheticScaleFree(200, 3, 5))


def test_pearson_identical_rows():
    # 0 and 1 share neighbours {2, 3}
    g = SocialGraph.from_edges(5, [(0, 2), (0, 3), (1, 2), (1, 3), (3, 4)])
    assert pearson_similarity(g, 0, 1) == 1.0


def test_pearson_anticorrelated():
    # row(0) = [0,0,1,1], row(2) = [1,1,0,0]
    g = SocialGraph.from_edges(4, [(0, 2), (0, 3), (1, 2)])
    assert pearson_similarity(g, 0, 2) == pytest.approx(-1.0, abs=1e-15)


def test_pearson_path_pinned(path5):
    assert pearson_similarity(path5, 0, 2) == pytest.approx(PATH5_PEARSON_0_2, abs=1e-12)


def test_pearson_triangle(triangle):
    assert pearson_similarity(triangle, 0, 1) == pytest.approx(-0.5, abs=1e-12)


def test_pearson_degenerate_rows_are_zero():
    g = SocialGraph.from_edges(4, [(0, 1), (0, 2), (1, 2)])
    assert pearson_similarity(g, 3, 1) == 0.0
    assert pearson_similarity(g, 3, 3) == 0.0


def test_pearson_hub_row_is_not_constant():
    # the zero diagonal keeps a hub's row [0,1,1,1] non-constant
    star = SocialGraph.from_edges(4, [(0, 1), (0, 2), (0, 3)])
    rows = adjacency_rows(4, star.edges)
    assert pearson_similarity(star, 0, 1) == pytest.approx(pearson_rows(rows[0], rows[1]))
    assert pearson_similarity(star, 0, 1) == pytest.approx(-1.0)


@st.composite
def graphs(draw, max_n=14):
    n = draw(st.integers(2, max_n))
    pairs = list(itertools.combinations(range(n), 2))
    edges = draw(st.lists(st.sampled_from(pairs), unique=True, max_size=len(pairs)))
    return SocialGraph.from_edges(n, edges)


@given(graphs(), st.data())
@settings(max_examples=200, deadline=None)
def test_pearson_properties(g, data):
    i = data.draw(st.integers(0, g.node_count - 1))
    j = data.draw(st.integers(0, g.node_count - 1))
    r = pearson_similarity(g, i, j)
    assert r == pearson_similarity(g, j, i)
    assert -1 - 1e-12 <= r <= 1 + 1e-12
    rows = adjacency_rows(g.node_count, g.edges)
    ref = pearson_rows(rows[i], rows[j])
    if ref is None:
        assert r == 0.0
    else:
        assert r == pytest.approx(ref, abs=1e-9)
        assert pearson_similarity(g, i, i) == 1.0


def test_hill_exponent_on_scale_free():
    g = load_graph(SyntheticScaleFree(5000, 3, 1))
    gamma = hill_exponent(g.degree(i) for i in range(g.node_count))
    assert 2.0 <= gamma <= 3.5


def test_hill_exponent_rejects_flat():
    rng = random.Random(0)
    with pytest.raises(ValueError):
        hill_exponent([4] * 100)
    assert hill_exponent(rng.paretovariate(2.0) * 10 for _ in range(20000)) == pytest.approx(3.0, abs=0.2)
