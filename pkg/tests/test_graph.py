import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from netrecover.errors import EmptyGraph, InfeasibleParams, ParseError
from netrecover.graph import (
    Graph, degree_vector, generate, graph_from_json, graph_to_json, heterogeneity, load_edge_list,
    load_graph, resilience, rewire, save_edge_list, save_graph, topo_stats,
)


def path3():
    return Graph.from_edges([(0, 1), (1, 2)])


def star(n):
    return Graph.from_edges([(0, k) for k in range(1, n)])


def moments(deg):
    deg = np.asarray(deg, float)
    return (deg ** 2).sum() / deg.sum(), deg.mean()


def test_degree_vector_examples():
    assert generate("regular", 10, seed=1, k=4).in_strength.tolist() == [4.0] * 10
    assert degree_vector(path3()).tolist() == [1, 2, 1]
    assert degree_vector(star(5)).tolist() == [4, 1, 1, 1, 1]


def test_directed_degree_pair():
    g = Graph.from_edges([(0, 1, 2.0), (2, 1, 1.0)], directed=True)
    s_in, s_out = degree_vector(g)
    # A[i, j] is the influence of j on i: edge (u, v) stores A[u, v]
    assert s_in.sum() == s_out.sum() == 3.0
    assert resilience(g) == pytest.approx(np.dot(s_in, s_out) / s_out.sum())


def test_resilience_examples():
    assert resilience(generate("regular", 50, seed=0, k=6)) == 6.0
    assert resilience(star(4)) == pytest.approx(12 / 6)
    assert resilience(path3()) == pytest.approx(1.5)


def test_heterogeneity_examples():
    assert heterogeneity(generate("regular", 40, seed=2, k=4)) == pytest.approx(0.0, abs=1e-12)
    assert heterogeneity(path3()) == pytest.approx(1 / 6)
    er = generate("er", 1000, seed=3, p=10 / 999)
    sf = generate("scale_free", 1000, seed=3, m_attach=5)
    assert heterogeneity(er) < heterogeneity(sf)


def test_empty_graph_errors():
    g = Graph.from_edges([], vertex_ids=3)
    with pytest.raises(EmptyGraph):
        resilience(g)
    with pytest.raises(EmptyGraph):
        heterogeneity(g)


def test_topo_stats_consistent():
    g = generate("scale_free", 300, seed=4, m_attach=3)
    st_ = topo_stats(g)
    beta, mean = moments(g.in_strength)
    assert st_.beta == pytest.approx(beta)
    assert st_.mean_degree == pytest.approx(mean)
    assert st_.heterogeneity == pytest.approx(st_.beta - st_.mean_degree)
    assert st_.beta >= st_.mean_degree


def test_er_mean_degree_binomial():
    n, p = 1000, 0.01
    g = generate("er", n, seed=5, p=p)
    # mean degree = 2|E|/n with |E| ~ Binomial(n(n-1)/2, p)
    pairs = n * (n - 1) / 2
    sd = 2 * math.sqrt(pairs * p * (1 - p)) / n
    assert abs(g.in_strength.mean() - (n - 1) * p) <= 3 * sd


def test_regular_and_infeasible():
    g = generate("regular", 200, seed=6, k=6)
    assert np.all(g.in_strength == 6)
    assert g.number_of_edges == 600
    with pytest.raises(InfeasibleParams):
        generate("regular", 7, seed=0, k=3)
    with pytest.raises(InfeasibleParams):
        generate("scale_free", 5, seed=0, m_attach=5)


def test_generate_deterministic():
    a = generate("scale_free", 200, seed=9, m_attach=2)
    b = generate("scale_free", 200, seed=9, m_attach=2)
    assert a.same_as(b)


def test_rewire_preserves_degrees():
    g = generate("er", 300, seed=7, p=0.03)
    r = rewire(g, 10 * g.number_of_edges, seed=1)
    assert np.array_equal(degree_vector(g), degree_vector(r))
    assert not g.same_as(r)
    A = r.adjacency
    assert A.diagonal().sum() == 0
    assert A.max() == 1.0
    via_generate = generate("rewired", seed=1, source=g, swap_count=10 * g.number_of_edges)
    assert via_generate.same_as(r)


def test_edge_list_parse(tmp_path):
    p = tmp_path / "g.txt"
    p.write_text("# comment\n0 1\n1 2\n")
    g = load_edge_list(p)
    assert g.same_as(path3())
    p.write_text("0 1 2.5\n")
    g = load_edge_list(p)
    assert g.adjacency[0, 1] == g.adjacency[1, 0] == 2.5


def test_edge_list_duplicates_summed(tmp_path):
    p = tmp_path / "g.txt"
    p.write_text("0 1 1.5\n1 0 2\n")
    assert load_edge_list(p).adjacency[0, 1] == 3.5


@pytest.mark.parametrize("text,line", [("0 1\n0 x y z\n", 2), ("0 1\n1 2 abc\n", 2), ("\n\n1 1\n", 3), ("0 1 -2\n", 1)])
def test_edge_list_errors(tmp_path, text, line):
    p = tmp_path / "bad.txt"
    p.write_text(text)
    with pytest.raises(ParseError) as exc:
        load_edge_list(p)
    assert exc.value.line == line


def test_round_trip(tmp_path):
    g = generate("scale_free", 150, seed=8, m_attach=2)
    g = Graph.from_edges(list(g.edges()) + [], vertex_ids=list(g.vertex_ids) + [999])
    for name in ("g.edges", "g.json"):
        save_graph(g, tmp_path / name)
        assert load_graph(tmp_path / name).same_as(g)
    assert graph_from_json(graph_to_json(g)).same_as(g)
    w = Graph.from_edges([(0, 1, 0.1), (1, 2, 1 / 3)])
    save_edge_list(w, tmp_path / "w.edges")
    assert load_edge_list(tmp_path / "w.edges").same_as(w)


def test_graph_validation():
    import scipy.sparse as sp
    with pytest.raises(ValueError):
        Graph(sp.csr_matrix(np.array([[0, 1], [0, 0]], float)), (0, 1), False)
    with pytest.raises(ValueError):
        Graph.from_edges([(0, 0)])
    with pytest.raises(ValueError):
        Graph.from_edges([(0, 1, -1.0)])


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 15), st.integers(0, 15)), min_size=1, max_size=60))
def test_resilience_properties(pairs):
    edges = {(min(u, v), max(u, v)) for u, v in pairs if u != v}
    if not edges:
        return
    g = Graph.from_edges(sorted(edges), vertex_ids=16)
    beta, mean = moments(g.in_strength)
    assert resilience(g) == pytest.approx(beta)
    assert resilience(g) >= mean - 1e-12
    assert heterogeneity(g) >= -1e-12
    assert heterogeneity(g) == pytest.approx(resilience(g) - mean, abs=1e-12)
