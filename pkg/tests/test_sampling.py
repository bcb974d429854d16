import warnings

import numpy as np
import pytest
from scipy import stats

from netrecover.errors import BadSampleSize, DisconnectedGraphWarning, WalkStalled
from netrecover.graph import Graph, generate
from netrecover.sampling import (
    SampledSubgraph, draw, from_indices, random_walk, sample_degree_biased, sample_rw, sample_vs,
)


def star(n):
    return Graph.from_edges([(0, k) for k in range(1, n)])


@pytest.fixture(scope="module")
def er():
    return generate("er", 200, seed=1, p=0.04)


def brute_force_induced(graph, labels):
    inside = set(labels)
    return {frozenset((u, v)) for u, v, _ in graph.edges() if u in inside and v in inside}


@pytest.mark.parametrize("scheme", ["VS", "IndVS", "RW", "IndRW", "DB"])
def test_induced_edges_exact(er, scheme):
    for seed in range(5):
        s = draw(er, scheme, 25, seed)
        got = {frozenset((u, v)) for u, v, _ in s.subgraph.edges()}
        assert got == brute_force_induced(er, s.vertices)
        if s.observed_true_degrees is not None:
            assert np.all(s.observed_true_degrees >= s.induced_degrees)
            np.testing.assert_array_equal(s.observed_true_degrees, er.in_strength[s.indices])
        else:
            assert scheme in ("IndVS", "IndRW")


def test_vs_full_and_single(er):
    s = sample_vs(er, er.n, 0)
    assert s.subgraph.same_as(er)
    np.testing.assert_array_equal(s.induced_degrees, er.in_strength)
    one = sample_vs(er, 1, 0)
    assert one.m == 1 and one.subgraph.number_of_edges == 0
    with pytest.raises(BadSampleSize):
        sample_vs(er, 0, 0)
    with pytest.raises(BadSampleSize):
        sample_vs(er, er.n + 1, 0)


def test_vs_inclusion_frequency():
    g = generate("er", 1000, seed=2, p=0.01)
    n, m, reps = 1000, 100, 500
    counts = np.zeros(n)
    for s in range(reps):
        counts[sample_vs(g, m, s).indices] += 1
    p = m / n
    sd = np.sqrt(reps * p * (1 - p))
    assert abs(counts.mean() - reps * p) < 1e-9
    # per-vertex counts are Binomial(reps, m/n); allow the usual extremes of 1000 draws
    assert np.mean(np.abs(counts - reps * p) <= 3 * sd) > 0.99


def test_independent_seeds_indicator_correlation():
    g = generate("er", 300, seed=3, p=0.02)
    a = np.zeros((400, g.n))
    for s in range(400):
        a[s, sample_vs(g, 30, s).indices] = 1
    # two different seeds overlap on m^2/n vertices on average
    overlap = (a[:-1] * a[1:]).sum(axis=1)
    assert abs(overlap.mean() - 30 * 30 / 300) < 4 * overlap.std() / np.sqrt(len(overlap))


def test_determinism(er):
    for scheme in ("VS", "RW", "DB"):
        a, b = draw(er, scheme, 20, 7), draw(er, scheme, 20, 7)
        assert a.vertices == b.vertices
        assert a.subgraph.same_as(b.subgraph)


def test_rw_full_and_star(er):
    s = sample_rw(er, er.n, 0)
    assert sorted(s.vertices) == sorted(er.vertex_ids)
    for seed in range(30):
        assert 0 in sample_rw(star(6), 2, seed).vertices


def test_rw_visits_are_consistent(er):
    s = sample_rw(er, 30, 4)
    assert s.visits[0] == 0 and s.visits.max() == s.m - 1
    # consecutive visits follow edges
    path = s.indices[s.visits]
    A = er.adjacency
    assert all(A[path[t], path[t + 1]] > 0 for t in range(len(path) - 1))


def test_random_walk_stationary():
    g = generate("er", 200, seed=5, p=0.05)
    steps = 200_000
    path = random_walk(g, steps, seed=1)
    freq = np.bincount(path[1:], minlength=g.n) / steps
    pi = g.in_strength / g.in_strength.sum()
    assert 0.5 * np.abs(freq - pi).sum() < 0.05


def test_weighted_walk_uses_weights():
    g = Graph.from_edges([(0, 1, 9.0), (0, 2, 1.0)])
    path = random_walk(g, 20000, seed=0, start=0)
    nxt = path[1:][path[:-1] == 0]
    assert np.mean(nxt == 1) == pytest.approx(0.9, abs=0.02)


def test_rw_disconnected_and_stall():
    g = Graph.from_edges([(0, 1), (1, 2), (3, 4)])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        with pytest.raises(DisconnectedGraphWarning):
            sample_rw(g, 2, 0)
    with pytest.warns(DisconnectedGraphWarning):
        with pytest.raises(WalkStalled):
            sample_rw(g, 4, 0)
    with pytest.warns(DisconnectedGraphWarning):
        s = sample_rw(g, 3, 0)
    assert set(s.vertices) == {0, 1, 2}


def test_degree_biased_star():
    g = star(4)
    hits = sum(int(0 in sample_degree_biased(g, 1, s).vertices) for s in range(4000))
    # center has probability 3/6
    assert abs(hits / 4000 - 0.5) < 3 * np.sqrt(0.25 / 4000)


def test_degree_biased_regular_is_uniform():
    g = generate("regular", 50, seed=6, k=4)
    draws = np.concatenate([sample_degree_biased(g, 10, s).indices[sample_degree_biased(g, 10, s).visits]
                            for s in range(500)])
    counts = np.bincount(draws, minlength=g.n)
    assert stats.chisquare(counts).pvalue > 1e-3


def test_degree_biased_expected_degree():
    g = generate("scale_free", 500, seed=7, m_attach=3)
    beta = (g.in_strength ** 2).sum() / g.in_strength.sum()
    means = []
    for s in range(600):
        d = sample_degree_biased(g, 20, s)
        means.append(d.observed_true_degrees[d.visits].mean())
    assert abs(np.mean(means) - beta) < 3 * np.std(means) / np.sqrt(len(means))


def test_sample_json_round_trip(er):
    for scheme in ("VS", "IndRW", "DB"):
        s = draw(er, scheme, 15, 3)
        t = SampledSubgraph.from_json(s.to_json())
        assert t.vertices == s.vertices and t.scheme == s.scheme and t.subgraph.same_as(s.subgraph)
        if s.observed_true_degrees is not None:
            np.testing.assert_array_equal(t.observed_true_degrees, s.observed_true_degrees)
        if s.visits is not None:
            np.testing.assert_array_equal(t.visits, s.visits)


def test_sample_invariants(er):
    s = sample_vs(er, 10, 0)
    with pytest.raises(ValueError):
        SampledSubgraph("IndVS", s.vertices, s.subgraph, er.n, s.observed_true_degrees)
    with pytest.raises(ValueError):
        SampledSubgraph("VS", s.vertices, s.subgraph, er.n, None)
    with pytest.raises(ValueError):
        SampledSubgraph("VS", s.vertices, s.subgraph, er.n, np.zeros(10) - 1)
    with pytest.raises(ValueError):
        from_indices(er, [0, 1], "XX")
