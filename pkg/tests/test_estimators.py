import warnings

import numpy as np
import pytest

from netrecover.errors import EstimatorClamped, InsufficientSample, MissingMeanDegree, MissingObservation
from netrecover.estimators import estimate_beta, estimate_degrees, subgraph_resilience
from netrecover.graph import Graph, generate, resilience
from netrecover.sampling import SCHEMES, SampledSubgraph, draw, from_indices, sample_vs


@pytest.fixture(scope="module")
def er500():
    return generate("er", 500, seed=11, p=0.02)


def test_rw_mean_of_observed():
    g = Graph.from_edges([(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (1, 4), (1, 5), (2, 3), (2, 4), (3, 4), (5, 6)])
    idx = [g.index[v] for v in (0, 1, 2, 3)]
    s = from_indices(g, idx, "RW")
    assert s.observed_true_degrees.tolist() == [3, 5, 4, 4]
    assert estimate_beta(s).beta_hat == 4.0


def test_indvs_degree_arithmetic():
    # path of 101 vertices, observed on 11 with a vertex of induced degree 2
    g = Graph.from_edges([(k, k + 1) for k in range(100)])
    s = from_indices(g, [0, 1, 2] + list(range(10, 90, 10)), "IndVS")
    d = estimate_degrees(s)
    assert s.induced_degrees[1] == 2
    assert d.degrees[1] == pytest.approx(100 / 10 * 2)


@pytest.mark.parametrize("scheme", SCHEMES)
def test_full_sample_exact(er500, scheme):
    s = from_indices(er500, np.arange(er500.n), scheme)
    beta = resilience(er500)
    mean = er500.in_strength.mean()
    est = estimate_beta(s, known_mean_degree=mean)
    deg = estimate_degrees(s, est.beta_hat, mean).degrees
    if scheme in ("VS", "IndVS"):
        assert est.beta_hat == pytest.approx(beta, rel=1e-12)
    else:
        # walk-type formulas at m = n return the plain mean degree
        assert est.beta_hat == pytest.approx(mean, rel=1e-12)
    if scheme != "IndRW":
        np.testing.assert_allclose(deg, er500.in_strength, rtol=1e-12)
    assert est.beta_naive == pytest.approx(beta)


def test_errors(er500):
    s = sample_vs(er500, 2, 0, with_true_degrees=False)
    with pytest.raises(InsufficientSample):
        estimate_beta(s)
    one = sample_vs(er500, 1, 0, with_true_degrees=False)
    with pytest.raises(InsufficientSample):
        estimate_degrees(one)
    rw = draw(er500, "IndRW", 10, 0)
    with pytest.raises(MissingMeanDegree):
        estimate_degrees(rw, 5.0)
    assert isinstance(MissingMeanDegree("x"), MissingObservation)
    bare = SampledSubgraph("IndVS", one.vertices, one.subgraph, one.n_total)
    with pytest.raises(MissingObservation):
        from netrecover.estimators import _observed
        _observed(bare, False)


def test_indvs_clamp_warns(er500):
    s = sample_vs(er500, 10, 1, with_true_degrees=False)
    with pytest.warns(EstimatorClamped):
        est = estimate_beta(s)
    assert est.clamped
    assert est.beta_hat >= estimate_degrees(s).degrees.mean()


def test_vs_unbiased_moments(er500):
    deg = er500.in_strength
    m1, m2 = [], []
    for seed in range(1000):
        d = sample_vs(er500, 50, seed).observed_true_degrees
        m1.append(d.mean())
        m2.append((d ** 2).mean())
    for vals, truth in ((m1, deg.mean()), (m2, (deg ** 2).mean())):
        assert abs(np.mean(vals) - truth) <= 3 * np.std(vals) / np.sqrt(len(vals))


def test_vs_beta_within_two_percent(er500):
    beta = resilience(er500)
    est = [estimate_beta(sample_vs(er500, 50, s)).beta_hat for s in range(1000)]
    assert abs(np.mean(est) - beta) / beta <= 0.02


def test_indvs_correction_removes_bias(er500):
    beta = resilience(er500)
    naive, corr = [], []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for s in range(600):
            smp = sample_vs(er500, 50, s, with_true_degrees=False)
            naive.append(subgraph_resilience(smp))
            corr.append(estimate_beta(smp).beta_hat)
    assert np.mean(naive) < beta
    assert abs(np.mean(corr) - beta) <= 0.2 * abs(np.mean(naive) - beta)


def test_indvs_naive_downward_bias_nonregular():
    g = generate("scale_free", 400, seed=12, m_attach=3)
    naive = [subgraph_resilience(sample_vs(g, 80, s, with_true_degrees=False)) for s in range(500)]
    assert np.mean(naive) < resilience(g)


def test_indvs_degree_estimates_unbiased(er500):
    n, m, reps = 500, 100, 500
    sums, counts = np.zeros(n), np.zeros(n)
    for s in range(reps):
        smp = sample_vs(er500, m, s, with_true_degrees=False)
        sums[smp.indices] += estimate_degrees(smp).degrees
        counts[smp.indices] += 1
    # hypergeometric: E[d^(s)] = d (m-1)/(n-1)
    sel = (er500.in_strength >= 5) & (counts > 0)
    ratio = sums[sel].sum() / counts[sel].sum() / (er500.in_strength[sel] @ counts[sel] / counts[sel].sum())
    assert abs(ratio - 1) <= 0.05


def test_indrw_formula(er500):
    s = draw(er500, "IndRW", 40, 3)
    mean = er500.in_strength.mean()
    est = estimate_beta(s, mean)
    assert est.beta_hat == pytest.approx(er500.n / s.m * s.induced_degrees.mean())
    d = estimate_degrees(s, est.beta_hat, mean).degrees
    np.testing.assert_allclose(d, er500.n * mean / (s.m * est.beta_hat) * s.induced_degrees)
    assert np.all(d >= 0)


def test_visit_multiset_option(er500):
    s = draw(er500, "RW", 30, 5)
    multi = estimate_beta(s, use_visits=True).beta_hat
    assert multi == pytest.approx(s.observed_true_degrees[s.visits].mean())
    assert estimate_beta(s).beta_hat == pytest.approx(s.observed_true_degrees.mean())
