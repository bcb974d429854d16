import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from netrecover.estimator_api import MeanFieldRecovery, NaiveRecovery, ResilienceEstimator, check_sample
from netrecover.estimators import estimate_beta
from netrecover.graph import generate, resilience
from netrecover.meanfield import solve_augmented_subgraph, solve_x_eff
from netrecover.dynamics import get_model
from netrecover.estimators import DegreeEstimate
from netrecover.sampling import sample_vs


@pytest.fixture(scope="module")
def sample():
    g = generate("er", 300, seed=1, p=0.03)
    return g, sample_vs(g, 20, 2)


def test_check_sample(sample):
    assert check_sample(sample[1]) is sample[1]
    with pytest.raises(TypeError):
        check_sample(np.zeros(3))


def test_resilience_estimator(sample):
    g, s = sample
    est = ResilienceEstimator().fit(s)
    assert est.beta_ == estimate_beta(s).beta_hat
    np.testing.assert_array_equal(est.transform(s), s.observed_true_degrees)
    with pytest.raises(NotFittedError):
        ResilienceEstimator().transform(s)


def test_mean_field_matches_functional(sample):
    g, s = sample
    model = get_model("gene")
    beta = resilience(g)
    est = MeanFieldRecovery(model="gene", beta=beta)
    z = est.fit_predict(s)
    ref = solve_augmented_subgraph(model, s, DegreeEstimate(s.observed_true_degrees, "VS"), solve_x_eff(model, beta))
    np.testing.assert_allclose(z, ref.states)
    z_it = MeanFieldRecovery(model="gene", beta=beta, solver="iterate").fit(s).predict()
    np.testing.assert_allclose(z_it, z, atol=1e-6)


def test_params_and_clone(sample):
    est = MeanFieldRecovery(model="epidemic", model_params={"R": 1.0}, options={"steady_tol": 1e-9})
    c = clone(est)
    assert c.get_params() == est.get_params()
    c.set_params(solver="iterate")
    assert c.solver == "iterate" and est.solver == "coupled"
    fitted = c.fit(sample[1])
    assert fitted.model_.params["R"] == 1.0 and fitted.options_.steady_tol == 1e-9
    with pytest.raises(NotFittedError):
        MeanFieldRecovery().predict(sample[1])
    with pytest.raises(ValueError):
        MeanFieldRecovery(solver="bad").fit(sample[1])


def test_naive(sample):
    z = NaiveRecovery(model="epidemic").fit_predict(sample[1])
    assert z.shape == (20,)
