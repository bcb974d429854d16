"""Estimator-style wrappers around the functional solvers.

``fit`` takes a :class:`~netrecover.sampling.SampledSubgraph` and learns the
mean-field context (resilience, degree estimates, effective state);
``predict`` returns per-vertex steady states.  Hyperparameters follow the
scikit-learn conventions so ``get_params``/``set_params``/``clone`` work.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .dynamics import DynamicsModel, IntegratorOptions, get_model
from .estimators import estimate_beta, estimate_degrees
from .meanfield import iterate_mean_field, solve_augmented_subgraph, solve_naive, solve_x_eff
from .sampling import SampledSubgraph


def check_sample(sample) -> SampledSubgraph:
    """Reject anything that is not a non-empty sampled subgraph."""
    if not isinstance(sample, SampledSubgraph):
        raise TypeError(f"expected a SampledSubgraph, got {type(sample).__name__}")
    if sample.m == 0:
        raise ValueError("empty sample")
    return sample


def _resolve_model(model, params) -> DynamicsModel:
    if isinstance(model, DynamicsModel):
        return model.with_params(**params) if params else model
    return get_model(model, **(params or {}))


def _resolve_options(options) -> IntegratorOptions:
    if options is None:
        return IntegratorOptions()
    if isinstance(options, IntegratorOptions):
        return options
    return IntegratorOptions(**options)


class ResilienceEstimator(BaseEstimator):
    """Scheme-aware estimate of the full network's resilience and per-vertex degrees."""

    def __init__(self, known_mean_degree=None, use_visits=None):
        self.known_mean_degree = known_mean_degree
        self.use_visits = use_visits

    def fit(self, sample, y=None):
        sample = check_sample(sample)
        est = estimate_beta(sample, self.known_mean_degree, self.use_visits)
        self.beta_ = est.beta_hat
        self.beta_naive_ = est.beta_naive
        self.degrees_ = estimate_degrees(sample, est.beta_hat, self.known_mean_degree).degrees
        self.scheme_ = sample.scheme
        return self

    def transform(self, sample):
        """Estimated degrees for ``sample`` using the fitted resilience."""
        check_is_fitted(self, "beta_")
        sample = check_sample(sample)
        return estimate_degrees(sample, self.beta_, self.known_mean_degree).degrees


class MeanFieldRecovery(BaseEstimator):
    """Augmented-subgraph recovery of sampled vertices' steady states.

    ``beta`` fixes the resilience instead of estimating it.  ``solver`` is
    ``"coupled"`` (direct integration) or ``"iterate"`` (fixed-point rounds).
    """

    def __init__(self, model="epidemic", model_params=None, beta=None, known_mean_degree=None,
                 solver="coupled", select="max", options=None):
        self.model = model
        self.model_params = model_params
        self.beta = beta
        self.known_mean_degree = known_mean_degree
        self.solver = solver
        self.select = select
        self.options = options

    def fit(self, sample, y=None):
        sample = check_sample(sample)
        if self.solver not in ("coupled", "iterate"):
            raise ValueError(f"unknown solver {self.solver!r}")
        self.model_ = _resolve_model(self.model, self.model_params)
        self.options_ = _resolve_options(self.options)
        est = estimate_beta(sample, self.known_mean_degree)
        self.beta_ = float(self.beta) if self.beta is not None else est.beta_hat
        self.degrees_ = estimate_degrees(sample, est.beta_hat, self.known_mean_degree).degrees
        self.context_ = solve_x_eff(self.model_, self.beta_, self.options_, select=self.select)
        self.x_eff_ = self.context_.x_eff
        self.sample_ = sample
        return self

    def _solve(self, sample):
        degrees = self.degrees_ if sample is self.sample_ else estimate_degrees(
            sample, self.beta_, self.known_mean_degree).degrees
        if self.solver == "iterate":
            return iterate_mean_field(self.model_, sample, degrees, self.context_, self.options_)
        return solve_augmented_subgraph(self.model_, sample, degrees, self.context_, self.options_)

    def predict(self, sample=None):
        """Steady states of the sampled vertices (the fitted sample by default)."""
        check_is_fitted(self, "context_")
        sample = self.sample_ if sample is None else check_sample(sample)
        self.result_ = self._solve(sample)
        return self.result_.states

    def fit_predict(self, sample, y=None):
        return self.fit(sample).predict()


class NaiveRecovery(BaseEstimator):
    """Baseline: steady states of the observed subgraph alone."""

    def __init__(self, model="epidemic", model_params=None, options=None):
        self.model = model
        self.model_params = model_params
        self.options = options

    def fit(self, sample, y=None):
        self.sample_ = check_sample(sample)
        self.model_ = _resolve_model(self.model, self.model_params)
        self.options_ = _resolve_options(self.options)
        return self

    def predict(self, sample=None):
        check_is_fitted(self, "sample_")
        sample = self.sample_ if sample is None else check_sample(sample)
        self.result_ = solve_naive(self.model_, sample, self.options_)
        return np.asarray(self.result_.states)

    def fit_predict(self, sample, y=None):
        return self.fit(sample).predict()
