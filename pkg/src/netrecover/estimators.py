"""Resilience and degree estimators for each sampling scheme.

===========  ==========================  ================================
scheme       degree estimate             resilience estimate
===========  ==========================  ================================
VS           observed d_i                <d^2>_s / <d>_s
IndVS        (n-1)/(m-1) d_i^(s)         (n-2)/(m-2) beta^(s) - (n-m)/(m-2)
RW, DB       observed d_i                <d>_s
IndRW        n<d>/(m beta_hat) d_i^(s)   (n/m) <d^(s)>_s
===========  ==========================  ================================

``beta^(s)`` is the resilience of the induced subgraph itself.  The IndVS
offset inverts ``E[beta^(s)] ~ 1 + (m-2)/(n-2) (beta - 1)``, which holds when
each pair of neighbours survives sampling with the hypergeometric
probability; ``consistent_offset=False`` subtracts ``(n-m)/(n-2)`` instead.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import EstimatorClamped, InsufficientSample, MissingMeanDegree, MissingObservation
from .sampling import SampledSubgraph


@dataclass(frozen=True)
class ResilienceEstimate:
    beta_hat: float
    beta_naive: float
    scheme: str
    inputs_used: dict = field(default_factory=dict)
    clamped: bool = False


@dataclass(frozen=True)
class DegreeEstimate:
    degrees: np.ndarray
    scheme: str

    def __len__(self):
        return len(self.degrees)


def subgraph_resilience(sample: SampledSubgraph) -> float:
    """beta^(s) of the induced subgraph; 0 when it has no edges."""
    d = sample.induced_degrees
    total = d.sum()
    return float(np.dot(d, d) / total) if total > 0 else 0.0


def _observed(sample: SampledSubgraph, use_visits: bool) -> np.ndarray:
    if sample.observed_true_degrees is None:
        raise MissingObservation(f"scheme {sample.scheme} does not observe true degrees")
    deg = sample.observed_true_degrees
    if use_visits and sample.visits is not None:
        return deg[sample.visits]
    return deg


def estimate_beta(sample: SampledSubgraph, known_mean_degree: float | None = None,
                  use_visits: bool | None = None, consistent_offset: bool = True) -> ResilienceEstimate:
    """Scheme-specific estimate of the full network's resilience.

    ``use_visits`` averages over the walk/draw multiset instead of the
    distinct vertices; it defaults to ``True`` for ``DB`` draws (which are
    i.i.d.) and ``False`` otherwise.  ``known_mean_degree`` is recorded but
    only needed by :func:`estimate_degrees` for ``IndRW``.
    """
    scheme, n, m = sample.scheme, sample.n_total, sample.m
    naive = subgraph_resilience(sample)
    if use_visits is None:
        use_visits = scheme == "DB"
    inputs = {"n": n, "m": m, "mean_degree": known_mean_degree}
    clamped = False

    if scheme == "VS":
        d = _observed(sample, False)
        if d.sum() <= 0:
            raise InsufficientSample("sampled vertices all have degree 0")
        beta = float(np.dot(d, d) / d.sum())
    elif scheme in ("RW", "DB"):
        beta = float(np.mean(_observed(sample, use_visits)))
    elif scheme == "IndVS":
        if m < 3:
            raise InsufficientSample("IndVS resilience correction needs m >= 3")
        offset = (n - m) / (m - 2) if consistent_offset else (n - m) / (n - 2)
        beta = (n - 2) / (m - 2) * naive - offset
        floor = float(np.mean((n - 1) / (m - 1) * sample.induced_degrees))
        if beta < floor:
            warnings.warn(
                f"IndVS resilience estimate {beta:.4g} below mean estimated degree; clamped to {floor:.4g}",
                EstimatorClamped,
                stacklevel=2,
            )
            beta, clamped = floor, True
    elif scheme == "IndRW":
        d = sample.induced_degrees
        if use_visits and sample.visits is not None:
            d = d[sample.visits]
        beta = float(n / m * np.mean(d))
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    return ResilienceEstimate(float(beta), naive, scheme, inputs, clamped)


def estimate_degrees(sample: SampledSubgraph, beta_hat: float | None = None,
                     known_mean_degree: float | None = None) -> DegreeEstimate:
    """Per-vertex estimate of the true degree, aligned with ``sample.vertices``."""
    scheme, n, m = sample.scheme, sample.n_total, sample.m
    if scheme in ("VS", "RW", "DB"):
        return DegreeEstimate(_observed(sample, False).copy(), scheme)
    d_s = sample.induced_degrees
    if scheme == "IndVS":
        if m < 2:
            raise InsufficientSample("IndVS degree correction needs m >= 2")
        return DegreeEstimate((n - 1) / (m - 1) * d_s, scheme)
    if scheme == "IndRW":
        if known_mean_degree is None:
            raise MissingMeanDegree("IndRW degree estimates need the network mean degree")
        if beta_hat is None:
            beta_hat = estimate_beta(sample).beta_hat
        if beta_hat <= 0:
            return DegreeEstimate(np.zeros(m), scheme)
        return DegreeEstimate(n * known_mean_degree / (m * beta_hat) * d_s, scheme)
    raise ValueError(f"unknown scheme {scheme!r}")
