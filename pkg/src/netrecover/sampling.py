"""Incomplete observations of a network under vertex and random-walk sampling.

Each sampler returns a :class:`SampledSubgraph` carrying only what its scheme
can observe: the induced subgraph always, true degrees only for ``VS``,
``RW`` and degree-biased (``DB``) draws.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import BadSampleSize, DisconnectedGraphWarning, WalkStalled
from .graph import Graph

SCHEMES = ("VS", "IndVS", "RW", "IndRW", "DB")
OBSERVED_SCHEMES = ("VS", "RW", "DB")


@dataclass(frozen=True, eq=False)
class SampledSubgraph:
    """Observed part of a network.

    ``indices`` are internal indices into the full graph (``None`` when the
    sample was deserialised without it).  ``visits`` keeps the walk sequence
    for ``RW``/``IndRW`` and the draw multiset for ``DB``, as indices into
    ``vertices``.
    """

    scheme: str
    vertices: tuple
    subgraph: Graph
    n_total: int
    observed_true_degrees: np.ndarray | None = None
    indices: np.ndarray | None = None
    seed: int | None = None
    visits: np.ndarray | None = None

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if tuple(self.vertices) != self.subgraph.vertex_ids:
            raise ValueError("sample vertices must match the subgraph vertex order")
        if not 1 <= self.m <= self.n_total:
            raise BadSampleSize(f"sample size {self.m} outside [1, {self.n_total}]")
        has_deg = self.observed_true_degrees is not None
        if has_deg != (self.scheme in OBSERVED_SCHEMES):
            raise ValueError(f"scheme {self.scheme} {'forbids' if has_deg else 'requires'} true degrees")
        if has_deg:
            deg = np.asarray(self.observed_true_degrees, dtype=float)
            object.__setattr__(self, "observed_true_degrees", deg)
            if deg.shape != (self.m,):
                raise ValueError("true degrees must align with the sampled vertices")
            if np.any(deg < self.induced_degrees - 1e-9):
                raise ValueError("true degree below induced degree")

    @property
    def m(self) -> int:
        return len(self.vertices)

    @property
    def induced_degrees(self) -> np.ndarray:
        return self.subgraph.in_strength

    def to_json(self) -> dict:
        doc = {
            "scheme": self.scheme,
            "vertices": list(self.vertices),
            "edges": [[u, v, w] for u, v, w in self.subgraph.edges()],
            "n_total": self.n_total,
            "seed": self.seed,
            "directed": self.subgraph.directed,
        }
        if self.observed_true_degrees is not None:
            doc["true_degrees"] = self.observed_true_degrees.tolist()
        if self.indices is not None:
            doc["indices"] = np.asarray(self.indices).tolist()
        if self.visits is not None:
            doc["visits"] = np.asarray(self.visits).tolist()
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "SampledSubgraph":
        sub = Graph.from_edges(doc["edges"], vertex_ids=doc["vertices"], directed=doc.get("directed", False))
        deg = doc.get("true_degrees")
        return cls(
            scheme=doc["scheme"],
            vertices=tuple(doc["vertices"]),
            subgraph=sub,
            n_total=int(doc["n_total"]),
            observed_true_degrees=None if deg is None else np.asarray(deg, dtype=float),
            indices=None if doc.get("indices") is None else np.asarray(doc["indices"], dtype=np.int64),
            seed=doc.get("seed"),
            visits=None if doc.get("visits") is None else np.asarray(doc["visits"], dtype=np.int64),
        )


def _seed_value(seed):
    return int(seed) if isinstance(seed, (int, np.integer)) else None


def from_indices(graph: Graph, indices: Sequence[int], scheme: str, seed=None, visits=None) -> SampledSubgraph:
    """Package the induced observation of ``graph`` on ``indices`` for ``scheme``."""
    idx = np.asarray(indices, dtype=np.int64)
    sub = graph.subgraph(idx)
    true_deg = graph.in_strength[idx].copy() if scheme in OBSERVED_SCHEMES else None
    return SampledSubgraph(
        scheme=scheme,
        vertices=sub.vertex_ids,
        subgraph=sub,
        n_total=graph.n,
        observed_true_degrees=true_deg,
        indices=idx,
        seed=_seed_value(seed),
        visits=visits,
    )


def _check_m(graph, m):
    if not 1 <= m <= graph.n:
        raise BadSampleSize(f"sample size {m} outside [1, {graph.n}]")


def sample_vs(graph: Graph, m: int, seed=None, with_true_degrees: bool = True) -> SampledSubgraph:
    """Uniform vertex sample without replacement; scheme ``VS`` or ``IndVS``."""
    _check_m(graph, m)
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(graph.n, size=m, replace=False))
    return from_indices(graph, idx, "VS" if with_true_degrees else "IndVS", seed)


def _walk_component(graph: Graph, rng):
    ncomp, labels = connected_components(graph.adjacency, directed=graph.directed, connection="weak")
    sizes = np.bincount(labels)
    giant = int(np.argmax(sizes))
    if ncomp > 1:
        warnings.warn(
            f"graph has {ncomp} components; walking on the largest ({sizes[giant]} vertices)",
            DisconnectedGraphWarning,
            stacklevel=3,
        )
    members = np.flatnonzero(labels == giant)
    return members, int(rng.choice(members))


def random_walk(graph: Graph, steps: int, seed=None, start: int | None = None) -> np.ndarray:
    """Simple random walk of ``steps`` moves; returns the ``steps + 1`` visited indices.

    Neighbours are chosen with probability proportional to edge weight.
    """
    rng = np.random.default_rng(seed)
    if start is None:
        _, start = _walk_component(graph, rng)
    A = graph.adjacency
    indptr, indices = A.indptr, A.indices
    cum = _cumulative_weights(graph)
    path = np.empty(steps + 1, dtype=np.int64)
    v = int(start)
    path[0] = v
    u = rng.random(steps)
    for t in range(steps):
        v = _step(v, u[t], indptr, indices, cum)
        path[t + 1] = v
    return path


def _cumulative_weights(graph: Graph):
    A = graph.adjacency
    if not graph.is_weighted:
        return None
    cum = np.empty_like(A.data)
    for i in range(graph.n):
        a, b = A.indptr[i], A.indptr[i + 1]
        if b > a:
            cum[a:b] = np.cumsum(A.data[a:b]) / A.data[a:b].sum()
    return cum


def _step(v, u, indptr, indices, cum):
    a, b = indptr[v], indptr[v + 1]
    if b == a:
        raise WalkStalled(f"walk reached vertex {v} with no out-edges")
    if cum is None:
        return int(indices[a + int(u * (b - a))])
    k = int(np.searchsorted(cum[a:b], u, side="right"))
    return int(indices[a + min(k, b - a - 1)])


def sample_rw(graph: Graph, m: int, seed=None, with_true_degrees: bool = True,
              max_steps: int | None = None) -> SampledSubgraph:
    """Random walk from a uniform vertex of the largest component until ``m`` distinct vertices are seen.

    The sample is the distinct visited set in order of first visit; the full
    visit sequence is kept in ``visits``.
    """
    _check_m(graph, m)
    rng = np.random.default_rng(seed)
    members, v = _walk_component(graph, rng)
    if m > len(members):
        raise WalkStalled(f"component of size {len(members)} cannot supply {m} distinct vertices")
    if max_steps is None:
        max_steps = 10**6 * m
    A = graph.adjacency
    indptr, indices = A.indptr, A.indices
    cum = _cumulative_weights(graph)
    order = [v]
    position = {v: 0}
    seq = [0]
    steps = 0
    while len(order) < m:
        chunk = rng.random(4096)
        for u in chunk:
            if steps >= max_steps:
                raise WalkStalled(f"found {len(order)} of {m} distinct vertices in {max_steps} steps")
            steps += 1
            v = _step(v, u, indptr, indices, cum)
            if v not in position:
                position[v] = len(order)
                order.append(v)
            seq.append(position[v])
            if len(order) == m:
                break
    return from_indices(
        graph, order, "RW" if with_true_degrees else "IndRW", seed,
        visits=np.asarray(seq, dtype=np.int64),
    )


def sample_degree_biased(graph: Graph, m: int, seed=None) -> SampledSubgraph:
    """``m`` i.i.d. draws with probability proportional to degree (scheme ``DB``).

    Repeated draws are collapsed for the subgraph; the multiset is kept in
    ``visits``.
    """
    if m < 1:
        raise BadSampleSize(f"sample size {m} must be positive")
    rng = np.random.default_rng(seed)
    w = graph.in_strength
    total = w.sum()
    if total <= 0:
        raise BadSampleSize("degree-biased sampling needs at least one edge")
    draws = rng.choice(graph.n, size=m, p=w / total)
    distinct, inverse = np.unique(draws, return_inverse=True)
    return from_indices(graph, distinct, "DB", seed, visits=inverse.astype(np.int64))


def draw(graph: Graph, scheme: str, m: int, seed=None) -> SampledSubgraph:
    """Dispatch on scheme name."""
    if scheme == "VS":
        return sample_vs(graph, m, seed, True)
    if scheme == "IndVS":
        return sample_vs(graph, m, seed, False)
    if scheme == "RW":
        return sample_rw(graph, m, seed, True)
    if scheme == "IndRW":
        return sample_rw(graph, m, seed, False)
    if scheme == "DB":
        return sample_degree_biased(graph, m, seed)
    raise ValueError(f"unknown scheme {scheme!r}")
