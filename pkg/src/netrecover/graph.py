"""Graph container, topological statistics, synthetic generators and edge-list I/O.

The adjacency convention is ``A[i, j]`` = influence of vertex ``j`` on vertex
``i``, so row sums are in-strengths and column sums are out-strengths.  For
undirected graphs the matrix is symmetric and both coincide with the degree.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Hashable, Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import EmptyGraph, GenerationStalled, InfeasibleParams, ParseError


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable weighted graph on ``n`` labelled vertices."""

    adjacency: sp.csr_matrix
    vertex_ids: tuple
    directed: bool = False

    def __post_init__(self):
        A = sp.csr_matrix(self.adjacency, dtype=float)
        A.sum_duplicates()
        A.eliminate_zeros()
        A.sort_indices()
        object.__setattr__(self, "adjacency", A)
        object.__setattr__(self, "vertex_ids", tuple(self.vertex_ids))

        n = len(self.vertex_ids)
        if A.shape != (n, n):
            raise ValueError(f"adjacency shape {A.shape} does not match {n} vertex ids")
        if len(set(self.vertex_ids)) != n:
            raise ValueError("vertex ids must be unique")
        if A.nnz and (A.data < 0).any():
            raise ValueError("edge weights must be nonnegative")
        if A.nnz and not np.isfinite(A.data).all():
            raise ValueError("edge weights must be finite")
        if A.diagonal().any():
            raise ValueError("self-loops are not allowed")
        if not self.directed and (A != A.T).nnz:
            raise ValueError("undirected graph requires a symmetric adjacency")

    @classmethod
    def from_edges(
        cls,
        edges: Iterable[Sequence],
        vertex_ids: Sequence[Hashable] | int | None = None,
        directed: bool = False,
    ) -> "Graph":
        """Build a graph from ``(u, v)`` or ``(u, v, w)`` label tuples.

        Repeated edges have their weights summed.  ``vertex_ids`` fixes the
        vertex order (an int ``n`` means labels ``0..n-1``); otherwise labels
        are ordered by first appearance.
        """
        if isinstance(vertex_ids, (int, np.integer)):
            vertex_ids = range(int(vertex_ids))
        ids = list(vertex_ids) if vertex_ids is not None else []
        index = {v: i for i, v in enumerate(ids)}
        fixed = vertex_ids is not None
        rows, cols, vals = [], [], []
        for e in edges:
            u, v = e[0], e[1]
            w = float(e[2]) if len(e) > 2 else 1.0
            for x in (u, v):
                if x not in index:
                    if fixed:
                        raise ValueError(f"edge endpoint {x!r} is not a vertex")
                    index[x] = len(ids)
                    ids.append(x)
            if u == v:
                raise ValueError(f"self-loop on vertex {u!r}")
            rows.append(index[u])
            cols.append(index[v])
            vals.append(w)
        n = len(ids)
        rows_a = np.asarray(rows, dtype=np.int64)
        cols_a = np.asarray(cols, dtype=np.int64)
        vals_a = np.asarray(vals, dtype=float)
        if not directed:
            rows_a, cols_a = np.concatenate([rows_a, cols_a]), np.concatenate([cols_a, rows_a])
            vals_a = np.concatenate([vals_a, vals_a])
        A = sp.coo_matrix((vals_a, (rows_a, cols_a)), shape=(n, n)).tocsr()
        return cls(A, tuple(ids), directed)

    @property
    def n(self) -> int:
        return len(self.vertex_ids)

    @cached_property
    def index(self) -> dict:
        return {v: i for i, v in enumerate(self.vertex_ids)}

    @cached_property
    def coo(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(rows, cols, weights) arrays of every stored entry."""
        A = self.adjacency.tocoo()
        return A.row.astype(np.int64), A.col.astype(np.int64), A.data.copy()

    @cached_property
    def in_strength(self) -> np.ndarray:
        return np.asarray(self.adjacency.sum(axis=1)).ravel()

    @cached_property
    def out_strength(self) -> np.ndarray:
        return np.asarray(self.adjacency.sum(axis=0)).ravel()

    @property
    def number_of_edges(self) -> int:
        nnz = self.adjacency.nnz
        return nnz if self.directed else nnz // 2

    @property
    def is_weighted(self) -> bool:
        return bool(self.adjacency.nnz) and not np.all(self.adjacency.data == 1.0)

    def edges(self) -> list[tuple]:
        """Edge list as label triples; undirected edges appear once with u < v by index."""
        rows, cols, w = self.coo
        keep = slice(None) if self.directed else rows < cols
        ids = self.vertex_ids
        return [(ids[i], ids[j], float(x)) for i, j, x in zip(rows[keep], cols[keep], w[keep])]

    def subgraph(self, indices: Sequence[int]) -> "Graph":
        """Induced subgraph on the given internal indices, in that order."""
        idx = np.asarray(indices, dtype=np.int64)
        A = self.adjacency[idx][:, idx]
        return Graph(A, tuple(self.vertex_ids[i] for i in idx), self.directed)

    def neighbors(self, i: int) -> np.ndarray:
        A = self.adjacency
        return A.indices[A.indptr[i]:A.indptr[i + 1]]

    def same_as(self, other: "Graph") -> bool:
        """Exact equality of vertex labels, direction flag and weights."""
        return (
            self.vertex_ids == other.vertex_ids
            and self.directed == other.directed
            and self.adjacency.shape == other.adjacency.shape
            and (self.adjacency != other.adjacency).nnz == 0
        )

    def __repr__(self):
        kind = "directed" if self.directed else "undirected"
        return f"Graph(n={self.n}, edges={self.number_of_edges}, {kind})"


@dataclass(frozen=True)
class TopoStats:
    beta: float
    mean_degree: float
    mean_sq_degree: float
    heterogeneity: float


def degree_vector(graph: Graph):
    """Per-vertex degree, or ``(in_strength, out_strength)`` for directed graphs."""
    if graph.directed:
        return graph.in_strength.copy(), graph.out_strength.copy()
    return graph.in_strength.copy()


def _check_nonempty(graph: Graph):
    if graph.adjacency.nnz == 0 or graph.out_strength.sum() <= 0:
        raise EmptyGraph("graph has no edge weight")


def resilience(graph: Graph) -> float:
    """Mean-field coupling strength: sum(s_out * s_in) / sum(s_out)."""
    _check_nonempty(graph)
    s_in, s_out = graph.in_strength, graph.out_strength
    if not graph.directed:
        return float(np.dot(s_in, s_in) / s_in.sum())
    return float(np.dot(s_out, s_in) / s_out.sum())


def heterogeneity(graph: Graph) -> float:
    """Relative degree dispersion (<d^2> - <d>^2) / <d>.

    For directed graphs the in-strength plays the role of the degree and the
    value is ``resilience - mean in-strength``.
    """
    _check_nonempty(graph)
    d = graph.in_strength
    if graph.directed:
        return resilience(graph) - float(d.mean())
    mean = d.mean()
    return float((np.mean(d * d) - mean * mean) / mean)


def topo_stats(graph: Graph) -> TopoStats:
    d = graph.in_strength
    return TopoStats(
        beta=resilience(graph),
        mean_degree=float(d.mean()),
        mean_sq_degree=float(np.mean(d * d)),
        heterogeneity=heterogeneity(graph),
    )


# ---------------------------------------------------------------------------
# generators


def _pairs_to_graph(n, u, v) -> Graph:
    u = np.asarray(u, dtype=np.int64)
    v = np.asarray(v, dtype=np.int64)
    data = np.ones(2 * len(u))
    A = sp.coo_matrix((data, (np.concatenate([u, v]), np.concatenate([v, u]))), shape=(n, n)).tocsr()
    return Graph(A, tuple(range(n)), False)


def _er(n, p, rng) -> Graph:
    if not 0 <= p <= 1:
        raise InfeasibleParams(f"edge probability must lie in [0, 1], got {p}")
    total = n * (n - 1) // 2
    count = rng.binomial(total, p) if total else 0
    flat = rng.choice(total, size=count, replace=False) if count else np.zeros(0, dtype=np.int64)
    flat = np.sort(flat)
    # decode linear index over the strict upper triangle (row-major)
    i = (n - 2 - np.floor(np.sqrt(-8.0 * flat + 4.0 * n * (n - 1) - 7) / 2.0 - 0.5)).astype(np.int64)
    j = flat + i + 1 - n * (n - 1) // 2 + (n - i) * ((n - i) - 1) // 2
    return _pairs_to_graph(n, i, j)


def _attachment(n, m_attach, pref, rng) -> Graph:
    """Growth model: each arrival links to ``m_attach`` distinct earlier vertices.

    Each link target is drawn proportionally to degree with probability
    ``pref`` and uniformly otherwise; ``pref=1`` is Barabasi-Albert.
    """
    if not 1 <= m_attach < n:
        raise InfeasibleParams(f"need 1 <= m_attach < n, got m_attach={m_attach}, n={n}")
    if not 0 <= pref <= 1:
        raise InfeasibleParams(f"pref must lie in [0, 1], got {pref}")
    seed_size = m_attach + 1
    u, v = [], []
    ends = []
    for a in range(seed_size):
        for b in range(a + 1, seed_size):
            u.append(a)
            v.append(b)
            ends += [a, b]
    for new in range(seed_size, n):
        targets = set()
        while len(targets) < m_attach:
            if rng.random() < pref:
                t = ends[int(rng.integers(len(ends)))]
            else:
                t = int(rng.integers(new))
            targets.add(t)
        for t in sorted(targets):
            u.append(new)
            v.append(t)
            ends += [new, t]
    return _pairs_to_graph(n, u, v)


def _regular(n, k, rng, max_restarts=1000) -> Graph:
    """Uniform-ish random k-regular graph by sequential stub pairing with restarts."""
    if k < 0 or k >= n or (n * k) % 2:
        raise InfeasibleParams(f"no {k}-regular graph on {n} vertices")
    if k == 0:
        return _pairs_to_graph(n, [], [])
    for _ in range(max_restarts):
        stubs = list(np.repeat(np.arange(n), k))
        edges = set()
        ok = True
        while stubs:
            placed = False
            for _try in range(100):
                a, b = rng.choice(len(stubs), size=2, replace=False)
                x, y = stubs[a], stubs[b]
                if x != y and (min(x, y), max(x, y)) not in edges:
                    edges.add((min(x, y), max(x, y)))
                    for idx in sorted((a, b), reverse=True):
                        stubs[idx] = stubs[-1]
                        stubs.pop()
                    placed = True
                    break
            if not placed:
                ok = False
                break
        if ok:
            e = np.array(sorted(edges), dtype=np.int64)
            return _pairs_to_graph(n, e[:, 0], e[:, 1])
    raise GenerationStalled(f"k-regular generation failed after {max_restarts} restarts")


def _powerlaw(n, exponent, min_degree, rng) -> Graph:
    """Erased configuration model on a power-law degree sequence."""
    if exponent <= 1 or min_degree < 1:
        raise InfeasibleParams("need exponent > 1 and min_degree >= 1")
    # continuous Pareto draw rounded down, capped at n - 1
    deg = np.floor(min_degree * (1 - rng.random(n)) ** (-1.0 / (exponent - 1))).astype(np.int64)
    deg = np.minimum(deg, n - 1)
    if deg.sum() % 2:
        deg[int(rng.integers(n))] += 1
    stubs = rng.permutation(np.repeat(np.arange(n), deg))
    a, b = stubs[0::2], stubs[1::2]
    keep = a != b
    pairs = {(min(x, y), max(x, y)) for x, y in zip(a[keep].tolist(), b[keep].tolist())}
    e = np.array(sorted(pairs), dtype=np.int64).reshape(-1, 2)
    return _pairs_to_graph(n, e[:, 0], e[:, 1])


def rewire(graph: Graph, swap_count: int | None = None, seed=None, max_attempts: int | None = None) -> Graph:
    """Degree-preserving double-edge swaps; self-loops and multi-edges are rejected.

    ``swap_count`` counts successful swaps and defaults to ``10 * |E|``.
    """
    if graph.directed or graph.is_weighted:
        raise InfeasibleParams("rewiring requires an undirected unweighted graph")
    rng = np.random.default_rng(seed)
    rows, cols, _ = graph.coo
    keep = rows < cols
    edges = [(int(a), int(b)) for a, b in zip(rows[keep], cols[keep])]
    n_edges = len(edges)
    if swap_count is None:
        swap_count = 10 * n_edges
    if swap_count and n_edges < 2:
        raise InfeasibleParams("need at least two edges to rewire")
    if max_attempts is None:
        max_attempts = 100 * max(swap_count, 1)
    present = set(edges)
    done = attempts = 0
    picks = iter(())
    while done < swap_count:
        if attempts >= max_attempts:
            raise GenerationStalled(f"only {done} of {swap_count} swaps after {attempts} attempts")
        attempts += 1
        try:
            i1, i2, flip = next(picks)
        except StopIteration:
            block = 4096
            picks = zip(
                rng.integers(n_edges, size=block).tolist(),
                rng.integers(n_edges, size=block).tolist(),
                (rng.random(block) < 0.5).tolist(),
            )
            i1, i2, flip = next(picks)
        if i1 == i2:
            continue
        a, b = edges[i1]
        c, d = edges[i2]
        if flip:
            c, d = d, c
        # (a,b),(c,d) -> (a,d),(c,b)
        if a == d or c == b:
            continue
        e1 = (min(a, d), max(a, d))
        e2 = (min(c, b), max(c, b))
        if e1 in present or e2 in present or e1 == e2:
            continue
        present.discard(edges[i1])
        present.discard(edges[i2])
        present.add(e1)
        present.add(e2)
        edges[i1], edges[i2] = e1, e2
        done += 1
    e = np.array(edges, dtype=np.int64).reshape(-1, 2)
    A = sp.coo_matrix(
        (np.ones(2 * len(e)), (np.concatenate([e[:, 0], e[:, 1]]), np.concatenate([e[:, 1], e[:, 0]]))),
        shape=(graph.n, graph.n),
    ).tocsr()
    return Graph(A, graph.vertex_ids, False)


def generate(kind: str, n: int | None = None, seed=None, **params) -> Graph:
    """Synthetic graph factory.

    kinds: ``er`` (p), ``scale_free`` (m_attach, pref=1.0), ``regular`` (k),
    ``powerlaw`` (exponent, min_degree=2), ``rewired`` (source, swap_count).
    """
    rng = np.random.default_rng(seed)
    if kind == "rewired":
        source = params.pop("source")
        return rewire(source, params.pop("swap_count", None), seed=rng, **params)
    if n is None or n < 1:
        raise InfeasibleParams("n must be a positive vertex count")
    if kind == "er":
        return _er(n, float(params["p"]), rng)
    if kind == "scale_free":
        return _attachment(n, int(params["m_attach"]), float(params.get("pref", 1.0)), rng)
    if kind == "regular":
        return _regular(n, int(params["k"]), rng)
    if kind == "powerlaw":
        return _powerlaw(n, float(params["exponent"]), int(params.get("min_degree", 2)), rng)
    raise InfeasibleParams(f"unknown generator kind {kind!r}")


# ---------------------------------------------------------------------------
# I/O


def _parse_label(tok: str):
    try:
        return int(tok)
    except ValueError:
        return tok


def load_edge_list(path, directed: bool = False) -> Graph:
    """Read ``u v [weight]`` lines; ``#`` starts a comment line.

    A line with a single token declares a vertex (used for isolated vertices).
    Duplicate edges have their weights summed; for undirected graphs ``u v``
    and ``v u`` are the same edge.
    """
    ids: list = []
    index: dict = {}
    acc: dict = {}

    def vid(label):
        if label not in index:
            index[label] = len(ids)
            ids.append(label)
        return index[label]

    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            toks = line.split()
            if len(toks) == 1:
                vid(_parse_label(toks[0]))
                continue
            if len(toks) > 3:
                raise ParseError(f"expected 'u v [weight]', got {line!r}", lineno)
            u, v = _parse_label(toks[0]), _parse_label(toks[1])
            if u == v:
                raise ParseError(f"self-loop on vertex {u!r}", lineno)
            w = 1.0
            if len(toks) == 3:
                try:
                    w = float(toks[2])
                except ValueError:
                    raise ParseError(f"bad weight {toks[2]!r}", lineno) from None
                if not math.isfinite(w) or w < 0:
                    raise ParseError(f"weight must be finite and nonnegative, got {w}", lineno)
            i, j = vid(u), vid(v)
            key = (i, j) if directed else (min(i, j), max(i, j))
            acc[key] = acc.get(key, 0.0) + w
    return _from_index_edges(ids, acc, directed)


def _from_index_edges(ids, acc, directed) -> Graph:
    n = len(ids)
    if acc:
        keys = np.array(list(acc), dtype=np.int64)
        vals = np.array(list(acc.values()), dtype=float)
    else:
        keys = np.zeros((0, 2), dtype=np.int64)
        vals = np.zeros(0)
    r, c = keys[:, 0], keys[:, 1]
    if not directed:
        r, c, vals = np.concatenate([r, c]), np.concatenate([c, r]), np.concatenate([vals, vals])
    A = sp.coo_matrix((vals, (r, c)), shape=(n, n)).tocsr()
    return Graph(A, tuple(ids), directed)


def save_edge_list(graph: Graph, path) -> None:
    """Write every vertex as a declaration line, then one line per edge."""
    with open(path, "w") as fh:
        fh.write(f"# n={graph.n} directed={int(graph.directed)}\n")
        for v in graph.vertex_ids:
            fh.write(f"{v}\n")
        for u, v, w in graph.edges():
            fh.write(f"{u} {v} {w!r}\n")


def graph_to_json(graph: Graph) -> dict:
    return {
        "n": graph.n,
        "directed": graph.directed,
        "vertex_ids": list(graph.vertex_ids),
        "edges": [[u, v, w] for u, v, w in graph.edges()],
    }


def graph_from_json(doc: dict) -> Graph:
    ids = doc.get("vertex_ids")
    if ids is None:
        ids = list(range(int(doc["n"])))
    directed = bool(doc.get("directed", False))
    index = {v: i for i, v in enumerate(ids)}
    acc: dict = {}
    for e in doc["edges"]:
        i, j = index[e[0]], index[e[1]]
        w = float(e[2]) if len(e) > 2 else 1.0
        key = (i, j) if directed else (min(i, j), max(i, j))
        acc[key] = acc.get(key, 0.0) + w
    return _from_index_edges(list(ids), acc, directed)


def load_graph(path, directed: bool = False) -> Graph:
    """Load from ``.json`` documents or whitespace edge lists by extension."""
    path = Path(path)
    if path.suffix == ".json":
        return graph_from_json(json.loads(path.read_text()))
    return load_edge_list(path, directed=directed)


def save_graph(graph: Graph, path) -> None:
    path = Path(path)
    if path.suffix == ".json":
        path.write_text(json.dumps(graph_to_json(graph)))
    else:
        save_edge_list(graph, path)
