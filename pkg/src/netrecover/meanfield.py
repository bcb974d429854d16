"""Steady-state recovery on a sampled subgraph.

The unobserved remainder of the network is replaced by one virtual vertex
held at the effective state ``x_eff``, the steady state of the scalar system
``x' = f(x) + beta g(x, x)``.  Each sampled vertex ``i`` is linked to it with
weight ``d_i - d_i^(s)``, its number of unobserved neighbours.  The naive,
uncoupled, boundary-clamped and full-network solvers live here as baselines
and oracles.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .dynamics import (
    DEFAULT_OPTIONS,
    DynamicsModel,
    IntegratorOptions,
    NetworkSystem,
    attractors_of,
    default_grid,
    elementwise_jacobian,
    integrate,
)
from .errors import (
    EmptyGraph,
    IterationDiverged,
    MissingBoundary,
    NegativeResidualDegree,
    NoSteadyState,
    NonFinite,
)
from .estimators import DegreeEstimate
from .graph import Graph
from .sampling import SampledSubgraph


@dataclass(frozen=True)
class FixedPoint:
    value: float
    stable: bool


@dataclass(frozen=True)
class MeanFieldContext:
    """Resilience in use and the effective states it induces.

    ``x_eff_candidates`` are the distinct end points of forward integration
    of the scalar system from the start grid; ``fixed_points`` lists every
    root found by a sign-change scan, stable or not.
    """

    beta: float
    x_eff: float
    x_eff_candidates: tuple[float, ...]
    fixed_points: tuple[FixedPoint, ...] = ()
    x_av_trajectory: tuple | None = None


@dataclass
class RecoveryResult:
    method: str
    vertex_ids: tuple
    states: np.ndarray
    attractors: list = field(default_factory=list)
    converged: bool = True
    residual: float = 0.0
    x_eff: float | None = None
    beta: float | None = None
    iterations: int | None = None
    clamped_residual_degrees: int = 0
    failed: tuple = ()

    @property
    def attractor_count(self) -> int:
        return len(self.attractors)

    def as_dict(self) -> dict:
        return {
            "method": self.method,
            "vertex_ids": list(self.vertex_ids),
            "states": self.states.tolist(),
            "attractors": [a.tolist() for a in self.attractors],
            "attractor_count": self.attractor_count,
            "converged": self.converged,
            "residual": self.residual,
            "x_eff": self.x_eff,
            "beta": self.beta,
            "iterations": self.iterations,
        }


# ---------------------------------------------------------------------------
# effective state


def averaging_operator(graph: Graph, values) -> float:
    """Out-strength weighted average ``(s_out . z) / sum(s_out)``."""
    s_out = graph.out_strength
    total = s_out.sum()
    if total <= 0:
        raise EmptyGraph("averaging operator needs positive total out-strength")
    z = np.asarray(values, dtype=float)
    if z.shape != (graph.n,):
        raise ValueError("values must align with the graph vertices")
    return float(np.dot(s_out, z) / total)


def scalar_fixed_points(model: DynamicsModel, beta: float, upper: float | None = None,
                        points: int = 4000) -> list[FixedPoint]:
    """Roots of ``f(x) + beta g(x, x)`` on the state domain, located by sign changes.

    Tangential (even multiplicity) roots are not detected.
    """
    lo, hi = model.state_domain
    if upper is None:
        upper = model.high_range[1]
    upper = min(upper, hi)
    xs = np.unique(np.concatenate([
        np.linspace(lo, upper, points),
        lo + np.geomspace(1e-9, max(upper - lo, 1e-9), points),
    ]))
    xs = xs[xs <= upper]

    def F(x):
        return model.scalar_rhs(x, beta)

    with np.errstate(all="ignore"):
        vals = F(xs)
    roots = list(xs[vals == 0.0])
    sign = np.sign(vals)
    for k in np.flatnonzero(sign[:-1] * sign[1:] < 0):
        roots.append(brentq(lambda x: float(F(np.array(x))), xs[k], xs[k + 1], xtol=1e-15, rtol=1e-15))
    roots.sort()
    out: list[FixedPoint] = []
    for r in roots:
        if out and abs(r - out[-1].value) <= 1e-12 * max(1.0, abs(r)):
            continue
        eps = 1e-7 * (1.0 + abs(r))
        a, b = max(r - eps, lo), min(r + eps, hi)
        slope = float((F(np.array(b)) - F(np.array(a))) / (b - a))
        out.append(FixedPoint(float(r), slope < 0))
    return out


def solve_x_eff(model: DynamicsModel, beta: float, opts: IntegratorOptions = DEFAULT_OPTIONS,
                grid=None, select: str = "max") -> MeanFieldContext:
    """Integrate the scalar reduced system from a grid of starts.

    The default grid is ``0`` plus :func:`default_grid`.  ``select`` picks the
    active effective state among the candidates (``"max"`` or ``"min"``).
    Candidates are refined onto nearby roots of the scalar right-hand side.
    """
    if not beta > 0:
        raise ValueError(f"resilience must be positive, got {beta}")
    if grid is None:
        grid = [model.state_domain[0]] + default_grid(model)
    x0 = np.asarray(grid, dtype=float)

    def fun(x):
        return model.scalar_rhs(x, beta)

    try:
        r = integrate(fun, x0, opts, model.state_domain, jac=elementwise_jacobian(fun, model.state_domain))
    except NonFinite as exc:
        raise NoSteadyState(f"scalar reduced system diverged: {exc}") from exc
    resid = np.abs(fun(r.state))
    ends = r.state[resid <= opts.steady_tol]
    if ends.size == 0:
        raise NoSteadyState(f"no start converged for beta={beta}")

    upper = max(model.high_range[1], 2.0 * float(ends.max()))
    roots = scalar_fixed_points(model, beta, upper)
    candidates: list[float] = []
    for c in sorted(ends.tolist()):
        near = [fp.value for fp in roots if abs(fp.value - c) <= opts.attractor_tol]
        if near:
            best = min(near, key=lambda v: abs(v - c))
            if abs(fun(np.array(best))) <= abs(fun(np.array(c))):
                c = best
        if not candidates or abs(c - candidates[-1]) > opts.attractor_tol:
            candidates.append(float(c))
    if select == "max":
        x_eff = candidates[-1]
    elif select == "min":
        x_eff = candidates[0]
    else:
        raise ValueError(f"unknown selection policy {select!r}")
    return MeanFieldContext(float(beta), x_eff, tuple(candidates), tuple(roots))


# ---------------------------------------------------------------------------
# sampled-subgraph solvers


def _sample_params(model: DynamicsModel, sample: SampledSubgraph) -> dict:
    if not model.has_vertex_params:
        return model.params
    if sample.indices is None:
        raise ValueError("per-vertex parameters need a sample carrying full-graph indices")
    return model.take(sample.indices)


def _concat_params(parts):
    """Concatenate sender-side parameter dicts for blocks of external couplings."""
    keys = parts[0][0].keys()
    if all(not np.ndim(p[k]) for p, _ in parts for k in keys) and all(
        p[k] == parts[0][0][k] for p, _ in parts for k in keys
    ):
        return parts[0][0]
    out = {}
    for k in keys:
        out[k] = np.concatenate([np.broadcast_to(np.asarray(p[k], float), (cnt,)) for p, cnt in parts])
    return out


def _degrees_array(degree_estimates, m) -> np.ndarray:
    d = degree_estimates.degrees if isinstance(degree_estimates, DegreeEstimate) else degree_estimates
    d = np.asarray(d, dtype=float)
    if d.shape != (m,):
        raise ValueError(f"degree estimates of shape {d.shape} do not align with {m} sampled vertices")
    if np.any(d < 0):
        raise ValueError("degree estimates must be nonnegative")
    return d


def residual_degrees(sample: SampledSubgraph, degree_estimates) -> tuple[np.ndarray, int]:
    """Weights ``max(d_hat - d^(s), 0)`` to the virtual vertex, and how many were clamped."""
    d = _degrees_array(degree_estimates, sample.m)
    r = d - sample.induced_degrees
    neg = r < 0
    # tolerate rounding noise from scaled estimates
    clamped = int(np.sum(r < -1e-9))
    if clamped:
        warnings.warn(
            f"{clamped} estimated degrees below the observed induced degree; residual clamped to 0",
            NegativeResidualDegree,
            stacklevel=3,
        )
    r[neg] = 0.0
    return r, clamped


def _primary(found, origin: int):
    for a in found:
        if origin in a.origins:
            return a
    return found[-1]


def _uniform_starts(levels, m):
    if len(levels) == 0:
        raise ValueError("init_grid must be nonempty")
    return [np.full(m, float(v)) for v in levels]


def _result(method, ids, found, origin, **extra) -> RecoveryResult:
    if not found:
        raise NoSteadyState(f"{method}: no start converged")
    main = _primary(found, origin)
    return RecoveryResult(
        method=method,
        vertex_ids=tuple(ids),
        states=main.state.copy(),
        attractors=[a.state.copy() for a in found],
        converged=True,
        residual=main.residual,
        **extra,
    )


def augmented_system(model: DynamicsModel, sample: SampledSubgraph, residual, x_eff: float) -> NetworkSystem:
    """Subgraph dynamics plus one frozen virtual vertex at ``x_eff``."""
    m = sample.m
    return NetworkSystem.from_graph(
        model, sample.subgraph, params=_sample_params(model, sample),
        ext_rows=np.arange(m), ext_vals=np.full(m, float(x_eff)), ext_w=residual,
        ext_params=model.mean_params(),
    )


def solve_augmented_subgraph(model: DynamicsModel, sample: SampledSubgraph, degree_estimates,
                             context: MeanFieldContext, opts: IntegratorOptions = DEFAULT_OPTIONS,
                             init_grid=None, x_eff: float | None = None) -> RecoveryResult:
    """Coupled steady states of the subgraph augmented with the virtual vertex.

    Starts are the uniform ``x_eff`` state followed by ``init_grid`` (default
    :func:`default_grid`); the reported ``states`` are the attractor reached
    from the ``x_eff`` start and ``attractors`` holds every distinct one.
    """
    if x_eff is None:
        x_eff = context.x_eff
    residual, clamped = residual_degrees(sample, degree_estimates)
    system = augmented_system(model, sample, residual, x_eff)
    levels = [x_eff] + list(default_grid(model) if init_grid is None else init_grid)
    found = attractors_of(system, _uniform_starts(levels, sample.m), opts, model.state_domain,
                          sample.vertices, jac=system.jacobian)
    return _result("mean_field", sample.vertices, found, 0, x_eff=float(x_eff), beta=context.beta,
                   clamped_residual_degrees=clamped)


def solve_branches(model, sample, degree_estimates, context: MeanFieldContext,
                   opts: IntegratorOptions = DEFAULT_OPTIONS, init_grid=None) -> dict[float, RecoveryResult]:
    """One augmented-subgraph solve per effective-state candidate, keyed by ``x_eff``."""
    return {
        c: solve_augmented_subgraph(model, sample, degree_estimates, context, opts, init_grid, x_eff=c)
        for c in context.x_eff_candidates
    }


def solve_uncoupled(model: DynamicsModel, x_eff: float, degrees, opts: IntegratorOptions = DEFAULT_OPTIONS,
                    vertex_ids=None, params: dict | None = None) -> RecoveryResult:
    """Independent steady states of ``x_i' = f(x_i) + d_i g(x_i, x_eff)``, started at ``x_eff``.

    A vertex whose integration fails is reported as NaN and listed in ``failed``.
    """
    d = np.asarray(degrees, dtype=float)
    m = d.size
    if np.any(d < 0):
        raise ValueError("degrees must be nonnegative")
    ids = tuple(range(m)) if vertex_ids is None else tuple(vertex_ids)
    p = model.params if params is None else params

    def build(sel):
        return NetworkSystem(model, len(sel), params=_take(p, sel), ext_rows=np.arange(len(sel)),
                             ext_vals=np.full(len(sel), float(x_eff)), ext_w=d[sel],
                             ext_params=model.mean_params())

    everyone = np.arange(m)
    system = build(everyone)
    try:
        r = integrate(system, np.full(m, float(x_eff)), opts, model.state_domain, jac=system.jacobian)
        return RecoveryResult("uncoupled", ids, r.state, [r.state], r.converged, r.residual, x_eff=float(x_eff))
    except NonFinite:
        pass
    states = np.full(m, np.nan)
    failed = []
    worst = 0.0
    ok = True
    for i in range(m):
        sys_i = build(np.array([i]))
        try:
            r = integrate(sys_i, np.array([float(x_eff)]), opts, model.state_domain, jac=sys_i.jacobian)
        except NonFinite:
            failed.append(ids[i])
            continue
        states[i] = r.state[0]
        worst = max(worst, r.residual)
        ok = ok and r.converged
    return RecoveryResult("uncoupled", ids, states, [states], ok and not failed, worst,
                          x_eff=float(x_eff), failed=tuple(failed))


def _take(params, idx):
    return {k: (v[idx] if np.ndim(v) else v) for k, v in params.items()}


def iterate_mean_field(model: DynamicsModel, sample: SampledSubgraph, degree_estimates,
                       context: MeanFieldContext, opts: IntegratorOptions = DEFAULT_OPTIONS,
                       max_iters: int = 100, iter_tol: float | None = None,
                       x_eff: float | None = None) -> RecoveryResult:
    """Fixed-point iteration: each round solves the sampled vertices independently.

    Round ``t+1`` freezes in-sample neighbours at their round-``t`` states and
    out-of-sample neighbours at ``x_eff``; round 0 sets every state to
    ``x_eff``.  Stops when successive rounds differ by at most ``iter_tol``
    (default ``100 * steady_tol``) in max norm.
    """
    if x_eff is None:
        x_eff = context.x_eff
    if iter_tol is None:
        iter_tol = 1e2 * opts.steady_tol
    m = sample.m
    params = _sample_params(model, sample)
    residual, clamped = residual_degrees(sample, degree_estimates)
    rows, cols, w = sample.subgraph.coo
    mean_p = model.mean_params()
    ext_params = _concat_params([(_take(params, cols), len(cols)), (mean_p, m)])
    ext_rows = np.concatenate([rows, np.arange(m)])
    ext_w = np.concatenate([w, residual])

    z = np.full(m, float(x_eff))
    history: list[float] = []
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        ext_vals = np.concatenate([z[cols], np.full(m, float(x_eff))])
        system = NetworkSystem(model, m, params=params, ext_rows=ext_rows, ext_vals=ext_vals,
                               ext_w=ext_w, ext_params=ext_params)
        r = integrate(system, z, opts, model.state_domain, jac=system.jacobian)
        if not r.converged:
            raise NoSteadyState(f"mean-field round {it} did not reach a steady state")
        delta = float(np.max(np.abs(r.state - z), initial=0.0))
        z = r.state
        history.append(delta)
        if delta <= iter_tol or rows.size == 0:
            converged = True
            break
        if len(history) >= 6 and history[-1] > 10 * history[-6]:
            raise IterationDiverged(f"successive change grew from {history[-6]:.3g} to {history[-1]:.3g}")
    coupled = augmented_system(model, sample, residual, x_eff)
    res = float(np.max(np.abs(coupled(z)), initial=0.0))
    return RecoveryResult("mean_field_iteration", sample.vertices, z.copy(), [z.copy()], converged, res,
                          x_eff=float(x_eff), beta=context.beta, iterations=it,
                          clamped_residual_degrees=clamped)


def solve_naive(model: DynamicsModel, sample: SampledSubgraph, opts: IntegratorOptions = DEFAULT_OPTIONS,
                init_grid=None) -> RecoveryResult:
    """Steady states of the observed subgraph alone; ``states`` come from the highest uniform start."""
    levels = list(default_grid(model) if init_grid is None else init_grid)
    system = NetworkSystem.from_graph(model, sample.subgraph, params=_sample_params(model, sample))
    found = attractors_of(system, _uniform_starts(levels, sample.m), opts, model.state_domain,
                          sample.vertices, jac=system.jacobian)
    return _result("naive", sample.vertices, found, int(np.argmax(levels)))


def boundary_from_full(graph: Graph, sample: SampledSubgraph, full_state) -> dict:
    """External neighbour map ``label -> [(weight, x*_j), ...]`` from a full-network state.

    ``full_state`` is an array aligned with ``graph`` or a mapping from label
    to state.
    """
    if sample.indices is None:
        raise ValueError("sample has no full-graph indices")
    inside = set(int(i) for i in sample.indices)
    if isinstance(full_state, dict):
        lookup = lambda j: full_state.get(graph.vertex_ids[j])  # noqa: E731
    else:
        arr = np.asarray(full_state, dtype=float)
        lookup = lambda j: arr[j]  # noqa: E731
    A = graph.adjacency
    out = {}
    for label, i in zip(sample.vertices, sample.indices):
        entries = []
        for k in range(A.indptr[i], A.indptr[i + 1]):
            j = int(A.indices[k])
            if j in inside:
                continue
            val = lookup(j)
            if val is None or not np.isfinite(val):
                raise MissingBoundary(f"no steady-state value for external neighbour {graph.vertex_ids[j]!r}")
            entries.append((float(A.data[k]), float(val)))
        out[label] = entries
    return out


def solve_boundary_clamped(model: DynamicsModel, sample: SampledSubgraph, external_neighbor_states: dict,
                           opts: IntegratorOptions = DEFAULT_OPTIONS, init_grid=None) -> RecoveryResult:
    """Subgraph dynamics with every external neighbour frozen at a supplied value.

    ``external_neighbor_states`` maps each sampled label to a list of
    ``(weight, value)`` pairs.  When the sample observes true degrees the
    supplied weights must account for every unobserved neighbour.
    """
    rows, vals, ws = [], [], []
    for i, label in enumerate(sample.vertices):
        if label not in external_neighbor_states:
            raise MissingBoundary(f"no boundary entry for sampled vertex {label!r}")
        entries = external_neighbor_states[label]
        if isinstance(entries, tuple) and len(entries) == 2 and np.isscalar(entries[0]):
            entries = [entries]
        for w, v in entries:
            rows.append(i)
            ws.append(float(w))
            vals.append(float(v))
    rows_a, ws_a = np.asarray(rows, dtype=np.int64), np.asarray(ws)
    if sample.observed_true_degrees is not None:
        supplied = np.bincount(rows_a, ws_a, minlength=sample.m)
        missing = sample.observed_true_degrees - sample.induced_degrees - supplied
        if np.any(missing > 1e-9 * np.maximum(1.0, sample.observed_true_degrees)):
            k = int(np.argmax(missing))
            raise MissingBoundary(f"external neighbours of {sample.vertices[k]!r} lack boundary values")
    levels = list(default_grid(model) if init_grid is None else init_grid)
    system = NetworkSystem.from_graph(
        model, sample.subgraph, params=_sample_params(model, sample),
        ext_rows=rows_a, ext_vals=np.asarray(vals), ext_w=ws_a, ext_params=model.mean_params(),
    )
    found = attractors_of(system, _uniform_starts(levels, sample.m), opts, model.state_domain,
                          sample.vertices, jac=system.jacobian)
    return _result("boundary_clamped", sample.vertices, found, int(np.argmax(levels)))


def solve_full(model: DynamicsModel, graph: Graph, opts: IntegratorOptions = DEFAULT_OPTIONS,
               init_grid=None) -> RecoveryResult:
    """Full-network oracle; ``states`` come from the highest uniform start."""
    levels = list(default_grid(model) if init_grid is None else init_grid)
    system = NetworkSystem.from_graph(model, graph)
    found = attractors_of(system, _uniform_starts(levels, graph.n), opts, model.state_domain,
                          graph.vertex_ids, jac=system.jacobian)
    return _result("full_oracle", graph.vertex_ids, found, int(np.argmax(levels)))
