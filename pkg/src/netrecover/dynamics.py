"""Coupled network dynamics ``dx_i/dt = f(x_i) + sum_j A_ij g(x_i, x_j)``.

Models are pairs of vectorised callables ``f(x, p)`` and ``g(xi, xj, pi, pj)``
where ``p``/``pi``/``pj`` are parameter dicts already gathered at the
receiving (``i``) and sending (``j``) vertices.  A parameter may be a scalar
or an array aligned with the vertices of the graph being solved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DomainViolation, NonFinite
from .graph import Graph


# ---------------------------------------------------------------------------
# models


def _eco_f(x, p):
    return p["B"] + x * (1.0 - x / p["K"]) * (x / p["C"] - 1.0)


def _eco_g(xi, xj, pi, pj):
    return xi * xj / (pi["D"] + pi["E"] * xi + pj["H"] * xj)


def _gene_f(x, p):
    return -p["B"] * x ** p["f"]


def _gene_g(xi, xj, pi, pj):
    xh = xj ** pj["h"]
    return pi["R"] * xh / (xh + 1.0)


def _epi_f(x, p):
    return -p["B"] * x


def _epi_g(xi, xj, pi, pj):
    return pi["R"] * (1.0 - xi) * xj


@dataclass(frozen=True, eq=False)
class DynamicsModel:
    """A named ``(f, g)`` pair with its parameter table.

    ``high_range`` bounds the log-spaced uniform starts used when searching
    for high-state attractors.
    """

    name: str
    f: Callable
    g: Callable
    params: Mapping = field(default_factory=dict)
    state_domain: tuple[float, float] = (0.0, math.inf)
    high_range: tuple[float, float] = (1.0, 30.0)

    def with_params(self, **overrides) -> "DynamicsModel":
        unknown = set(overrides) - set(self.params)
        if unknown:
            raise KeyError(f"unknown parameters for {self.name}: {sorted(unknown)}")
        params = dict(self.params)
        for k, v in overrides.items():
            params[k] = np.asarray(v, dtype=float) if np.ndim(v) else float(v)
        return replace(self, params=params)

    @property
    def has_vertex_params(self) -> bool:
        return any(np.ndim(v) for v in self.params.values())

    def take(self, idx) -> dict:
        """Parameters gathered at vertex indices ``idx``; scalars pass through."""
        return {k: (v[idx] if np.ndim(v) else v) for k, v in self.params.items()}

    def mean_params(self) -> dict:
        return {k: (float(np.mean(v)) if np.ndim(v) else v) for k, v in self.params.items()}

    def scalar_rhs(self, x, beta: float):
        """Right-hand side of the one-dimensional reduced system ``f(x) + beta g(x, x)``."""
        p = self.mean_params()
        return self.f(x, p) + beta * self.g(x, x, p, p)


ECOLOGICAL = DynamicsModel(
    "ecological", _eco_f, _eco_g,
    {"B": 0.1, "C": 1.0, "K": 5.0, "D": 5.0, "E": 0.9, "H": 0.1},
    (0.0, math.inf), (1.0, 30.0),
)
GENE = DynamicsModel(
    "gene", _gene_f, _gene_g,
    {"B": 1.0, "f": 1.0, "h": 2.0, "R": 1.0},
    (0.0, math.inf), (1.0, 30.0),
)
EPIDEMIC = DynamicsModel(
    "epidemic", _epi_f, _epi_g,
    {"B": 1.0, "R": 0.5},
    (0.0, 1.0), (0.05, 1.0),
)

_REGISTRY: dict[str, DynamicsModel] = {m.name: m for m in (ECOLOGICAL, GENE, EPIDEMIC)}


def register_model(model: DynamicsModel) -> None:
    _REGISTRY[model.name] = model


def get_model(name: str, **overrides) -> DynamicsModel:
    try:
        model = _REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown dynamics model {name!r}; known: {sorted(_REGISTRY)}") from None
    return model.with_params(**overrides) if overrides else model


def available_models() -> list[str]:
    return sorted(_REGISTRY)


# ---------------------------------------------------------------------------
# systems


class NetworkSystem:
    """Vectorised right-hand side of a coupled system.

    Internal couplings act between state components.  External couplings
    connect component ``ext_rows[k]`` to a frozen value ``ext_vals[k]`` with
    weight ``ext_w[k]``; ``ext_params`` holds the sender-side parameters of
    those frozen vertices.
    """

    def __init__(self, model: DynamicsModel, n: int, rows=None, cols=None, weights=None,
                 params: dict | None = None, ext_rows=None, ext_vals=None, ext_w=None,
                 ext_params: dict | None = None):
        self.model = model
        self.n = n
        self.params = model.params if params is None else params
        self.rows = np.zeros(0, np.int64) if rows is None else np.asarray(rows, np.int64)
        self.cols = np.zeros(0, np.int64) if cols is None else np.asarray(cols, np.int64)
        self.w = np.zeros(0) if weights is None else np.asarray(weights, float)
        self.p_rows = _gather(self.params, self.rows)
        self.p_cols = _gather(self.params, self.cols)
        self.ext_rows = np.zeros(0, np.int64) if ext_rows is None else np.asarray(ext_rows, np.int64)
        self.ext_vals = np.zeros(0) if ext_vals is None else np.asarray(ext_vals, float)
        self.ext_w = np.zeros(0) if ext_w is None else np.asarray(ext_w, float)
        self.pe_rows = _gather(self.params, self.ext_rows)
        self.pe_src = model.mean_params() if ext_params is None else ext_params
        # per-component external terms need no scatter when each row appears once
        self._ext_direct = (
            len(self.ext_rows) == n and np.array_equal(self.ext_rows, np.arange(n))
        )

    @classmethod
    def from_graph(cls, model: DynamicsModel, graph: Graph, params=None, **ext):
        rows, cols, w = graph.coo
        return cls(model, graph.n, rows, cols, w, params=params, **ext)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        g = self.model.g
        out = self.model.f(x, self.params)
        if self.rows.size:
            inter = self.w * g(x[self.rows], x[self.cols], self.p_rows, self.p_cols)
            out = out + np.bincount(self.rows, inter, minlength=self.n)
        if self.ext_rows.size:
            ext = self.ext_w * g(x[self.ext_rows], self.ext_vals, self.pe_rows, self.pe_src)
            out = out + (ext if self._ext_direct else np.bincount(self.ext_rows, ext, minlength=self.n))
        return out

    def jacobian(self, x: np.ndarray) -> sp.csr_matrix:
        """Sparse Jacobian by elementwise central differences of ``f`` and ``g``."""
        lo, hi = self.model.state_domain
        f, g = self.model.f, self.model.g
        eps = 1e-7 * (1.0 + np.abs(x))
        xp, xm = np.minimum(x + eps, hi), np.maximum(x - eps, lo)
        diag = (f(xp, self.params) - f(xm, self.params)) / (xp - xm)
        off = None
        if self.rows.size:
            r, c = self.rows, self.cols
            xi, xj = x[r], x[c]
            dgi = (g(xp[r], xj, self.p_rows, self.p_cols) - g(xm[r], xj, self.p_rows, self.p_cols)) / (xp[r] - xm[r])
            dgj = (g(xi, xp[c], self.p_rows, self.p_cols) - g(xi, xm[c], self.p_rows, self.p_cols)) / (xp[c] - xm[c])
            diag = diag + np.bincount(r, self.w * dgi, minlength=self.n)
            off = sp.csr_matrix((self.w * dgj, (r, c)), shape=(self.n, self.n))
        if self.ext_rows.size:
            e = self.ext_rows
            v = self.ext_vals
            dge = (g(xp[e], v, self.pe_rows, self.pe_src) - g(xm[e], v, self.pe_rows, self.pe_src)) / (xp[e] - xm[e])
            diag = diag + np.bincount(e, self.ext_w * dge, minlength=self.n)
        J = sp.diags(diag, format="csr")
        return J if off is None else J + off


def elementwise_jacobian(fun, domain):
    """Diagonal Jacobian for right-hand sides whose components are independent."""
    lo, hi = domain

    def jac(x):
        eps = 1e-7 * (1.0 + np.abs(x))
        xp, xm = np.minimum(x + eps, hi), np.maximum(x - eps, lo)
        return sp.diags((fun(xp) - fun(xm)) / (xp - xm), format="csr")

    return jac


def _gather(params, idx):
    return {k: (v[idx] if np.ndim(v) else v) for k, v in params.items()}


def _check_domain(model: DynamicsModel, x: np.ndarray, what="state"):
    lo, hi = model.state_domain
    bad = np.flatnonzero(~((x >= lo) & (x <= hi)))
    if bad.size:
        i = int(bad[0])
        raise DomainViolation(
            f"{what} component {i} = {x[i]!r} outside {model.name} domain [{lo}, {hi}]"
        )


def eval_rhs(model: DynamicsModel, graph: Graph, state) -> np.ndarray:
    """Derivative ``f(x_i) + sum_j A_ij g(x_i, x_j)`` for every vertex."""
    x = np.asarray(state, dtype=float)
    if x.shape != (graph.n,):
        raise ValueError(f"state of shape {x.shape} is not aligned with {graph.n} vertices")
    _check_domain(model, x)
    return NetworkSystem.from_graph(model, graph)(x)


# ---------------------------------------------------------------------------
# integration


@dataclass(frozen=True)
class IntegratorOptions:
    """Adaptive Dormand-Prince 5(4) settings and the steady-state criterion."""

    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    steady_tol: float = 1e-8
    max_model_time: float = 1e4
    max_steps: int = 500_000
    dedupe_tol: float | None = None
    newton: bool = True
    newton_switch: float = 1e-3

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol", "steady_tol", "max_model_time"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")
        if self.dedupe_tol is not None and not self.dedupe_tol > 0:
            raise ValueError("dedupe_tol must be positive")

    @property
    def attractor_tol(self) -> float:
        return 1e3 * self.steady_tol if self.dedupe_tol is None else self.dedupe_tol

    def updated(self, **kw) -> "IntegratorOptions":
        return replace(self, **kw)


DEFAULT_OPTIONS = IntegratorOptions()


@dataclass
class SteadyStateResult:
    state: np.ndarray
    converged: bool
    residual: float
    steps: int
    elapsed_model_time: float
    clamp_events: int = 0
    vertex_ids: tuple | None = None
    origins: tuple[int, ...] = ()

    @property
    def mean(self) -> float:
        return float(np.mean(self.state)) if self.state.size else 0.0


# Dormand-Prince tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B = _A[6] + (0.0,)
# difference between the 5th-order solution and the embedded 4th-order one
_E = (
    35 / 384 - 5179 / 57600, 0.0, 500 / 1113 - 7571 / 16695, 125 / 192 - 393 / 640,
    -2187 / 6784 + 92097 / 339200, 11 / 84 - 187 / 2100, -1 / 40,
)


def _initial_step(fun, y, f, opts, lo, hi):
    scale = opts.abs_tol + opts.rel_tol * np.abs(y)
    d0 = np.sqrt(np.mean((y / scale) ** 2))
    d1 = np.sqrt(np.mean((f / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    y1 = np.clip(y + h0 * f, lo, hi)
    f1 = fun(y1)
    d2 = np.sqrt(np.mean(((f1 - f) / scale) ** 2)) / h0 if np.all(np.isfinite(f1)) else np.inf
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1)


def _newton(fun, jac, y, f, opts, lo, hi, max_iter=30):
    """Damped Newton on ``fun(y) = 0``; returns (y, f, res) or None when it stalls."""
    res = float(np.max(np.abs(f)))
    for _ in range(max_iter):
        try:
            with np.errstate(all="ignore"):
                dy = spla.spsolve(sp.csc_matrix(jac(y)), -f)
        except (RuntimeError, ValueError):
            return None
        if not np.all(np.isfinite(dy)):
            return None
        alpha = 1.0
        while alpha >= 1 / 64:
            y_try = np.clip(y + alpha * dy, lo, hi)
            f_try = fun(y_try)
            if np.all(np.isfinite(f_try)):
                r_try = float(np.max(np.abs(f_try)))
                if r_try < (1 - 1e-4 * alpha) * res:
                    break
            alpha /= 2
        else:
            return None
        y, f, res = y_try, f_try, r_try
        if res <= opts.steady_tol:
            return y, f, res
    return None


def _flows_toward(f, dy, opts) -> bool:
    """Every component that Newton moves noticeably is already moving that way."""
    big = np.abs(dy) > opts.steady_tol
    return bool(np.all(f[big] * dy[big] > 0))


def integrate(fun: Callable[[np.ndarray], np.ndarray], y0, opts: IntegratorOptions = DEFAULT_OPTIONS,
              domain: tuple[float, float] = (-math.inf, math.inf), jac=None) -> SteadyStateResult:
    """Integrate ``y' = fun(y)`` forward until ``max|y'| <= steady_tol``.

    Accepted states are clamped into ``domain``; trial stages are clipped too,
    so ``fun`` is never evaluated outside it.  Returns the last state with
    ``converged=False`` when the time or step budget runs out.

    With a Jacobian callable ``jac`` the end of the approach is finished by
    damped Newton iterations.  Newton is only tried once the residual is
    below ``newton_switch``.  The polished point is kept when every component
    has relaxed 100x below its own peak along the trajectory, or when the flow
    already points at it componentwise (starts close to equilibrium); either
    way the flow, not Newton, has selected the attractor.
    """
    lo, hi = domain
    y = np.array(y0, dtype=float, copy=True)
    if not np.all(np.isfinite(y)):
        i = int(np.flatnonzero(~np.isfinite(y))[0])
        raise NonFinite(f"initial state component {i} is not finite", vertex=i)
    f = fun(y)
    _require_finite(f, "derivative at initial state")
    res = float(np.max(np.abs(f))) if f.size else 0.0
    t = 0.0
    steps = clamps = 0
    if res <= opts.steady_tol:
        return SteadyStateResult(y, True, res, 0, 0.0)

    h = _initial_step(fun, y, f, opts, lo, hi)
    h_min = 1e-14
    attempts = 0
    peak = np.abs(f)
    next_newton = opts.newton_switch if (jac is not None and opts.newton) else -1.0
    k = [None] * 7
    while t < opts.max_model_time and attempts < opts.max_steps:
        attempts += 1
        k[0] = f
        for s in range(1, 7):
            acc = _A[s][0] * k[0]
            for r in range(1, s):
                if _A[s][r]:
                    acc = acc + _A[s][r] * k[r]
            k[s] = fun(np.clip(y + h * acc, lo, hi))
        y_new = y + h * (
            _B[0] * k[0] + _B[2] * k[2] + _B[3] * k[3] + _B[4] * k[4] + _B[5] * k[5]
        )
        err = h * (
            _E[0] * k[0] + _E[2] * k[2] + _E[3] * k[3] + _E[4] * k[4] + _E[5] * k[5] + _E[6] * k[6]
        )
        scale = opts.abs_tol + opts.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
        en = float(np.sqrt(np.mean((err / scale) ** 2))) if err.size else 0.0

        if not math.isfinite(en) or not np.all(np.isfinite(y_new)):
            h *= 0.2
            if h < h_min * max(1.0, t):
                bad = np.flatnonzero(~np.isfinite(y_new))
                i = int(bad[0]) if bad.size else None
                raise NonFinite(f"state became non-finite near t={t:.6g}", vertex=i)
            continue

        if en <= 1.0:
            t += h
            steps += 1
            f_new = k[6]
            clipped = np.clip(y_new, lo, hi)
            moved = clipped != y_new
            if moved.any():
                clamps += int(moved.sum())
                y_new = clipped
                f_new = fun(y_new)
            _require_finite(f_new, f"derivative at t={t:.6g}")
            y, f = y_new, f_new
            res = float(np.max(np.abs(f)))
            if res <= opts.steady_tol:
                return SteadyStateResult(y, True, res, steps, t, clamps)
            absf = np.abs(f)
            np.maximum(peak, absf, out=peak)
            if res <= next_newton:
                relaxed = np.all(absf <= np.maximum(1e-2 * peak, opts.steady_tol))
                polished = _newton(fun, jac, y, f, opts, lo, hi)
                if polished is not None and (relaxed or _flows_toward(f, polished[0] - y, opts)):
                    y, f, res = polished
                    return SteadyStateResult(y, True, res, steps, t, clamps)
                next_newton = res / 10
            factor = 5.0 if en == 0 else min(5.0, max(0.2, 0.9 * en ** -0.2))
        else:
            factor = max(0.2, 0.9 * en ** -0.2)
        h *= factor
        if h < h_min * max(1.0, t):
            raise NonFinite(f"step size underflow at t={t:.6g}")
    return SteadyStateResult(y, False, res, steps, t, clamps)


def _require_finite(v, what):
    if not np.all(np.isfinite(v)):
        i = int(np.flatnonzero(~np.isfinite(v))[0])
        raise NonFinite(f"{what}: component {i} is not finite", vertex=i)


def _as_init(init, n) -> np.ndarray:
    x = np.asarray(init, dtype=float)
    if x.ndim == 0:
        return np.full(n, float(x))
    if x.shape != (n,):
        raise ValueError(f"initial state of shape {x.shape} is not aligned with {n} vertices")
    return x.copy()


def integrate_to_steady_state(model: DynamicsModel, graph: Graph, init,
                              opts: IntegratorOptions = DEFAULT_OPTIONS) -> SteadyStateResult:
    """Forward-integrate the full coupled system from ``init`` (array or uniform scalar)."""
    x0 = _as_init(init, graph.n)
    _check_domain(model, x0, "initial state")
    system = NetworkSystem.from_graph(model, graph)
    res = integrate(system, x0, opts, model.state_domain, jac=system.jacobian)
    res.vertex_ids = graph.vertex_ids
    return res


def default_grid(model: DynamicsModel, low: float = 1e-6, count: int = 6) -> list[float]:
    """Uniform start levels: one near-zero level plus ``count`` log-spaced high levels."""
    a, b = model.high_range
    lo, hi = model.state_domain
    levels = [low] + list(np.logspace(math.log10(a), math.log10(b), count))
    return [float(min(max(v, lo), hi)) for v in levels]


def attractors_of(fun, starts: Sequence[np.ndarray], opts: IntegratorOptions, domain,
                  vertex_ids=None, jac=None) -> list[SteadyStateResult]:
    """Integrate from every start, merge converged end states closer than the dedupe tolerance."""
    found: list[SteadyStateResult] = []
    tol = opts.attractor_tol
    errors = []
    for idx, x0 in enumerate(starts):
        try:
            r = integrate(fun, x0, opts, domain, jac=jac)
        except NonFinite as exc:
            errors.append(exc)
            continue
        if not r.converged:
            continue
        for a in found:
            if np.max(np.abs(a.state - r.state), initial=0.0) <= tol:
                a.origins = a.origins + (idx,)
                break
        else:
            r.origins = (idx,)
            r.vertex_ids = vertex_ids
            found.append(r)
    if not found and errors:
        raise errors[0]
    found.sort(key=lambda a: a.mean)
    return found


def find_attractors(model: DynamicsModel, graph: Graph, init_grid=None,
                    opts: IntegratorOptions = DEFAULT_OPTIONS) -> list[SteadyStateResult]:
    """Distinct converged steady states reached from ``init_grid``, sorted by mean state.

    ``init_grid`` items are arrays or uniform scalar levels; it defaults to
    :func:`default_grid`.  A start whose integration fails is skipped.
    """
    if init_grid is None:
        init_grid = default_grid(model)
    if len(init_grid) == 0:
        raise ValueError("init_grid must be nonempty")
    starts = [_as_init(s, graph.n) for s in init_grid]
    for s in starts:
        _check_domain(model, s, "initial state")
    system = NetworkSystem.from_graph(model, graph)
    return attractors_of(system, starts, opts, model.state_domain, graph.vertex_ids, jac=system.jacobian)
