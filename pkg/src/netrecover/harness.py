"""Experiment driver: sampling x estimation x recovery sweeps with error metrics.

Every experiment is described by a JSON document (see :class:`ExperimentConfig`)
and produces ``report.csv`` (per-vertex), ``runs.csv`` (per-repeat),
``summary.json`` (aggregates) and ``meta.json`` (config echo, versions,
timings).  Everything except ``meta.json`` is byte-stable for a fixed config.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import platform
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from . import __version__
from .dynamics import DynamicsModel, IntegratorOptions, get_model
from .errors import InfeasibleParams, NetRecoverError
from .estimators import estimate_beta, estimate_degrees
from .graph import Graph, degree_vector, generate, heterogeneity, load_graph, resilience, rewire
from .meanfield import iterate_mean_field, solve_augmented_subgraph, solve_full, solve_naive, solve_x_eff
from .sampling import SCHEMES, draw

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
REPORT_COLUMNS = (
    "scheme", "vertex_id", "degree", "n_samples", "x_true", "z_naive", "z_meanfield",
    "relerr_naive", "relerr_meanfield",
)
RUN_COLUMNS = (
    "scheme", "repeat", "seed", "m", "beta_true", "beta_naive", "beta_hat", "degree_mae",
    "x_eff", "n_xeff_candidates", "attractors_naive", "attractors_meanfield", "status",
)


def relative_error(predicted, truth) -> float:
    """Mean over vertices of ``|z - x| / (|x| + eps)`` with ``eps = 1e-12 max|x| + 1e-30``."""
    return float(np.mean(relative_errors(predicted, truth)))


def relative_errors(predicted, truth) -> np.ndarray:
    z = np.asarray(predicted, dtype=float)
    x = np.asarray(truth, dtype=float)
    if z.shape != x.shape:
        raise ValueError("predicted and truth must be aligned")
    if x.size == 0:
        return np.zeros(0)
    eps = 1e-12 * np.max(np.abs(x)) + 1e-30
    return np.abs(z - x) / (np.abs(x) + eps)


# ---------------------------------------------------------------------------
# configuration


@dataclass
class ExperimentConfig:
    """JSON-mirrored experiment description.

    ``network`` is ``{"generator": kind, "n": ..., "seed": ..., **params}`` or
    ``{"path": file, "directed": false}``.  ``sample_size`` is an absolute
    ``m`` (int) or ``{"fraction": f}``.  ``beta`` selects the estimated or the
    true resilience, ``known_mean_degree`` is a number or ``"network"`` (take
    it from the full graph as known metadata).
    """

    network: dict
    model: str = "epidemic"
    params: dict = field(default_factory=dict)
    schemes: list = field(default_factory=lambda: ["VS"])
    sample_size: object = 10
    repeats: int = 20
    seed: int = 0
    beta: str = "estimate"
    known_mean_degree: object = None
    solver: str = "coupled"
    integrator: dict = field(default_factory=dict)
    output: str | None = None
    threads: int = 1
    rewire: dict = field(default_factory=dict)
    sweep: list | None = None

    def __post_init__(self):
        if self.repeats < 1:
            raise ValueError("repeats must be at least 1")
        bad = [s for s in self.schemes if s not in SCHEMES]
        if bad:
            raise ValueError(f"unknown schemes {bad}")
        if self.beta not in ("estimate", "true"):
            raise ValueError("beta must be 'estimate' or 'true'")
        if self.solver not in ("coupled", "iterate"):
            raise ValueError("solver must be 'coupled' or 'iterate'")

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return asdict(self)

    def resolve_m(self, n: int) -> int:
        size = self.sample_size
        if isinstance(size, dict):
            m = int(round(float(size["fraction"]) * n))
        else:
            m = int(size)
        if not 1 <= m <= n:
            raise ValueError(f"sample size resolves to {m}, outside [1, {n}]")
        return m

    def dynamics(self) -> DynamicsModel:
        return get_model(self.model, **self.params)

    def options(self) -> IntegratorOptions:
        return IntegratorOptions(**self.integrator)


def build_network(spec: dict, base_dir: Path | None = None) -> Graph:
    spec = dict(spec)
    if "path" in spec:
        path = Path(spec["path"])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        return load_graph(path, directed=bool(spec.get("directed", False)))
    kind = spec.pop("generator")
    n = spec.pop("n", None)
    seed = spec.pop("seed", None)
    if kind == "rewired":
        source = build_network(spec.pop("source"), base_dir)
        return generate("rewired", seed=seed, source=source, **spec)
    return generate(kind, n, seed=seed, **spec)


# ---------------------------------------------------------------------------
# one repeat


def _repeat_seeds(seed: int, scheme_index: int, repeats: int) -> list[int]:
    ss = np.random.SeedSequence([int(seed), int(scheme_index)])
    return [int(s) for s in ss.generate_state(repeats, dtype=np.uint32)]


def _run_repeat(task):
    (graph, model, scheme, m, seed, repeat, beta_true, beta_mode, known_mean_degree, solver, opts) = task
    row = {
        "scheme": scheme, "repeat": repeat, "seed": seed, "m": m, "beta_true": beta_true,
        "beta_naive": float("nan"), "beta_hat": float("nan"), "degree_mae": float("nan"),
        "x_eff": float("nan"), "n_xeff_candidates": 0, "attractors_naive": 0,
        "attractors_meanfield": 0, "status": "ok",
    }
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            sample = draw(graph, scheme, m, seed)
            est = estimate_beta(sample, known_mean_degree)
            row["beta_naive"] = est.beta_naive
            row["beta_hat"] = est.beta_hat
            beta = beta_true if beta_mode == "true" else est.beta_hat
            deg = estimate_degrees(sample, est.beta_hat, known_mean_degree)
            row["degree_mae"] = float(np.mean(np.abs(deg.degrees - graph.in_strength[sample.indices])))
            ctx = solve_x_eff(model, beta, opts)
            row["x_eff"] = ctx.x_eff
            row["n_xeff_candidates"] = len(ctx.x_eff_candidates)
            if solver == "iterate":
                mf = iterate_mean_field(model, sample, deg, ctx, opts)
            else:
                mf = solve_augmented_subgraph(model, sample, deg, ctx, opts)
            naive = solve_naive(model, sample, opts)
        except (NetRecoverError, ValueError) as exc:
            row["status"] = f"failed:{type(exc).__name__}"
            log.info("repeat %d (%s) failed: %s", repeat, scheme, exc)
            return row, None
    row["attractors_naive"] = naive.attractor_count
    row["attractors_meanfield"] = mf.attractor_count
    return row, (sample.indices, mf.states, naive.states)


def _map(fn, tasks, threads):
    if threads and threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, tasks))
    return [fn(t) for t in tasks]


# ---------------------------------------------------------------------------
# reports


@dataclass
class ExperimentReport:
    config: dict
    vertices: list
    runs: list
    summary: dict
    meta: dict

    def report_csv(self) -> str:
        return _csv_text(REPORT_COLUMNS, self.vertices, header=f"# schema_version={SCHEMA_VERSION}")

    def runs_csv(self) -> str:
        return _csv_text(RUN_COLUMNS, self.runs, header=f"# schema_version={SCHEMA_VERSION}")

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.csv").write_text(self.report_csv())
        (out / "runs.csv").write_text(self.runs_csv())
        _write_json(out / "summary.json", self.summary)
        _write_json(out / "meta.json", self.meta)
        return out


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def _csv_text(columns, rows, header=None) -> str:
    buf = io.StringIO()
    if header:
        buf.write(header + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([_fmt(r[c]) for c in columns])
    return buf.getvalue()


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n")


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if np.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


def _meta(config: dict, started: float, extra: dict | None = None) -> dict:
    import scipy

    meta = {
        "config": config,
        "versions": {
            "netrecover": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "runtime_seconds": round(time.time() - started, 3),
    }
    if extra:
        meta.update(extra)
    return meta


def _mean_known_degree(cfg: ExperimentConfig, graph: Graph):
    k = cfg.known_mean_degree
    if k == "network":
        return float(graph.in_strength.mean())
    return None if k is None else float(k)


def run_experiment(config: ExperimentConfig | dict, graph: Graph | None = None,
                   base_dir: Path | None = None) -> ExperimentReport:
    """Sample, estimate and recover for every scheme and repeat; average per vertex.

    Truth is the full-network attractor reached from the highest uniform
    start.  Repeats whose estimation or solve fails are excluded and counted.
    """
    cfg = config if isinstance(config, ExperimentConfig) else ExperimentConfig.from_dict(config)
    started = time.time()
    if graph is None:
        graph = build_network(cfg.network, base_dir)
    model = cfg.dynamics()
    opts = cfg.options()
    m = cfg.resolve_m(graph.n)
    beta_true = resilience(graph)
    known_mean = _mean_known_degree(cfg, graph)

    t0 = time.time()
    truth = solve_full(model, graph, opts)
    truth_time = time.time() - t0
    x_true = truth.states
    degrees = graph.in_strength

    vertex_rows, run_rows = [], []
    per_scheme = {}
    for si, scheme in enumerate(cfg.schemes):
        seeds = _repeat_seeds(cfg.seed, si, cfg.repeats)
        tasks = [
            (graph, model, scheme, m, s, r, beta_true, cfg.beta, known_mean, cfg.solver, opts)
            for r, s in enumerate(seeds)
        ]
        outcomes = _map(_run_repeat, tasks, cfg.threads)
        sums_mf = np.zeros(graph.n)
        sums_nv = np.zeros(graph.n)
        counts = np.zeros(graph.n, dtype=np.int64)
        failures: dict[str, int] = {}
        for row, payload in outcomes:
            run_rows.append(row)
            if payload is None:
                failures[row["status"]] = failures.get(row["status"], 0) + 1
                continue
            idx, z_mf, z_nv = payload
            np.add.at(sums_mf, idx, z_mf)
            np.add.at(sums_nv, idx, z_nv)
            np.add.at(counts, idx, 1)
        seen = np.flatnonzero(counts)
        z_mf = sums_mf[seen] / counts[seen]
        z_nv = sums_nv[seen] / counts[seen]
        err_mf = relative_errors(z_mf, x_true[seen])
        err_nv = relative_errors(z_nv, x_true[seen])
        for k, i in enumerate(seen):
            vertex_rows.append({
                "scheme": scheme, "vertex_id": graph.vertex_ids[i], "degree": float(degrees[i]),
                "n_samples": int(counts[i]), "x_true": float(x_true[i]), "z_naive": float(z_nv[k]),
                "z_meanfield": float(z_mf[k]), "relerr_naive": float(err_nv[k]),
                "relerr_meanfield": float(err_mf[k]),
            })
        ok_rows = [r for r, p in outcomes if p is not None]
        per_scheme[scheme] = {
            "n_vertices": int(seen.size),
            "repeats_ok": len(ok_rows),
            "repeats_failed": cfg.repeats - len(ok_rows),
            "failures": failures,
            "mean_relerr_meanfield": float(np.mean(err_mf)) if seen.size else float("nan"),
            "mean_relerr_naive": float(np.mean(err_nv)) if seen.size else float("nan"),
            "max_abserr_meanfield": float(np.max(np.abs(z_mf - x_true[seen]))) if seen.size else float("nan"),
            "max_abserr_naive": float(np.max(np.abs(z_nv - x_true[seen]))) if seen.size else float("nan"),
            "mean_beta_hat": float(np.mean([r["beta_hat"] for r in ok_rows])) if ok_rows else float("nan"),
            "mean_beta_naive": float(np.mean([r["beta_naive"] for r in ok_rows])) if ok_rows else float("nan"),
        }

    summary = {
        "schema_version": SCHEMA_VERSION,
        "network": {"n": graph.n, "edges": graph.number_of_edges, "beta": beta_true,
                    "mean_degree": float(degrees.mean()),
                    "heterogeneity": heterogeneity(graph) if graph.number_of_edges else 0.0},
        "model": {"name": model.name, "params": dict(model.params)},
        "m": m,
        "truth": {"attractor_count": truth.attractor_count,
                  "attractor_means": [float(np.mean(a)) for a in truth.attractors]},
        "schemes": per_scheme,
    }
    meta = _meta(cfg.to_dict(), started, {"truth_solve_seconds": round(truth_time, 3)})
    report = ExperimentReport(cfg.to_dict(), vertex_rows, run_rows, summary, meta)
    if cfg.output:
        report.write(cfg.output)
    return report


# ---------------------------------------------------------------------------
# degree-sequence sufficiency


@dataclass
class RewireReport:
    rows: list
    summary: dict
    meta: dict

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        cols = ("vertex_id", "degree", "x_original", "x_rewired")
        (out / "report.csv").write_text(_csv_text(cols, self.rows, header=f"# schema_version={SCHEMA_VERSION}"))
        _write_json(out / "summary.json", self.summary)
        _write_json(out / "meta.json", self.meta)
        return out


def rewiring_check(config: ExperimentConfig | dict, graph: Graph | None = None,
                   base_dir: Path | None = None) -> RewireReport:
    """Compare full-network steady states before and after degree-preserving rewiring."""
    cfg = config if isinstance(config, ExperimentConfig) else ExperimentConfig.from_dict(config)
    started = time.time()
    if graph is None:
        graph = build_network(cfg.network, base_dir)
    rw = dict(cfg.rewire)
    rewired = rewire(graph, rw.get("swap_count"), seed=rw.get("seed", cfg.seed))
    if not np.array_equal(degree_vector(graph), degree_vector(rewired)):
        raise InfeasibleParams("rewiring changed the degree sequence")
    model = cfg.dynamics()
    opts = cfg.options()
    x = solve_full(model, graph, opts).states
    y = solve_full(model, rewired, opts).states
    deg = graph.in_strength
    rows = [
        {"vertex_id": v, "degree": float(deg[i]), "x_original": float(x[i]), "x_rewired": float(y[i])}
        for i, v in enumerate(graph.vertex_ids)
    ]
    pearson = float(np.corrcoef(x, y)[0, 1]) if np.std(x) > 0 and np.std(y) > 0 else float("nan")
    summary = {
        "schema_version": SCHEMA_VERSION,
        "pearson": pearson,
        "max_abs_diff": float(np.max(np.abs(x - y))),
        "mean_relerr": relative_error(y, x),
        "n": graph.n,
        "edges": graph.number_of_edges,
        "model": model.name,
    }
    report = RewireReport(rows, summary, _meta(cfg.to_dict(), started))
    if cfg.output:
        report.write(cfg.output)
    return report


# ---------------------------------------------------------------------------
# heterogeneity sweep


def default_sweep(n: int = 1000, mean_degree: int = 10, points: int = 15, seed: int = 0) -> list[dict]:
    """ER endpoint followed by growth networks with increasing preferential attachment."""
    specs = [{"generator": "er", "n": n, "p": mean_degree / (n - 1), "seed": seed}]
    for k, pref in enumerate(np.linspace(0.0, 1.0, points - 1)):
        specs.append({"generator": "scale_free", "n": n, "m_attach": mean_degree // 2,
                      "pref": round(float(pref), 6), "seed": seed + k + 1})
    return specs


@dataclass
class SweepReport:
    rows: list
    summary: dict
    meta: dict

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        cols = ("network", "heterogeneity", "beta", "mean_degree", "scheme", "mean_relerr_meanfield",
                "mean_relerr_naive", "n_vertices", "repeats_failed")
        (out / "sweep.csv").write_text(_csv_text(cols, self.rows, header=f"# schema_version={SCHEMA_VERSION}"))
        _write_json(out / "summary.json", self.summary)
        _write_json(out / "meta.json", self.meta)
        return out


def heterogeneity_sweep(config: ExperimentConfig | dict, base_dir: Path | None = None) -> SweepReport:
    """Run the experiment on each network of ``config.sweep`` and relate error to heterogeneity."""
    cfg = config if isinstance(config, ExperimentConfig) else ExperimentConfig.from_dict(config)
    started = time.time()
    specs = cfg.sweep if cfg.sweep is not None else default_sweep(seed=cfg.seed)
    rows = []
    for k, spec in enumerate(specs):
        graph = build_network(spec, base_dir)
        sub = ExperimentConfig.from_dict({**cfg.to_dict(), "network": spec, "output": None, "sweep": None})
        rep = run_experiment(sub, graph=graph)
        net = rep.summary["network"]
        for scheme, s in rep.summary["schemes"].items():
            rows.append({
                "network": k, "heterogeneity": net["heterogeneity"], "beta": net["beta"],
                "mean_degree": net["mean_degree"], "scheme": scheme,
                "mean_relerr_meanfield": s["mean_relerr_meanfield"],
                "mean_relerr_naive": s["mean_relerr_naive"], "n_vertices": s["n_vertices"],
                "repeats_failed": s["repeats_failed"],
            })
        log.info("sweep network %d: H=%.3f", k, net["heterogeneity"])
    per_scheme = {}
    for scheme in cfg.schemes:
        sel = [r for r in rows if r["scheme"] == scheme]
        h = np.array([r["heterogeneity"] for r in sel])
        e = np.array([r["mean_relerr_meanfield"] for r in sel])
        ok = np.isfinite(e)
        rho = float(stats.spearmanr(h[ok], e[ok]).statistic) if ok.sum() >= 3 else float("nan")
        top = int(np.argmax(np.where(ok, h, -np.inf))) if ok.any() else None
        per_scheme[scheme] = {
            "spearman_rho": rho,
            "max_heterogeneity_error": float(e[top]) if top is not None else float("nan"),
            "networks": int(ok.sum()),
        }
    summary = {"schema_version": SCHEMA_VERSION, "model": cfg.model, "schemes": per_scheme}
    report = SweepReport(rows, summary, _meta(cfg.to_dict(), started))
    if cfg.output:
        report.write(cfg.output)
    return report
