"""Command line entry point: ``netrecover <subcommand> [options]``.

Global flags (``--config``, ``--seed``, ``--out``, ``--threads``) are accepted
after any subcommand.  Values given on the command line override the config.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .dynamics import get_model
from .errors import NetRecoverError
from .estimators import estimate_beta, estimate_degrees
from .graph import load_graph, save_graph, topo_stats
from .harness import (
    ExperimentConfig,
    SCHEMA_VERSION,
    _csv_text,
    _meta,
    _write_json,
    build_network,
    heterogeneity_sweep,
    run_experiment,
    rewiring_check,
)
from .meanfield import solve_augmented_subgraph, solve_full, solve_naive, solve_x_eff
from .sampling import SCHEMES, SampledSubgraph, draw

log = logging.getLogger("netrecover")


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _kv(items) -> dict:
    out = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep:
            raise SystemExit(f"expected key=value, got {item!r}")
        out[key] = _parse_value(value)
    return out


def _load_config(args) -> tuple[dict, Path | None]:
    if not args.config:
        return {}, None
    path = Path(args.config)
    return json.loads(path.read_text()), path.parent


def _experiment_config(args) -> tuple[ExperimentConfig, Path | None]:
    doc, base = _load_config(args)
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.threads is not None:
        doc["threads"] = args.threads
    if args.out is not None:
        doc["output"] = args.out
    doc.setdefault("network", {})
    return ExperimentConfig.from_dict(doc), base


def _out_dir(args, default: str) -> Path:
    out = Path(args.out or default)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _network(args, doc, base):
    if getattr(args, "graph", None):
        return load_graph(args.graph)
    if not doc.get("network"):
        raise SystemExit("no network: pass --graph or a config with a 'network' entry")
    return build_network(doc["network"], base)


def _model(args, doc):
    name = getattr(args, "model", None) or doc.get("model", "epidemic")
    params = {**doc.get("params", {}), **_kv(getattr(args, "param", None))}
    return get_model(name, **params)


def _options(doc):
    return ExperimentConfig(network={}, integrator=doc.get("integrator", {})).options()


# ---------------------------------------------------------------------------
# subcommands


def cmd_generate(args) -> int:
    doc, base = _load_config(args)
    spec = dict(doc.get("network", {}))
    if args.kind:
        spec = {"generator": args.kind, **_kv(args.param)}
    if args.n is not None:
        spec["n"] = args.n
    if args.seed is not None:
        spec["seed"] = args.seed
    if "generator" not in spec:
        raise SystemExit("generate needs --kind or a config with a generator network")
    started = time.time()
    g = build_network(spec, base)
    out = _out_dir(args, "out")
    save_graph(g, out / args.filename)
    st = topo_stats(g)
    _write_json(out / "summary.json", {
        "schema_version": SCHEMA_VERSION, "n": g.n, "edges": g.number_of_edges, "beta": st.beta,
        "mean_degree": st.mean_degree, "mean_sq_degree": st.mean_sq_degree, "heterogeneity": st.heterogeneity,
    })
    _write_json(out / "meta.json", _meta({"network": spec}, started))
    print(out / args.filename)
    return 0


def cmd_sample(args) -> int:
    doc, base = _load_config(args)
    started = time.time()
    g = _network(args, doc, base)
    m = args.m if args.m is not None else ExperimentConfig(network={}, sample_size=doc.get("sample_size", 10)).resolve_m(g.n)
    scheme = args.scheme or (doc.get("schemes") or ["VS"])[0]
    seed = args.seed if args.seed is not None else doc.get("seed", 0)
    s = draw(g, scheme, m, seed)
    out = _out_dir(args, "out")
    (out / "sample.json").write_text(json.dumps(s.to_json()) + "\n")
    _write_json(out / "meta.json", _meta({"scheme": scheme, "m": m, "seed": seed}, started))
    print(out / "sample.json")
    return 0


def _read_sample(path) -> SampledSubgraph:
    return SampledSubgraph.from_json(json.loads(Path(path).read_text()))


def cmd_estimate(args) -> int:
    started = time.time()
    s = _read_sample(args.sample)
    est = estimate_beta(s, args.mean_degree, use_visits=args.multiset or None)
    deg = estimate_degrees(s, est.beta_hat, args.mean_degree)
    out = _out_dir(args, "out")
    rows = [{"vertex_id": v, "induced_degree": float(di), "degree_hat": float(dh)}
            for v, di, dh in zip(s.vertices, s.induced_degrees, deg.degrees)]
    (out / "report.csv").write_text(_csv_text(("vertex_id", "induced_degree", "degree_hat"), rows,
                                              header=f"# schema_version={SCHEMA_VERSION}"))
    _write_json(out / "summary.json", {
        "schema_version": SCHEMA_VERSION, "scheme": s.scheme, "m": s.m, "n": s.n_total,
        "beta_hat": est.beta_hat, "beta_naive": est.beta_naive, "clamped": est.clamped,
    })
    _write_json(out / "meta.json", _meta({"sample": str(args.sample), "mean_degree": args.mean_degree}, started))
    print(json.dumps({"beta_hat": est.beta_hat, "beta_naive": est.beta_naive}))
    return 0


def cmd_solve(args) -> int:
    doc, base = _load_config(args)
    started = time.time()
    model = _model(args, doc)
    opts = _options(doc)
    out = _out_dir(args, "out")
    extra = {}
    if args.method == "full":
        g = _network(args, doc, base)
        res = solve_full(model, g, opts)
    else:
        if not args.sample:
            raise SystemExit(f"--sample is required for method {args.method}")
        s = _read_sample(args.sample)
        if args.method == "naive":
            res = solve_naive(model, s, opts)
        else:
            est = estimate_beta(s, args.mean_degree)
            beta = args.beta if args.beta is not None else est.beta_hat
            deg = estimate_degrees(s, est.beta_hat, args.mean_degree)
            ctx = solve_x_eff(model, beta, opts)
            res = solve_augmented_subgraph(model, s, deg, ctx, opts)
            extra = {"beta": beta, "x_eff": ctx.x_eff, "x_eff_candidates": list(ctx.x_eff_candidates)}
    rows = [{"vertex_id": v, "state": float(x)} for v, x in zip(res.vertex_ids, res.states)]
    (out / "report.csv").write_text(_csv_text(("vertex_id", "state"), rows,
                                              header=f"# schema_version={SCHEMA_VERSION}"))
    _write_json(out / "summary.json", {
        "schema_version": SCHEMA_VERSION, "method": res.method, "model": model.name,
        "attractor_count": res.attractor_count, "residual": res.residual,
        "mean_state": float(np.mean(res.states)), **extra,
    })
    _write_json(out / "meta.json", _meta({"method": args.method, "model": model.name,
                                          "params": dict(model.params)}, started))
    print(out / "report.csv")
    return 0


def cmd_experiment(args) -> int:
    cfg, base = _experiment_config(args)
    rep = run_experiment(cfg, base_dir=base)
    if cfg.output is None:
        rep.write("out")
    print(json.dumps({k: {"meanfield": v["mean_relerr_meanfield"], "naive": v["mean_relerr_naive"]}
                      for k, v in rep.summary["schemes"].items()}))
    return 0


def cmd_rewire(args) -> int:
    cfg, base = _experiment_config(args)
    rep = rewiring_check(cfg, base_dir=base)
    if cfg.output is None:
        rep.write("out")
    print(json.dumps({"pearson": rep.summary["pearson"]}))
    return 0


def cmd_sweep(args) -> int:
    cfg, base = _experiment_config(args)
    rep = heterogeneity_sweep(cfg, base_dir=base)
    if cfg.output is None:
        rep.write("out")
    print(json.dumps(rep.summary["schemes"]))
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment config")
    common.add_argument("--seed", type=int, help="RNG seed (overrides config)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--threads", type=int, help="worker processes for repeats")
    common.add_argument("-v", "--verbose", action="count", default=0)

    p = argparse.ArgumentParser(prog="netrecover", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="generate a synthetic network")
    g.add_argument("--kind", choices=["er", "scale_free", "regular", "powerlaw"])
    g.add_argument("--n", type=int)
    g.add_argument("--param", action="append", metavar="KEY=VALUE", help="generator parameter, e.g. p=0.01")
    g.add_argument("--filename", default="graph.edges", help="graph file name (.edges or .json)")
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("sample", parents=[common], help="draw a sampled subgraph")
    s.add_argument("--graph", help="edge list or JSON graph")
    s.add_argument("--scheme", choices=SCHEMES)
    s.add_argument("--m", type=int)
    s.set_defaults(func=cmd_sample)

    e = sub.add_parser("estimate", parents=[common], help="estimate resilience and degrees from a sample")
    e.add_argument("--sample", required=True)
    e.add_argument("--mean-degree", type=float, help="known network mean degree (needed by IndRW)")
    e.add_argument("--multiset", action="store_true", help="average over the visit multiset")
    e.set_defaults(func=cmd_estimate)

    v = sub.add_parser("solve", parents=[common], help="solve for steady states")
    v.add_argument("--method", choices=["full", "naive", "mean_field"], default="mean_field")
    v.add_argument("--graph")
    v.add_argument("--sample")
    v.add_argument("--model")
    v.add_argument("--param", action="append", metavar="KEY=VALUE")
    v.add_argument("--beta", type=float, help="use this resilience instead of the estimate")
    v.add_argument("--mean-degree", type=float)
    v.set_defaults(func=cmd_solve)

    x = sub.add_parser("experiment", parents=[common], help="run a sampling/recovery experiment")
    x.set_defaults(func=cmd_experiment)
    r = sub.add_parser("rewire-check", parents=[common], help="compare steady states before/after rewiring")
    r.set_defaults(func=cmd_rewire)
    h = sub.add_parser("heterogeneity-sweep", parents=[common], help="error versus degree heterogeneity")
    h.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (NetRecoverError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
