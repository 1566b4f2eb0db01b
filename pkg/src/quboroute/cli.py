"""Command-line entry points: gen, build, solve, sweep, report.

Exit codes for single-instance commands: 0 solved, 2 infeasible instance,
3 embedding rejection. Sweeps refuse to run without an explicit seed.
"""

import argparse
import json
import sys
from pathlib import Path

from . import experiments, network, qubo, samplers
from .domainwall import build_encoding_map, substitute

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_EMBEDDING = 3


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_gen(args) -> int:
    if args.mode == "exhaustive":
        if not args.out_dir:
            raise SystemExit("gen --mode exhaustive requires --out-dir")
        gis = list(experiments.gen_exhaustive(args.size, args.seed, args.r_max,
                                              args.rate_mode, args.fixed_rate))
    else:
        if args.edge_prob is None:
            raise SystemExit("gen --mode er requires --edge-prob")
        gis = experiments.gen_erdos_renyi(args.size, args.edge_prob, args.count,
                                          args.seed, args.r_max)
    if args.out_dir:
        d = Path(args.out_dir)
        d.mkdir(parents=True, exist_ok=True)
        for gi in gis:
            network.save_instance(gi.network, d / f"{gi.instance_id}.json")
        print(f"wrote {len(gis)} instances to {d}")
        return EXIT_OK
    if len(gis) != 1:
        raise SystemExit("multiple instances need --out-dir")
    _write(json.dumps(network.instance_to_dict(gis[0].network), indent=2) + "\n", args.out)
    return EXIT_OK


def _encode(q, encoding: str):
    if encoding == "domainwall":
        em = build_encoding_map(q)
        return substitute(q, em), em
    return q, None


def cmd_build(args) -> int:
    net = network.load_instance(args.instance)
    try:
        rt = network.collect_paths(net, args.k)
        q = qubo.build_qubo(net, rt, args.c_max, args.lambda1, args.lambda2,
                            slack_mode=args.slack_mode)
    except network.InfeasibleInstanceError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    if args.encoding == "domainwall":
        q = substitute(q, build_encoding_map(q), args.lambda_dw)
    if args.fix:
        q = qubo.fix_variables(q).reduced
    if args.format == "triples":
        _write(qubo.qubo_to_triples(q), args.out)
    else:
        _write(json.dumps(qubo.qubo_to_dict(q), indent=2) + "\n", args.out)
    return EXIT_OK


def _outcome_to_dict(outcome: samplers.SolveOutcome) -> dict:
    return {
        "status": outcome.status,
        "processing_time": outcome.processing_time,
        "reported_qpu_time": outcome.reported_qpu_time,
        "best_feasible": (
            {"assignment": list(outcome.best_feasible.assignment),
             "objective": outcome.best_feasible.objective}
            if outcome.best_feasible else None
        ),
        "samples": [
            {"bits": list(s.bits), "energy": s.energy,
             "assignment": list(s.assignment) if s.assignment else None,
             "feasible": s.feasible, "reason": s.reason, "objective": s.objective}
            for s in outcome.samples
        ],
    }


def _sample(q, args, ctx=None) -> samplers.SolveOutcome:
    if args.sampler == "exact":
        return samplers.solve_exact(q, ctx)
    if args.sampler == "remote":
        if not args.url:
            raise SystemExit("remote sampler requires --url")
        return samplers.RemoteSampler(args.url).solve(q, args.reads, ctx)
    cfg = samplers.SamplerConfig(num_reads=args.reads, sweeps=args.sweeps, seed=args.seed)
    return samplers.solve_anneal(q, cfg, ctx)


def cmd_solve(args) -> int:
    if bool(args.qubo) == bool(args.instance):
        raise SystemExit("solve needs exactly one of --qubo or --instance")
    if args.qubo:
        text = Path(args.qubo).read_text()
        if args.format == "triples" or (args.format == "auto" and not text.lstrip().startswith("{")):
            q = qubo.qubo_from_triples(text)
        else:
            q = qubo.qubo_from_dict(json.loads(text))
        outcome = _sample(q, args)
        _write(json.dumps(_outcome_to_dict(outcome), indent=2) + "\n", args.out)
        return EXIT_OK
    net = network.load_instance(args.instance)
    try:
        rt = network.collect_paths(net, args.k)
        q = qubo.build_qubo(net, rt, args.c_max, slack_mode=args.slack_mode)
    except network.InfeasibleInstanceError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    oracle = samplers.brute_force_route(net, rt, args.c_max)
    if oracle.status == "infeasible":
        print("infeasible: no route assignment satisfies capacity", file=sys.stderr)
        return EXIT_INFEASIBLE
    q, em = _encode(q, args.encoding)
    fix = qubo.fix_variables(q) if args.fix else None
    reduced = fix.reduced if fix else q
    model = samplers.EmbeddingModel(args.max_embed_vars, args.max_embed_density)
    if not samplers.embedding_feasible(reduced, model):
        print(f"embedding rejected: {reduced.n_vars} variables", file=sys.stderr)
        return EXIT_EMBEDDING
    ctx = samplers.DecodeContext(net, rt, args.c_max, q, em, fix)
    outcome = _sample(reduced, args, ctx)
    doc = _outcome_to_dict(outcome)
    doc["oracle_objective"] = oracle.objective
    _write(json.dumps(doc, indent=2) + "\n", args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    if args.config:
        cfg = experiments.load_sweep_config(args.config)
        if args.seed is not None:
            cfg = experiments.SweepConfig(**{**_cfg_dict(cfg), "seed": args.seed})
    else:
        if args.seed is None:
            raise SystemExit("sweep requires --seed (or a config file that sets one)")
        cfg = experiments.SweepConfig(seed=args.seed)
    overrides = {}
    for name in ("mode", "encoding", "sampler", "remote_url", "c_max", "r_max",
                 "instances_per_size", "num_reads", "sweeps", "k_paths",
                 "rate_mode", "fixed_rate", "max_embed_vars"):
        v = getattr(args, name, None)
        if v is not None:
            overrides[name] = v
    if args.sizes:
        overrides["sizes"] = tuple(int(s) for s in args.sizes.split(","))
    if args.edge_probs:
        overrides["edge_probs"] = tuple(float(p) for p in args.edge_probs.split(","))
    if overrides:
        cfg = experiments.SweepConfig(**{**_cfg_dict(cfg), **overrides})
    done = [0]

    def tick(_rec):
        done[0] += 1
        if args.verbose and done[0] % 50 == 0:
            print(f"  {done[0]} records", file=sys.stderr)

    records = experiments.sweep(cfg, jobs=args.jobs, progress=tick)
    experiments.records_to_csv(records, args.out)
    print(f"wrote {len(records)} records to {args.out}")
    return EXIT_OK


def _cfg_dict(cfg) -> dict:
    from dataclasses import asdict

    return asdict(cfg)


def cmd_report(args) -> int:
    records = experiments.records_from_csv(args.records)
    agg = experiments.aggregate(records)
    prefix = args.out_prefix
    experiments.metrics_to_csv(agg, f"{prefix}metrics.csv")
    experiments.long_format_csv(agg, f"{prefix}long.csv")
    experiments.degradation_to_csv(agg, f"{prefix}degradation.csv")
    for p, d in agg.degradation.items():
        label = "all" if p is None else f"p={p:g}"
        print(f"degradation size [{label}]: {'none on grid' if d is None else d}")
    print(f"wrote {prefix}metrics.csv, {prefix}long.csv, {prefix}degradation.csv")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="quboroute",
                                 description="Sensor-network route selection via QUBO")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate problem instances")
    g.add_argument("--mode", choices=["er", "exhaustive"], default="er")
    g.add_argument("--size", type=int, required=True)
    g.add_argument("--edge-prob", type=float)
    g.add_argument("--count", type=int, default=1)
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--r-max", type=int, default=5)
    g.add_argument("--rate-mode", choices=["fixed", "random"], default="fixed")
    g.add_argument("--fixed-rate", type=int, default=3)
    g.add_argument("--out")
    g.add_argument("--out-dir")
    g.set_defaults(func=cmd_gen)

    b = sub.add_parser("build", help="compile an instance into a QUBO")
    b.add_argument("--instance", required=True)
    b.add_argument("--k", type=int, default=2)
    b.add_argument("--c-max", type=int, default=5)
    b.add_argument("--encoding", choices=["onehot", "domainwall"], default="onehot")
    b.add_argument("--lambda1", type=float)
    b.add_argument("--lambda2", type=float)
    b.add_argument("--lambda-dw", type=float)
    b.add_argument("--slack-mode", choices=["binary", "unary"], default="binary")
    b.add_argument("--fix", action=argparse.BooleanOptionalAction, default=False)
    b.add_argument("--format", choices=["json", "triples"], default="json")
    b.add_argument("--out")
    b.set_defaults(func=cmd_build)

    s = sub.add_parser("solve", help="sample a QUBO or run one instance end to end")
    s.add_argument("--qubo")
    s.add_argument("--instance")
    s.add_argument("--format", choices=["auto", "json", "triples"], default="auto")
    s.add_argument("--sampler", choices=["exact", "anneal", "remote"], default="anneal")
    s.add_argument("--url")
    s.add_argument("--reads", type=int, default=10)
    s.add_argument("--sweeps", type=int, default=1000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--k", type=int, default=2)
    s.add_argument("--c-max", type=int, default=5)
    s.add_argument("--encoding", choices=["onehot", "domainwall"], default="onehot")
    s.add_argument("--slack-mode", choices=["binary", "unary"], default="binary")
    s.add_argument("--fix", action=argparse.BooleanOptionalAction, default=True)
    s.add_argument("--max-embed-vars", type=int, default=samplers.DEFAULT_EMBEDDING.max_vars)
    s.add_argument("--max-embed-density", type=float,
                   default=samplers.DEFAULT_EMBEDDING.max_density)
    s.add_argument("--out")
    s.set_defaults(func=cmd_solve)

    w = sub.add_parser("sweep", help="run an experiment grid to a records CSV")
    w.add_argument("--config", help="TOML or JSON sweep config")
    w.add_argument("--seed", type=int)
    w.add_argument("--mode", choices=["erdos_renyi", "exhaustive"])
    w.add_argument("--sizes", help="comma-separated graph sizes")
    w.add_argument("--edge-probs", help="comma-separated edge probabilities")
    w.add_argument("--instances-per-size", type=int, dest="instances_per_size")
    w.add_argument("--encoding", choices=["onehot", "domainwall"])
    w.add_argument("--sampler", choices=["exact", "anneal", "remote"])
    w.add_argument("--remote-url", dest="remote_url")
    w.add_argument("--c-max", type=int, dest="c_max")
    w.add_argument("--r-max", type=int, dest="r_max")
    w.add_argument("--k-paths", type=int, dest="k_paths")
    w.add_argument("--num-reads", type=int, dest="num_reads")
    w.add_argument("--sweeps", type=int)
    w.add_argument("--rate-mode", choices=["fixed", "random"], dest="rate_mode")
    w.add_argument("--fixed-rate", type=int, dest="fixed_rate")
    w.add_argument("--max-embed-vars", type=int, dest="max_embed_vars")
    w.add_argument("--jobs", type=int, default=1)
    w.add_argument("--verbose", action="store_true")
    w.add_argument("--out", default="records.csv")
    w.set_defaults(func=cmd_sweep)

    r = sub.add_parser("report", help="aggregate a records CSV into metric tables")
    r.add_argument("--records", required=True)
    r.add_argument("--out-prefix", default="")
    r.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
