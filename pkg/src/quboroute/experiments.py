"""Experiment harness: instance generators, pipeline runs, sweeps, metrics.

Sweeps are reproducible: every instance and every sampler call draws from an
RNG stream derived from the master seed, the instance's coordinates in the
sweep grid, and its position in the batch. Records serialize to CSV with
exact float round-trips (repr/float).
"""

import csv
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields

import networkx as nx
import numpy as np

from .network import (
    InfeasibleInstanceError,
    NetworkInstance,
    collect_paths,
    make_instance,
)
from .qubo import build_qubo, fix_variables
from .domainwall import build_encoding_map, substitute
from .samplers import (
    STATUS_EMBEDDING_ERROR,
    STATUS_SOLVED,
    DecodeContext,
    EmbeddingModel,
    RemoteSampler,
    SamplerConfig,
    brute_force_route,
    embedding_feasible,
    solve_anneal,
    solve_exact,
)

STATUS_INFEASIBLE = "infeasible"

EXHAUSTIVE_MAX_N = 5
CONNECT_REJECT_LIMIT = 1000


@dataclass(frozen=True)
class GeneratedInstance:
    instance_id: str
    network: NetworkInstance
    edge_prob: float | None


def _connected(n: int, node_ids, edges) -> bool:
    g = nx.Graph()
    g.add_nodes_from(node_ids)
    g.add_edges_from(edges)
    return nx.is_connected(g)


def connected_graph_count(n: int) -> int:
    """Number of labeled connected graphs on n nodes (enumeration, n <= 5)."""
    return sum(1 for _ in _connected_graphs(n))


def _connected_graphs(n: int):
    node_ids = list(range(1, n + 1))
    pairs = list(itertools.combinations(node_ids, 2))
    for mask in range(1 << len(pairs)):
        edges = [pairs[b] for b in range(len(pairs)) if mask >> b & 1]
        if _connected(n, node_ids, edges):
            yield mask, edges


def gen_exhaustive(n: int, seed: int, r_max: int = 5, rate_mode: str = "fixed",
                   fixed_rate: int = 3):
    """Every labeled connected graph on n nodes crossed with every source set.

    Node ids are 1..n with the sink fixed at node n; source sets range over
    all nonempty subsets of the rest. Coordinates are drawn per graph from a
    seed-derived stream (positions are not enumerable). Rates are all
    ``fixed_rate`` by default; ``rate_mode="random"`` draws each uniformly
    from 1..r_max instead.
    """
    if not 2 <= n <= EXHAUSTIVE_MAX_N:
        raise ValueError(f"exhaustive generation supports 2..{EXHAUSTIVE_MAX_N} nodes, got {n}")
    if rate_mode not in ("fixed", "random"):
        raise ValueError(f"unknown rate mode {rate_mode!r}")
    node_ids = list(range(1, n + 1))
    for mask, edges in _connected_graphs(n):
        rng = np.random.default_rng(np.random.SeedSequence((seed, n, mask)))
        coords = rng.uniform(0.0, 100.0, size=(n, 2))
        nodes = [(node_ids[i], (coords[i, 0], coords[i, 1])) for i in range(n)]
        for size in range(1, n):
            for subset in itertools.combinations(node_ids[:-1], size):
                if rate_mode == "fixed":
                    rates = [fixed_rate] * len(subset)
                else:
                    sub_rng = np.random.default_rng(
                        np.random.SeedSequence((seed, n, mask, sum(1 << s for s in subset)))
                    )
                    rates = [int(sub_rng.integers(1, r_max + 1)) for _ in subset]
                streams = list(zip(subset, rates))
                net = make_instance(nodes, edges, n, streams)
                sid = "".join(str(s) for s in subset)
                yield GeneratedInstance(f"ex-n{n}-g{mask}-s{sid}", net, None)


def gen_erdos_renyi(n: int, p: float, count: int, seed: int, r_max: int = 5):
    """G(n, p) instances filtered to connected graphs, sink at node n.

    Source selection is the two-RNG scheme: one uniform draw decides whether
    each non-sink node is a source (u > 0.5), a second draws its integer
    rate from 1..r_max. Draws repeat when no source comes up. Disconnected
    graphs are redrawn, with an error after 1000 consecutive rejections.
    """
    if n < 2:
        raise ValueError(f"need at least 2 nodes, got {n}")
    if not 0.0 < p <= 1.0:
        raise ValueError(f"edge probability must be in (0, 1], got {p}")
    node_ids = list(range(1, n + 1))
    pairs = list(itertools.combinations(node_ids, 2))
    out = []
    for i in range(count):
        rng = np.random.default_rng(
            np.random.SeedSequence((seed, n, int(round(p * 10000)), i))
        )
        coords = rng.uniform(0.0, 100.0, size=(n, 2))
        nodes = [(node_ids[j], (coords[j, 0], coords[j, 1])) for j in range(n)]
        for attempt in range(CONNECT_REJECT_LIMIT + 1):
            edges = [pair for pair in pairs if rng.random() < p]
            if _connected(n, node_ids, edges):
                break
        else:
            raise RuntimeError(
                f"{CONNECT_REJECT_LIMIT} consecutive disconnected draws at n={n}, p={p}"
            )
        while True:
            streams = []
            for v in node_ids[:-1]:
                if rng.random() > 0.5:
                    streams.append((v, int(rng.integers(1, r_max + 1))))
            if streams:
                break
        net = make_instance(nodes, edges, n, streams)
        out.append(GeneratedInstance(f"er-n{n}-p{p:g}-i{i}", net, p))
    return out


@dataclass(frozen=True)
class SweepConfig:
    """Grid and solver settings for one sweep. ``seed`` must be explicit."""

    seed: int
    mode: str = "erdos_renyi"
    sizes: tuple[int, ...] = (4, 5, 6, 7, 8, 9, 10, 11, 12)
    edge_probs: tuple[float, ...] = (0.6, 0.7, 0.9)
    instances_per_size: int = 20
    c_max: int = 5
    r_max: int = 5
    k_paths: int = 2
    encoding: str = "onehot"
    slack_mode: str = "binary"
    sampler: str = "anneal"
    remote_url: str | None = None
    num_reads: int = 10
    sweeps: int = 1000
    rate_mode: str = "fixed"
    fixed_rate: int = 3
    max_embed_vars: int = 26
    max_embed_density: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(self.sizes))
        object.__setattr__(self, "edge_probs", tuple(self.edge_probs))
        if self.mode not in ("erdos_renyi", "exhaustive"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.encoding not in ("onehot", "domainwall"):
            raise ValueError(f"unknown encoding {self.encoding!r}")
        if self.sampler not in ("exact", "anneal", "remote"):
            raise ValueError(f"unknown sampler {self.sampler!r}")
        if self.sampler == "remote" and not self.remote_url:
            raise ValueError("remote sampler needs remote_url")

    def embedding_model(self) -> EmbeddingModel:
        return EmbeddingModel(self.max_embed_vars, self.max_embed_density)


def load_sweep_config(path) -> SweepConfig:
    """Read a sweep config from TOML or JSON, keyed by field name."""
    import json

    text = open(path, "rb").read()
    if str(path).endswith(".toml"):
        try:
            import tomllib as toml
        except ModuleNotFoundError:
            import tomli as toml
        data = toml.loads(text.decode())
    else:
        data = json.loads(text)
    known = {f.name for f in fields(SweepConfig)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown sweep config keys: {sorted(unknown)}")
    if "seed" not in data:
        raise ValueError("sweep config must set a seed")
    return SweepConfig(**data)


@dataclass(frozen=True)
class ExperimentRecord:
    """One pipeline run. ``correct`` means the sampler's best feasible
    objective equals the brute-force optimum exactly."""

    instance_id: str
    graph_size: int
    edge_prob: float | None
    source_count: int
    encoding: str
    qubo_size: int | None
    status: str
    correct: bool
    objective: float | None
    oracle_objective: float | None
    processing_time: float | None
    qpu_time: float | None


def run_pipeline(gi: GeneratedInstance, cfg: SweepConfig, sampler_seed: int = 0) -> ExperimentRecord:
    """Paths -> oracle -> QUBO -> (encode) -> fix -> embed check -> sample -> classify."""
    net = gi.network
    base = dict(
        instance_id=gi.instance_id,
        graph_size=net.n_nodes,
        edge_prob=gi.edge_prob,
        source_count=len(net.streams),
        encoding=cfg.encoding,
    )
    try:
        rt = collect_paths(net, cfg.k_paths)
    except InfeasibleInstanceError:
        return ExperimentRecord(**base, qubo_size=None, status=STATUS_INFEASIBLE,
                                correct=False, objective=None, oracle_objective=None,
                                processing_time=None, qpu_time=None)
    oracle = brute_force_route(net, rt, cfg.c_max)
    if oracle.status == "infeasible":
        return ExperimentRecord(**base, qubo_size=None, status=STATUS_INFEASIBLE,
                                correct=False, objective=None, oracle_objective=None,
                                processing_time=None, qpu_time=None)
    q = build_qubo(net, rt, cfg.c_max, slack_mode=cfg.slack_mode)
    em = None
    if cfg.encoding == "domainwall":
        em = build_encoding_map(q)
        q = substitute(q, em)
    fix = fix_variables(q)
    ctx = DecodeContext(net, rt, cfg.c_max, q, encoding_map=em, fix_report=fix)
    if not embedding_feasible(fix.reduced, cfg.embedding_model()):
        return ExperimentRecord(**base, qubo_size=fix.reduced.n_vars,
                                status=STATUS_EMBEDDING_ERROR, correct=False,
                                objective=None, oracle_objective=oracle.objective,
                                processing_time=None, qpu_time=None)
    if cfg.sampler == "exact":
        outcome = solve_exact(fix.reduced, ctx)
    elif cfg.sampler == "anneal":
        outcome = solve_anneal(
            fix.reduced,
            SamplerConfig(num_reads=cfg.num_reads, sweeps=cfg.sweeps, seed=sampler_seed),
            ctx,
        )
    else:
        outcome = RemoteSampler(cfg.remote_url).solve(fix.reduced, cfg.num_reads, ctx)
    objective = outcome.best_feasible.objective if outcome.best_feasible else None
    correct = outcome.status == STATUS_SOLVED and objective == oracle.objective
    return ExperimentRecord(**base, qubo_size=fix.reduced.n_vars, status=outcome.status,
                            correct=correct, objective=objective,
                            oracle_objective=oracle.objective,
                            processing_time=outcome.processing_time,
                            qpu_time=outcome.reported_qpu_time)


def _instances(cfg: SweepConfig):
    if cfg.mode == "exhaustive":
        for n in cfg.sizes:
            yield from gen_exhaustive(n, cfg.seed, cfg.r_max, cfg.rate_mode, cfg.fixed_rate)
    else:
        for n in cfg.sizes:
            for p in cfg.edge_probs:
                yield from gen_erdos_renyi(n, p, cfg.instances_per_size, cfg.seed, cfg.r_max)


def _pipeline_star(args):
    return run_pipeline(*args)


def sweep(cfg: SweepConfig, jobs: int = 1, progress=None) -> list[ExperimentRecord]:
    """Run the full grid. Deterministic for a given config, even across jobs."""
    tasks = []
    for idx, gi in enumerate(_instances(cfg)):
        seed = int(np.random.SeedSequence((cfg.seed, idx)).generate_state(1)[0])
        tasks.append((gi, cfg, seed))
    records = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for rec in pool.map(_pipeline_star, tasks, chunksize=16):
                records.append(rec)
                if progress:
                    progress(rec)
    else:
        for t in tasks:
            rec = run_pipeline(*t)
            records.append(rec)
            if progress:
                progress(rec)
    return records


RECORD_COLUMNS = [f.name for f in fields(ExperimentRecord)]


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "True" if value else "False"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def records_to_csv(records, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(RECORD_COLUMNS)
        for r in records:
            w.writerow([_cell(getattr(r, c)) for c in RECORD_COLUMNS])


def records_from_csv(path) -> list[ExperimentRecord]:
    out = []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        for row in reader:
            out.append(ExperimentRecord(
                instance_id=row["instance_id"],
                graph_size=int(row["graph_size"]),
                edge_prob=float(row["edge_prob"]) if row["edge_prob"] else None,
                source_count=int(row["source_count"]),
                encoding=row["encoding"],
                qubo_size=int(row["qubo_size"]) if row["qubo_size"] else None,
                status=row["status"],
                correct=row["correct"] == "True",
                objective=float(row["objective"]) if row["objective"] else None,
                oracle_objective=float(row["oracle_objective"]) if row["oracle_objective"] else None,
                processing_time=float(row["processing_time"]) if row["processing_time"] else None,
                qpu_time=float(row["qpu_time"]) if row["qpu_time"] else None,
            ))
    return out


@dataclass(frozen=True)
class CellMetrics:
    """Aggregated rates for one (graph size, edge prob, source count) cell.

    ``source_count`` of None marks rows collapsed over all source counts.
    Rates partition the classified records: correct + incorrect +
    embedding_error == n_classified, always, as integers.
    """

    graph_size: int
    edge_prob: float | None
    source_count: int | None
    n_records: int
    n_infeasible: int
    n_classified: int
    n_correct: int
    n_incorrect: int
    n_embedding_error: int
    correct_rate: float | None
    incorrect_rate: float | None
    embedding_error_rate: float | None
    mean_qubo_size: float | None
    mean_processing_time: float | None


def _make_cell(size, p, sc, recs) -> CellMetrics:
    classified = [r for r in recs if r.status != STATUS_INFEASIBLE]
    n = len(classified)
    correct = sum(1 for r in classified if r.correct)
    embed = sum(1 for r in classified if r.status == STATUS_EMBEDDING_ERROR)
    incorrect = n - correct - embed
    sizes = [r.qubo_size for r in classified if r.qubo_size is not None]
    times = [r.processing_time for r in classified if r.processing_time is not None]
    return CellMetrics(
        graph_size=size, edge_prob=p, source_count=sc,
        n_records=len(recs), n_infeasible=len(recs) - n, n_classified=n,
        n_correct=correct, n_incorrect=incorrect, n_embedding_error=embed,
        correct_rate=correct / n if n else None,
        incorrect_rate=incorrect / n if n else None,
        embedding_error_rate=embed / n if n else None,
        mean_qubo_size=sum(sizes) / len(sizes) if sizes else None,
        mean_processing_time=sum(times) / len(times) if times else None,
    )


def degradation_size(sizes, correct, incorrect, embed) -> int | None:
    """Size one step past where the correct-rate curve is first overtaken.

    Finds the first crossing of the correct-rate curve with either the
    incorrect-rate or embedding-error curve over increasing graph size,
    linearly interpolating between grid points, and returns
    ceil(crossing) + 1. None when no crossing happens on the grid.
    """
    order = np.argsort(sizes)
    s = [sizes[i] for i in order]
    c = [correct[i] for i in order]
    crossings = []
    for other in (np.asarray(incorrect)[order], np.asarray(embed)[order]):
        for i in range(len(s)):
            margin = c[i] - other[i]
            if margin > 0:
                continue
            if i == 0:
                crossings.append(float(s[0]))
                break
            prev = c[i - 1] - other[i - 1]
            if prev <= 0:
                continue
            t = prev / (prev - margin)
            crossings.append(s[i - 1] + t * (s[i] - s[i - 1]))
            break
    if not crossings:
        return None
    return int(math.ceil(min(crossings))) + 1


@dataclass(frozen=True)
class Aggregation:
    cells: tuple[CellMetrics, ...]
    series: tuple[CellMetrics, ...]
    degradation: dict[float | None, int | None]


def aggregate(records) -> Aggregation:
    """Group records into metric cells and per-probability degradation sizes."""
    if not records:
        raise ValueError("no records to aggregate")
    fine: dict[tuple, list] = {}
    coarse: dict[tuple, list] = {}
    for r in records:
        fine.setdefault((r.graph_size, r.edge_prob, r.source_count), []).append(r)
        coarse.setdefault((r.graph_size, r.edge_prob), []).append(r)
    key = lambda t: (t[0], -1.0 if t[1] is None else t[1], t[2] if len(t) > 2 else 0)
    cells = tuple(_make_cell(size, p, sc, fine[(size, p, sc)])
                  for size, p, sc in sorted(fine, key=key))
    series = tuple(_make_cell(size, p, None, coarse[(size, p)])
                   for size, p in sorted(coarse, key=key))
    degradation = {}
    probs = sorted({c.edge_prob for c in series}, key=lambda v: -1.0 if v is None else v)
    for p in probs:
        pts = [c for c in series if c.edge_prob == p and c.n_classified > 0]
        if len(pts) < 1:
            degradation[p] = None
            continue
        degradation[p] = degradation_size(
            [c.graph_size for c in pts],
            [c.correct_rate for c in pts],
            [c.incorrect_rate for c in pts],
            [c.embedding_error_rate for c in pts],
        )
    return Aggregation(cells, series, degradation)


CELL_COLUMNS = [f.name for f in fields(CellMetrics)]


def metrics_to_csv(agg: Aggregation, path) -> None:
    """Fine-grained cells plus collapsed per-size rows, one table."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(CELL_COLUMNS)
        for c in agg.cells + agg.series:
            w.writerow([_cell(getattr(c, col)) for col in CELL_COLUMNS])


def long_format_csv(agg: Aggregation, path) -> None:
    """Plot-ready long format: one (cell, metric, value) row per line."""
    metrics = ["correct_rate", "incorrect_rate", "embedding_error_rate",
               "mean_qubo_size", "mean_processing_time"]
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["graph_size", "edge_prob", "source_count", "metric", "value"])
        for c in agg.cells + agg.series:
            for m in metrics:
                v = getattr(c, m)
                if v is not None:
                    w.writerow([c.graph_size, _cell(c.edge_prob),
                                _cell(c.source_count), m, repr(float(v))])
        for p, d in agg.degradation.items():
            if d is not None:
                w.writerow(["", _cell(p), "", "degradation_size", d])


def degradation_to_csv(agg: Aggregation, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["edge_prob", "degradation_size"])
        for p, d in agg.degradation.items():
            w.writerow([_cell(p), _cell(d)])
