"""Samplers and solution handling: exact enumeration, annealing, remote service.

All samplers return a :class:`SolveOutcome` whose sample energies are
recomputed locally with :func:`quboroute.qubo.qubo_energy`; nothing reported
by a backend is trusted. Decoding back to route assignments goes through a
:class:`DecodeContext`, which also lifts reduced bit vectors over a
:class:`FixReport` when variable fixing ran first.
"""

import itertools
import time
from dataclasses import dataclass, replace

import numpy as np
import requests

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:
    njit = None
    _HAVE_NUMBA = False

from .network import NetworkInstance, RouteTable
from .qubo import (
    FixReport,
    PathVar,
    QuboProblem,
    SlackVar,
    check_capacity,
    objective_energy,
    qubo_energy,
)
from .domainwall import EncodingMap, decode as dw_decode

STATUS_SOLVED = "solved"
STATUS_NO_FEASIBLE = "no_feasible_sample"
STATUS_EMBEDDING_ERROR = "embedding_error"

REASON_ONE_HOT = "one_hot_violation"
REASON_WALL = "wall_violation"
REASON_CAPACITY = "capacity_violation"

# Modeled single-anneal duration of the hardware being stood in for.
ANNEAL_TIME_S = 20e-6

EXACT_MAX_VARS = 30
BRUTE_FORCE_MAX = 10_000_000


@dataclass(frozen=True)
class SamplerConfig:
    """Annealer knobs.

    Temperatures default to the problem's own scale: T_hot = max |coefficient|,
    T_cold = 1e-3 * min nonzero |coefficient|.
    """

    num_reads: int = 10
    sweeps: int = 1000
    t_hot: float | None = None
    t_cold: float | None = None
    seed: int = 0
    anneal_time: float = ANNEAL_TIME_S

    def __post_init__(self):
        if self.num_reads < 1:
            raise ValueError(f"num_reads must be >= 1, got {self.num_reads}")
        if self.sweeps < 1:
            raise ValueError(f"sweeps must be >= 1, got {self.sweeps}")
        if self.t_hot is not None and self.t_cold is not None and not (self.t_hot > self.t_cold > 0):
            raise ValueError("temperature schedule requires t_hot > t_cold > 0")


@dataclass(frozen=True)
class ClassifiedSample:
    """Feasibility verdict for one decoded bit vector."""

    assignment: tuple[int, ...] | None
    feasible: bool
    reason: str | None
    objective: float | None
    loads: dict[int, int] | None


@dataclass(frozen=True)
class Sample:
    bits: tuple[int, ...]
    energy: float
    assignment: tuple[int, ...] | None = None
    feasible: bool = False
    reason: str | None = None
    objective: float | None = None


@dataclass(frozen=True)
class BestFeasible:
    assignment: tuple[int, ...]
    objective: float


@dataclass(frozen=True)
class SolveOutcome:
    samples: tuple[Sample, ...]
    best_feasible: BestFeasible | None
    processing_time: float
    status: str
    reported_qpu_time: float | None = None


def classify_sample(bits, q: QuboProblem, em: EncodingMap | None,
                    net: NetworkInstance, rt: RouteTable, c_max: int) -> ClassifiedSample:
    """Decode one bit vector of problem ``q`` and check every constraint.

    One-hot problems decode stream blocks directly; domain-wall problems
    decode through the encoding map. Slack bits never affect the verdict.
    The objective is evaluated whenever a full assignment decodes, even if
    capacity then fails.
    """
    if em is not None:
        assignment = dw_decode(bits, em)
        bad = any(a is None for a in assignment)
        reason = REASON_WALL if bad else None
    else:
        blocks: dict[int, list[tuple[int, int]]] = {}
        for i, meta in enumerate(q.var_meta):
            if isinstance(meta, PathVar):
                blocks.setdefault(meta.stream, []).append((i, meta.route))
        assignment = []
        for s in sorted(blocks):
            chosen = [r for i, r in blocks[s] if bits[i]]
            assignment.append(chosen[0] if len(chosen) == 1 else None)
        assignment = tuple(assignment)
        bad = any(a is None for a in assignment)
        reason = REASON_ONE_HOT if bad else None
    if bad:
        return ClassifiedSample(None, False, reason, None, None)
    cap = check_capacity(net, rt, assignment, c_max)
    objective = objective_energy(net, rt, assignment)
    if not cap.feasible:
        return ClassifiedSample(assignment, False, REASON_CAPACITY, objective, cap.loads)
    return ClassifiedSample(assignment, True, None, objective, cap.loads)


@dataclass(frozen=True)
class DecodeContext:
    """Everything needed to turn sampled bits back into route assignments."""

    net: NetworkInstance
    rt: RouteTable
    c_max: int
    problem: QuboProblem
    encoding_map: EncodingMap | None = None
    fix_report: FixReport | None = None

    def classify(self, bits) -> ClassifiedSample:
        full = self.fix_report.expand(bits) if self.fix_report is not None else tuple(bits)
        return classify_sample(full, self.problem, self.encoding_map,
                               self.net, self.rt, self.c_max)


def _assemble(q: QuboProblem, bit_rows, elapsed: float,
              ctx: DecodeContext | None, qpu_time: float | None = None) -> SolveOutcome:
    samples = []
    best: BestFeasible | None = None
    for bits in bit_rows:
        bits = tuple(int(b) for b in bits)
        energy = qubo_energy(q, bits)
        if ctx is not None:
            cs = ctx.classify(bits)
            samples.append(Sample(bits, energy, cs.assignment, cs.feasible,
                                  cs.reason, cs.objective))
            if cs.feasible and (best is None or cs.objective < best.objective):
                best = BestFeasible(cs.assignment, cs.objective)
        else:
            samples.append(Sample(bits, energy))
    if ctx is None:
        status = STATUS_SOLVED
    else:
        status = STATUS_SOLVED if best is not None else STATUS_NO_FEASIBLE
    return SolveOutcome(tuple(samples), best, elapsed, status, qpu_time)


def _dense(q: QuboProblem) -> np.ndarray:
    u = np.zeros((q.n_vars, q.n_vars))
    for (i, j), c in q.q.items():
        u[i, j] += c
    return u


def solve_exact(q: QuboProblem, ctx: DecodeContext | None = None,
                top: int = 10) -> SolveOutcome:
    """Enumerate every state and return the ``top`` lowest, ties by state index.

    Ground-truth oracle for small problems; refuses more than 30 variables.
    """
    if q.n_vars > EXACT_MAX_VARS:
        raise ValueError(f"exact enumeration refuses {q.n_vars} > {EXACT_MAX_VARS} variables")
    t0 = time.perf_counter()
    if q.n_vars == 0:
        return _assemble(q, [()], time.perf_counter() - t0, ctx)
    u = _dense(q)
    total = 1 << q.n_vars
    chunk = min(total, 1 << 16)
    shifts = np.arange(q.n_vars, dtype=np.uint64)
    best_e = None
    best_idx = None
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.uint64)
        bits = ((idx[:, None] >> shifts) & 1).astype(np.float64)
        energies = np.einsum("bi,ij,bj->b", bits, u, bits) + q.offset
        if best_e is None:
            best_e, best_idx = energies, idx
        else:
            best_e = np.concatenate([best_e, energies])
            best_idx = np.concatenate([best_idx, idx])
        if len(best_e) > 4 * top:
            order = np.lexsort((best_idx, best_e))[: 2 * top]
            best_e, best_idx = best_e[order], best_idx[order]
    order = np.lexsort((best_idx, best_e))[:top]
    rows = [
        tuple(int((int(best_idx[o]) >> i) & 1) for i in range(q.n_vars))
        for o in order
    ]
    return _assemble(q, rows, time.perf_counter() - t0, ctx)


def _schedule(q: QuboProblem, cfg: SamplerConfig) -> np.ndarray | None:
    mags = [abs(c) for c in q.q.values() if c != 0.0]
    if not mags:
        return None
    t_hot = cfg.t_hot if cfg.t_hot is not None else max(mags)
    t_cold = cfg.t_cold if cfg.t_cold is not None else 1e-3 * min(mags)
    if not t_cold < t_hot:
        t_cold = t_hot * 1e-6
    return np.geomspace(t_hot, t_cold, cfg.sweeps)


def _sweep_chunk_py(coup: np.ndarray, h: np.ndarray, temps: np.ndarray,
                    b: np.ndarray, rand: np.ndarray) -> None:
    """Run one block of sweeps in place; pure-numpy fallback for the kernel.

    Consumes ``rand[s, i, :]`` at every (sweep, variable) step regardless of
    whether the move needs a coin, so the draw pattern matches the compiled
    kernel and results stay deterministic per seed on either backend.
    """
    phi = h + b @ coup
    n = b.shape[1]
    for s, t in enumerate(temps):
        for i in range(n):
            delta = (1.0 - 2.0 * b[:, i]) * phi[:, i]
            accept = (delta <= 0.0) | (rand[s, i] < np.exp(-np.maximum(delta, 0.0) / t))
            flip = np.where(accept, 1.0 - 2.0 * b[:, i], 0.0)
            b[:, i] += flip
            phi += np.outer(flip, coup[i])


def _descend_py(coup: np.ndarray, h: np.ndarray, b: np.ndarray,
                g_idx: np.ndarray, g_off: np.ndarray) -> None:
    """Strictly-improving descent to a local minimum, in place.

    Move set, scanned first-improvement in a fixed order each round:
      1. single flips over every variable;
      2. exact re-minimization of each variable group (a slack register is a
         handful of bits whose conditional optimum is cheap to enumerate);
      3. each non-group single flip combined with the groups' best responses;
      4. each non-group pair flip combined with the groups' best responses.
    Moves 3 and 4 are the ones that matter: swapping a route selector is a
    two-bit move through a penalty wall whose capacity bookkeeping lives in
    slack registers, so the registers must adjust in the same move or the
    swap always looks uphill. No randomness; every accepted move lowers the
    energy, so the loop terminates. Scan order and arithmetic order are part
    of the deterministic recipe and must match the compiled kernel exactly.
    """
    phi = h + b @ coup
    reads, n = b.shape
    n_groups = g_off.shape[0] - 1
    in_group = np.zeros(n, dtype=bool)
    for k in g_idx:
        in_group[k] = True
    free = [i for i in range(n) if not in_group[i]]

    def group_best(g, phi2):
        """Best (delta, local state) per read for group g under fields phi2."""
        lo, hi = int(g_off[g]), int(g_off[g + 1])
        idx = g_idx[lo:hi]
        w = hi - lo
        deltas = np.empty((reads, 1 << w))
        f = np.empty((reads, w))
        for mask in range(1 << w):
            d = np.zeros(reads)
            for a in range(w):
                f[:, a] = float(mask >> a & 1) - b[:, idx[a]]
                d += f[:, a] * phi2[:, idx[a]]
            for a in range(w):
                for c in range(a + 1, w):
                    d += f[:, a] * f[:, c] * coup[idx[a], idx[c]]
            deltas[:, mask] = d
        best = np.argmin(deltas, axis=1)
        return deltas[np.arange(reads), best], best

    def apply_group(g, best_mask, accept):
        lo, hi = int(g_off[g]), int(g_off[g + 1])
        for a in range(hi - lo):
            k = g_idx[lo + a]
            fk = np.where(accept, (best_mask >> a & 1) - b[:, k], 0.0)
            b[:, k] += fk
            phi += np.outer(fk, coup[k])

    improved = True
    while improved:
        improved = False
        for i in range(n):
            delta = (1.0 - 2.0 * b[:, i]) * phi[:, i]
            accept = delta < 0.0
            if accept.any():
                improved = True
                flip = np.where(accept, 1.0 - 2.0 * b[:, i], 0.0)
                b[:, i] += flip
                phi += np.outer(flip, coup[i])
        for g in range(n_groups):
            d, best = group_best(g, phi)
            accept = d < 0.0
            if accept.any():
                improved = True
                apply_group(g, best, accept)
        for i in free:
            fi = 1.0 - 2.0 * b[:, i]
            delta = fi * phi[:, i]
            phi2 = phi + np.outer(fi, coup[i])
            responses = []
            for g in range(n_groups):
                d, best = group_best(g, phi2)
                delta = delta + d
                responses.append(best)
            accept = delta < 0.0
            if accept.any():
                improved = True
                flip = np.where(accept, fi, 0.0)
                b[:, i] += flip
                phi += np.outer(flip, coup[i])
                for g in range(n_groups):
                    apply_group(g, responses[g], accept)
        for ii in range(len(free)):
            for jj in range(ii + 1, len(free)):
                i, j = free[ii], free[jj]
                fi = 1.0 - 2.0 * b[:, i]
                fj = 1.0 - 2.0 * b[:, j]
                delta = fi * phi[:, i] + fj * phi[:, j] + fi * fj * coup[i, j]
                phi2 = phi + np.outer(fi, coup[i]) + np.outer(fj, coup[j])
                responses = []
                for g in range(n_groups):
                    d, best = group_best(g, phi2)
                    delta = delta + d
                    responses.append(best)
                accept = delta < 0.0
                if accept.any():
                    improved = True
                    flip_i = np.where(accept, fi, 0.0)
                    flip_j = np.where(accept, fj, 0.0)
                    b[:, i] += flip_i
                    phi += np.outer(flip_i, coup[i])
                    b[:, j] += flip_j
                    phi += np.outer(flip_j, coup[j])
                    for g in range(n_groups):
                        apply_group(g, responses[g], accept)


if _HAVE_NUMBA:

    @njit(cache=True)
    def _sweep_chunk_jit(coup, h, temps, b, rand):  # pragma: no cover - compiled
        reads, n = b.shape
        phi = b @ coup
        for r in range(reads):
            for j in range(n):
                phi[r, j] += h[j]
        for s in range(temps.shape[0]):
            t = temps[s]
            for i in range(n):
                for r in range(reads):
                    delta = (1.0 - 2.0 * b[r, i]) * phi[r, i]
                    if delta <= 0.0 or rand[s, i, r] < np.exp(-delta / t):
                        flip = 1.0 - 2.0 * b[r, i]
                        b[r, i] += flip
                        for j in range(n):
                            phi[r, j] += flip * coup[i, j]

    @njit(cache=True)
    def _group_scan_jit(coup, phi2, b, g_idx, g_off, g, r, init):  # pragma: no cover - compiled
        lo = g_off[g]
        w = g_off[g + 1] - lo
        best_d = init
        best_mask = -1
        for mask in range(1 << w):
            d = 0.0
            for a in range(w):
                fa = float(mask >> a & 1) - b[r, g_idx[lo + a]]
                d += fa * phi2[g_idx[lo + a]]
            for a in range(w):
                fa = float(mask >> a & 1) - b[r, g_idx[lo + a]]
                for c in range(a + 1, w):
                    fc = float(mask >> c & 1) - b[r, g_idx[lo + c]]
                    d += fa * fc * coup[g_idx[lo + a], g_idx[lo + c]]
            if d < best_d:
                best_d = d
                best_mask = mask
        return best_d, best_mask

    @njit(cache=True)
    def _apply_group_jit(coup, phi, b, g_idx, g_off, g, r, mask):  # pragma: no cover - compiled
        lo = g_off[g]
        for a in range(g_off[g + 1] - lo):
            k = g_idx[lo + a]
            fk = float(mask >> a & 1) - b[r, k]
            b[r, k] += fk
            for m in range(b.shape[1]):
                phi[r, m] += fk * coup[k, m]

    @njit(cache=True)
    def _descend_jit(coup, h, b, g_idx, g_off):  # pragma: no cover - compiled
        reads, n = b.shape
        phi = b @ coup
        for r in range(reads):
            for j in range(n):
                phi[r, j] += h[j]
        n_groups = g_off.shape[0] - 1
        in_group = np.zeros(n, dtype=np.bool_)
        for k in range(g_idx.shape[0]):
            in_group[g_idx[k]] = True
        phi2 = np.empty(n)
        resp = np.empty(max(n_groups, 1), dtype=np.int64)
        improved = True
        while improved:
            improved = False
            for i in range(n):
                for r in range(reads):
                    delta = (1.0 - 2.0 * b[r, i]) * phi[r, i]
                    if delta < 0.0:
                        improved = True
                        flip = 1.0 - 2.0 * b[r, i]
                        b[r, i] += flip
                        for m in range(n):
                            phi[r, m] += flip * coup[i, m]
            for g in range(n_groups):
                for r in range(reads):
                    d, mask = _group_scan_jit(coup, phi[r], b, g_idx, g_off, g, r, 0.0)
                    if mask >= 0:
                        improved = True
                        _apply_group_jit(coup, phi, b, g_idx, g_off, g, r, mask)
            for i in range(n):
                if in_group[i]:
                    continue
                for r in range(reads):
                    fi = 1.0 - 2.0 * b[r, i]
                    delta = fi * phi[r, i]
                    for m in range(n):
                        phi2[m] = phi[r, m] + fi * coup[i, m]
                    for g in range(n_groups):
                        d, mask = _group_scan_jit(coup, phi2, b, g_idx, g_off, g, r, np.inf)
                        delta = delta + d
                        resp[g] = mask
                    if delta < 0.0:
                        improved = True
                        b[r, i] += fi
                        for m in range(n):
                            phi[r, m] += fi * coup[i, m]
                        for g in range(n_groups):
                            _apply_group_jit(coup, phi, b, g_idx, g_off, g, r, resp[g])
            for i in range(n):
                if in_group[i]:
                    continue
                for j in range(i + 1, n):
                    if in_group[j]:
                        continue
                    for r in range(reads):
                        fi = 1.0 - 2.0 * b[r, i]
                        fj = 1.0 - 2.0 * b[r, j]
                        delta = fi * phi[r, i] + fj * phi[r, j] + fi * fj * coup[i, j]
                        for m in range(n):
                            phi2[m] = phi[r, m] + fi * coup[i, m] + fj * coup[j, m]
                        for g in range(n_groups):
                            d, mask = _group_scan_jit(coup, phi2, b, g_idx, g_off, g, r, np.inf)
                            delta = delta + d
                            resp[g] = mask
                        if delta < 0.0:
                            improved = True
                            b[r, i] += fi
                            for m in range(n):
                                phi[r, m] += fi * coup[i, m]
                            b[r, j] += fj
                            for m in range(n):
                                phi[r, m] += fj * coup[j, m]
                            for g in range(n_groups):
                                _apply_group_jit(coup, phi, b, g_idx, g_off, g, r, resp[g])

    _sweep_chunk = _sweep_chunk_jit
    _descend = _descend_jit
else:
    _sweep_chunk = _sweep_chunk_py
    _descend = _descend_py

_RAND_CHUNK = 4_000_000  # max random doubles materialised per kernel call
_GROUP_MAX_BITS = 12  # group re-minimization enumerates 2**w local states


def _slack_groups(q: QuboProblem) -> tuple[np.ndarray, np.ndarray]:
    """Flat (indices, offsets) arrays of the slack register variable groups."""
    by_edge: dict[int, list[int]] = {}
    for i, meta in enumerate(q.var_meta):
        if isinstance(meta, SlackVar):
            by_edge.setdefault(meta.edge, []).append(i)
    groups = [sorted(v) for _, v in sorted(by_edge.items())
              if len(v) <= _GROUP_MAX_BITS]
    g_idx = np.array([i for g in groups for i in g], dtype=np.int64)
    g_off = np.zeros(len(groups) + 1, dtype=np.int64)
    for t, g in enumerate(groups):
        g_off[t + 1] = g_off[t] + len(g)
    return g_idx, g_off


def solve_anneal(q: QuboProblem, cfg: SamplerConfig = SamplerConfig(),
                 ctx: DecodeContext | None = None) -> SolveOutcome:
    """Metropolis single-flip annealing with a geometric schedule, then greedy
    descent, returning the final state of each read.

    Reads run in lockstep as rows of one matrix and all randomness is drawn
    up front from one generator, so outcomes depend only on (problem, config,
    seed). Sweeps run in fixed-size blocks to bound the random buffer; the
    per-read state restarts each block from the bits, not the cached fields,
    so the block size is part of the deterministic recipe. The descent treats
    each slack register (found via variable metadata) as a group re-minimized
    exactly alongside candidate flips; without that, a route swap that shifts
    load between capacity registers is never downhill in single flips.
    Reported QPU time models ``num_reads`` anneals of ``cfg.anneal_time``.
    """
    t0 = time.perf_counter()
    qpu = cfg.num_reads * cfg.anneal_time
    if q.n_vars == 0:
        rows = [()] * cfg.num_reads
        return _assemble(q, rows, time.perf_counter() - t0, ctx, qpu)
    rng = np.random.default_rng(cfg.seed)
    n, reads = q.n_vars, cfg.num_reads
    b = rng.integers(0, 2, size=(reads, n)).astype(np.float64)
    temps = _schedule(q, cfg)
    if temps is not None:
        coup = np.zeros((n, n))
        h = np.zeros(n)
        for (i, j), c in q.q.items():
            if i == j:
                h[i] += c
            else:
                coup[i, j] += c
                coup[j, i] += c
        step = max(1, _RAND_CHUNK // (n * reads))
        for lo in range(0, cfg.sweeps, step):
            block = temps[lo:lo + step]
            rand = rng.random((block.shape[0], n, reads))
            _sweep_chunk(coup, h, block, b, rand)
        g_idx, g_off = _slack_groups(q)
        _descend(coup, h, b, g_idx, g_off)
    rows = b.astype(np.int64)
    return _assemble(q, rows, time.perf_counter() - t0, ctx, qpu)


@dataclass(frozen=True)
class OracleResult:
    status: str  # "solved" or "infeasible"
    assignment: tuple[int, ...] | None
    objective: float | None
    n_combinations: int


def brute_force_route(net: NetworkInstance, rt: RouteTable, c_max: int) -> OracleResult:
    """Try every route combination; the reference optimum for all samplers.

    Ties on the objective resolve to the lexicographically first assignment.
    Refuses more than ten million combinations.
    """
    counts = [rt.options(s) for s in range(rt.n_streams)]
    total = 1
    for c in counts:
        total *= c
    if total > BRUTE_FORCE_MAX:
        raise ValueError(f"{total} combinations exceed the brute-force bound")
    best = None
    best_asg = None
    for assignment in itertools.product(*(range(c) for c in counts)):
        if not check_capacity(net, rt, assignment, c_max).feasible:
            continue
        obj = objective_energy(net, rt, assignment)
        if best is None or obj < best:
            best, best_asg = obj, assignment
    if best is None:
        return OracleResult("infeasible", None, None, total)
    return OracleResult("solved", best_asg, best, total)


@dataclass(frozen=True)
class EmbeddingModel:
    """Size/density proxy for whether hardware could embed a problem."""

    max_vars: int = 26
    max_density: float = 1.0


DEFAULT_EMBEDDING = EmbeddingModel()


def embedding_feasible(q: QuboProblem, model: EmbeddingModel = DEFAULT_EMBEDDING) -> bool:
    if q.n_vars > model.max_vars:
        return False
    if q.n_vars >= 2:
        density = q.n_couplers() / (q.n_vars * (q.n_vars - 1) / 2)
        if density > model.max_density:
            return False
    return True


def problem_to_request(q: QuboProblem, num_reads: int) -> dict:
    """Wire form sent to a remote sampler service."""
    return {
        "entries": [[i, j, c] for (i, j), c in sorted(q.q.items())],
        "n_vars": q.n_vars,
        "num_reads": num_reads,
    }


def problem_from_request(d: dict) -> QuboProblem:
    q = {(int(i), int(j)): float(c) for i, j, c in d["entries"]}
    return QuboProblem(int(d["n_vars"]), q, 0.0)


def loopback_handle(request: dict, cfg: SamplerConfig | None = None) -> dict:
    """Reference service endpoint: anneal locally, answer in wire form.

    Offsets never travel over the wire, so reported energies are relative
    to zero offset; clients recompute against their own problem anyway.
    """
    q = problem_from_request(request)
    base = cfg or SamplerConfig()
    cfg = replace(base, num_reads=int(request["num_reads"]))
    t0 = time.perf_counter()
    outcome = solve_anneal(q, cfg)
    elapsed_us = (time.perf_counter() - t0) * 1e6
    return {
        "samples": [{"bits": list(s.bits), "energy": s.energy} for s in outcome.samples],
        "timing": {"sampling_time_us": elapsed_us},
    }


class RemoteSampler:
    """HTTP client for a sampler service speaking the wire format.

    POSTs the problem as JSON and rebuilds a SolveOutcome locally; energies
    in the response are discarded in favor of local recomputation.
    """

    def __init__(self, url: str, timeout: float = 30.0, session=None):
        self.url = url
        self.timeout = timeout
        self.session = session or requests.Session()

    def solve(self, q: QuboProblem, num_reads: int = 10,
              ctx: DecodeContext | None = None) -> SolveOutcome:
        t0 = time.perf_counter()
        resp = self.session.post(self.url, json=problem_to_request(q, num_reads),
                                 timeout=self.timeout)
        resp.raise_for_status()
        body = resp.json()
        try:
            rows = [[int(b) for b in s["bits"]] for s in body["samples"]]
            reported_us = float(body["timing"]["sampling_time_us"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed sampler response: {exc}") from exc
        for row in rows:
            if len(row) != q.n_vars:
                raise ValueError("sampler returned a bit vector of the wrong width")
        elapsed = time.perf_counter() - t0
        return _assemble(q, rows, elapsed, ctx, reported_us * 1e-6)
