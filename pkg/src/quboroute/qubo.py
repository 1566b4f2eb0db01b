"""QUBO compilation of route selection: objective, one-hot and capacity penalties.

Variables are ordered path selectors first (stream-major, canonical route
order), then slack register bits for each congestible edge in ascending edge
id order. Coefficients live in an upper-triangular map {(i, j): c} with
i <= j; diagonal entries are the linear terms. A constant ``offset`` makes
QUBO energies comparable to route objectives plus penalty constants.
"""

import json
import math
from dataclasses import dataclass

from .network import (
    DEFAULT_ENERGY,
    EnergyParams,
    InfeasibleInstanceError,
    NetworkInstance,
    RouteTable,
    edge_energy_per_bit,
)


@dataclass(frozen=True)
class PathVar:
    """Selector variable: stream ``stream`` takes its ``route``-th candidate."""

    stream: int
    route: int


@dataclass(frozen=True)
class SlackVar:
    """Slack register bit for a congestible edge.

    ``weight`` is the bit's contribution to the slack value (a power of two
    for binary registers, 1..C_max for unary ones).
    """

    edge: int
    bit: int
    weight: int


@dataclass(frozen=True)
class WallVar:
    """Domain-wall boundary variable ``pos`` for a stream's route choice."""

    stream: int
    pos: int


@dataclass(frozen=True)
class Penalties:
    lambda1: float
    lambda2: float
    lambda_dw: float | None = None


@dataclass
class QuboProblem:
    """An upper-triangular QUBO with variable metadata.

    Treat instances as read-only; builders return fresh objects. Zero
    coefficients are never stored.
    """

    n_vars: int
    q: dict[tuple[int, int], float]
    offset: float
    var_meta: tuple = ()
    penalties: Penalties | None = None

    def energy(self, bits) -> float:
        return qubo_energy(self, bits)

    def path_blocks(self) -> list[list[int]]:
        """Per-stream lists of path-variable ids, in route order."""
        blocks: dict[int, list[int]] = {}
        for i, meta in enumerate(self.var_meta):
            if isinstance(meta, PathVar):
                blocks.setdefault(meta.stream, []).append(i)
        return [blocks[s] for s in sorted(blocks)]

    def n_couplers(self) -> int:
        return sum(1 for i, j in self.q if i != j)


class _Acc:
    """Upper-triangular coefficient accumulator."""

    def __init__(self):
        self.q: dict[tuple[int, int], float] = {}
        self.offset = 0.0

    def add(self, i: int, j: int, c: float) -> None:
        if i > j:
            i, j = j, i
        self.q[(i, j)] = self.q.get((i, j), 0.0) + c

    def finish(self) -> dict[tuple[int, int], float]:
        return {k: v for k, v in self.q.items() if v != 0.0}


def route_costs(net: NetworkInstance, rt: RouteTable,
                params: EnergyParams = DEFAULT_ENERGY) -> list[list[float]]:
    """Objective cost of each (stream, route): energy for one interval."""
    costs = []
    for s, routes in enumerate(rt.routes):
        rate = net.streams[s].rate
        row = []
        for route in routes:
            c = 0.0
            for eid in route.edges:
                c += edge_energy_per_bit(net.edges[eid].length, params) * (rate * net.delta_t)
            row.append(c)
        costs.append(row)
    return costs


def objective_energy(net: NetworkInstance, rt: RouteTable, assignment,
                     params: EnergyParams = DEFAULT_ENERGY) -> float:
    """Total radio energy of an assignment (route index per stream).

    Sums edge by edge: per-bit hop cost times the edge's total load times the
    interval length. This is the single objective evaluator; samplers and
    oracles both report objectives through it so comparisons are exact.
    """
    if len(assignment) != rt.n_streams:
        raise ValueError("assignment length does not match stream count")
    total = 0.0
    for eid in sorted(rt.edge_index):
        load = 0
        for s, r in rt.edge_index[eid]:
            if assignment[s] == r:
                load += net.streams[s].rate
        if load:
            cost = edge_energy_per_bit(net.edges[eid].length, params)
            total += cost * (load * net.delta_t)
    return total


@dataclass(frozen=True)
class CapacityReport:
    loads: dict[int, int]
    feasible: bool


def check_capacity(net: NetworkInstance, rt: RouteTable, assignment,
                   c_max: int) -> CapacityReport:
    """Per-edge loads of an assignment and whether all fit under ``c_max``."""
    if len(assignment) != rt.n_streams:
        raise ValueError("assignment length does not match stream count")
    loads: dict[int, int] = {}
    for eid, users in rt.edge_index.items():
        load = sum(net.streams[s].rate for s, r in users if assignment[s] == r)
        if load:
            loads[eid] = load
    return CapacityReport(loads, all(v <= c_max for v in loads.values()))


def default_penalties(net: NetworkInstance, rt: RouteTable, c_max: int,
                      params: EnergyParams = DEFAULT_ENERGY) -> Penalties:
    """Penalty weights that provably dominate the objective.

    lambda2 = 2 * (gap + maxcost), where gap sums each stream's route-cost
    spread (the objective is a sum of independent per-stream terms, so gap
    bounds the feasible objective range) and maxcost is the largest single
    route cost. Dropping a stream from its one-hot constraint then always
    costs more than it could save. lambda1 scales lambda2 by the smallest
    single-variable load step so capacity violations dominate too.
    """
    costs = route_costs(net, rt, params)
    gap = sum(max(row) - min(row) for row in costs if row)
    maxcost = max(max(row) for row in costs if row)
    lambda2 = 2.0 * (gap + maxcost)
    min_rate = min(s.rate for s in net.streams)
    lambda1 = max(lambda2 / min_rate, lambda2 / 2.0)
    # the wall penalty needs the assembled polynomial; substitute derives it
    return Penalties(lambda1, lambda2)


def slack_weights(c_max: int, mode: str = "binary") -> list[int]:
    """Bit weights of a slack register able to represent 0..c_max."""
    if c_max < 1:
        raise ValueError(f"c_max must be >= 1, got {c_max}")
    if mode == "binary":
        return [2 ** k for k in range(max(1, math.ceil(math.log2(c_max + 1))))]
    if mode == "unary":
        return list(range(1, c_max + 1))
    raise ValueError(f"unknown slack mode {mode!r}")


def congestible_edges(net: NetworkInstance, rt: RouteTable, c_max: int) -> list[int]:
    """Edges whose worst-case load exceeds c_max and so need a penalty.

    Worst case counts every stream that has at least one candidate route
    over the edge. Edges below the bound can never violate capacity, so
    penalizing them would only add dead variables.
    """
    out = []
    for eid, users in rt.edge_index.items():
        worst = sum(net.streams[s].rate for s in {s for s, _ in users})
        if worst > c_max:
            out.append(eid)
    return sorted(out)


def build_qubo(net: NetworkInstance, rt: RouteTable, c_max: int,
               lambda1: float | None = None, lambda2: float | None = None,
               slack_mode: str = "binary",
               params: EnergyParams = DEFAULT_ENERGY) -> QuboProblem:
    """Compile the route-selection problem into a one-hot QUBO.

    Terms, all exact expansions of penalty squares:
      * objective: each edge's per-bit cost times rate*delta_t lands on the
        diagonal of every path variable whose route uses the edge;
      * one-hot per stream: lambda2 * (sum_k x_k - 1)^2, i.e. -lambda2
        diagonals, +2*lambda2 in-stream pairs, +lambda2 offset per stream;
      * capacity per congestible edge: lambda1 * (load + slack - c_max)^2
        over contributions c_a in {rates, slack weights}: diagonal
        lambda1 * (c_a^2 - 2*c_max*c_a), pairs 2*lambda1*c_a*c_b, offset
        lambda1 * c_max^2.

    Raises InfeasibleInstanceError when a single stream's rate already
    exceeds c_max (no assignment can be feasible).
    """
    if c_max < 1:
        raise ValueError(f"c_max must be >= 1, got {c_max}")
    if not net.streams:
        raise InfeasibleInstanceError("instance has no streams")
    for s in net.streams:
        if s.rate > c_max:
            raise InfeasibleInstanceError(
                f"stream at node {s.source} has rate {s.rate} > capacity {c_max}"
            )
    if lambda1 is None or lambda2 is None:
        d = default_penalties(net, rt, c_max, params)
        lambda1 = d.lambda1 if lambda1 is None else lambda1
        lambda2 = d.lambda2 if lambda2 is None else lambda2

    meta: list = [PathVar(s, r) for s, rs in enumerate(rt.routes) for r in range(len(rs))]
    slack_ids: dict[int, list[tuple[int, int]]] = {}
    weights = slack_weights(c_max, slack_mode)
    for eid in congestible_edges(net, rt, c_max):
        ids = []
        for b, w in enumerate(weights):
            ids.append((len(meta), w))
            meta.append(SlackVar(eid, b, w))
        slack_ids[eid] = ids

    acc = _Acc()
    # Objective: edge-major, matching objective_energy's summation.
    for eid in sorted(rt.edge_index):
        cost = edge_energy_per_bit(net.edges[eid].length, params)
        for s, r in rt.edge_index[eid]:
            i = rt.path_id(s, r)
            acc.add(i, i, cost * (net.streams[s].rate * net.delta_t))
    # One-hot per stream.
    for s in range(rt.n_streams):
        block = [rt.path_id(s, r) for r in range(rt.options(s))]
        for i in block:
            acc.add(i, i, -lambda2)
        for a in range(len(block)):
            for b in range(a + 1, len(block)):
                acc.add(block[a], block[b], 2.0 * lambda2)
        acc.offset += lambda2
    # Capacity per congestible edge.
    for eid, ids in slack_ids.items():
        members = [(rt.path_id(s, r), float(net.streams[s].rate)) for s, r in rt.edge_index[eid]]
        members += [(vid, float(w)) for vid, w in ids]
        for a, (i, ca) in enumerate(members):
            acc.add(i, i, lambda1 * (ca * ca - 2.0 * c_max * ca))
            for j, cb in members[a + 1:]:
                acc.add(i, j, 2.0 * lambda1 * ca * cb)
        acc.offset += lambda1 * float(c_max) ** 2

    return QuboProblem(len(meta), acc.finish(), acc.offset, tuple(meta),
                       Penalties(lambda1, lambda2))


def qubo_energy(q: QuboProblem, bits) -> float:
    """Evaluate offset + sum of Q[i, j] * b_i * b_j over stored entries."""
    if len(bits) != q.n_vars:
        raise ValueError(f"expected {q.n_vars} bits, got {len(bits)}")
    total = q.offset
    for (i, j), c in q.q.items():
        if bits[i] and bits[j]:
            total += c
    return total


@dataclass(frozen=True)
class FixReport:
    """Result of first-order variable fixing.

    ``fixed`` maps original variable ids to their forced values; ``kept``
    lists the surviving original ids in order (new id = position). For any
    completion of the kept variables,
    original_energy == reduced_energy + offset_delta.
    """

    fixed: dict[int, int]
    kept: tuple[int, ...]
    reduced: QuboProblem
    offset_delta: float

    def expand(self, bits) -> tuple[int, ...]:
        """Lift reduced-problem bits back to the original variable order."""
        if len(bits) != len(self.kept):
            raise ValueError(f"expected {len(self.kept)} bits, got {len(bits)}")
        full = [0] * (len(self.fixed) + len(self.kept))
        for i, v in self.fixed.items():
            full[i] = v
        for pos, i in enumerate(self.kept):
            full[i] = int(bits[pos])
        return tuple(full)


def fix_variables(q: QuboProblem) -> FixReport:
    """Fix variables whose optimal value follows from coefficient dominance.

    A variable with linear term h and couplings {c_j} is fixed to 0 when
    h + sum(min(c_j, 0)) >= 0 (activating it never helps) and to 1 when
    h + sum(max(c_j, 0)) <= 0 (activating it never hurts). Fixing to 1
    absorbs its couplings into neighbors' linear terms and its linear term
    into ``offset_delta``; passes repeat until no variable moves. At least
    one optimum of the original problem survives in the reduced one.
    """
    lin = [0.0] * q.n_vars
    adj: list[dict[int, float]] = [dict() for _ in range(q.n_vars)]
    for (i, j), c in q.q.items():
        if i == j:
            lin[i] += c
        else:
            adj[i][j] = adj[i].get(j, 0.0) + c
            adj[j][i] = adj[j].get(i, 0.0) + c

    active = set(range(q.n_vars))
    fixed: dict[int, int] = {}
    offset_delta = 0.0
    changed = True
    while changed:
        changed = False
        for i in sorted(active):
            neg = sum(c for c in adj[i].values() if c < 0)
            pos = sum(c for c in adj[i].values() if c > 0)
            if lin[i] + neg >= 0.0:
                value = 0
            elif lin[i] + pos <= 0.0:
                value = 1
            else:
                continue
            fixed[i] = value
            if value == 1:
                offset_delta += lin[i]
                for j, c in adj[i].items():
                    lin[j] += c
            for j in adj[i]:
                del adj[j][i]
            adj[i] = {}
            active.discard(i)
            changed = True

    kept = tuple(sorted(active))
    index = {i: pos for pos, i in enumerate(kept)}
    new_q: dict[tuple[int, int], float] = {}
    for pos, i in enumerate(kept):
        if lin[i] != 0.0:
            new_q[(pos, pos)] = lin[i]
    for (i, j), c in q.q.items():
        if i != j and i in index and j in index:
            a, b = index[i], index[j]
            if a > b:
                a, b = b, a
            new_q[(a, b)] = new_q.get((a, b), 0.0) + c
    new_q = {k: v for k, v in new_q.items() if v != 0.0}
    meta = tuple(q.var_meta[i] for i in kept) if q.var_meta else ()
    reduced = QuboProblem(len(kept), new_q, q.offset, meta, q.penalties)
    return FixReport(fixed, kept, reduced, offset_delta)


def _meta_to_dict(m) -> dict:
    if isinstance(m, PathVar):
        return {"kind": "path", "stream": m.stream, "route": m.route}
    if isinstance(m, SlackVar):
        return {"kind": "slack", "edge": m.edge, "bit": m.bit, "weight": m.weight}
    if isinstance(m, WallVar):
        return {"kind": "wall", "stream": m.stream, "pos": m.pos}
    raise TypeError(f"unknown variable metadata {m!r}")


def _meta_from_dict(d: dict):
    kind = d.get("kind")
    if kind == "path":
        return PathVar(d["stream"], d["route"])
    if kind == "slack":
        return SlackVar(d["edge"], d["bit"], d["weight"])
    if kind == "wall":
        return WallVar(d["stream"], d["pos"])
    raise ValueError(f"unknown variable kind {kind!r}")


def qubo_to_dict(q: QuboProblem) -> dict:
    d = {
        "n_vars": q.n_vars,
        "offset": q.offset,
        "entries": [[i, j, c] for (i, j), c in sorted(q.q.items())],
        "var_meta": [_meta_to_dict(m) for m in q.var_meta],
    }
    if q.penalties is not None:
        d["penalties"] = {
            "lambda1": q.penalties.lambda1,
            "lambda2": q.penalties.lambda2,
            "lambda_dw": q.penalties.lambda_dw,
        }
    return d


def qubo_from_dict(d: dict) -> QuboProblem:
    pen = None
    if d.get("penalties"):
        p = d["penalties"]
        pen = Penalties(p["lambda1"], p["lambda2"], p.get("lambda_dw"))
    q = {(int(i), int(j)): float(c) for i, j, c in d["entries"]}
    for (i, j) in q:
        if not (0 <= i <= j < d["n_vars"]):
            raise ValueError(f"entry ({i}, {j}) outside upper triangle of {d['n_vars']} vars")
    return QuboProblem(
        int(d["n_vars"]), q, float(d["offset"]),
        tuple(_meta_from_dict(m) for m in d.get("var_meta", [])), pen,
    )


def save_qubo(q: QuboProblem, path) -> None:
    with open(path, "w") as f:
        json.dump(qubo_to_dict(q), f, indent=2)
        f.write("\n")


def load_qubo(path) -> QuboProblem:
    with open(path) as f:
        return qubo_from_dict(json.load(f))


def qubo_to_triples(q: QuboProblem) -> str:
    """Plain-text one-triple-per-line form: ``i j coefficient``.

    The offset travels as a comment line so round-trips preserve energies.
    """
    lines = [f"# n_vars {q.n_vars}", f"# offset {q.offset!r}"]
    lines += [f"{i} {j} {c!r}" for (i, j), c in sorted(q.q.items())]
    return "\n".join(lines) + "\n"


def qubo_from_triples(text: str) -> QuboProblem:
    n_vars = 0
    offset = 0.0
    entries: dict[tuple[int, int], float] = {}
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if len(parts) == 2 and parts[0] == "n_vars":
                n_vars = int(parts[1])
            elif len(parts) == 2 and parts[0] == "offset":
                offset = float(parts[1])
            continue
        i_s, j_s, c_s = line.split()
        i, j = int(i_s), int(j_s)
        if i > j:
            i, j = j, i
        entries[(i, j)] = entries.get((i, j), 0.0) + float(c_s)
        n_vars = max(n_vars, j + 1)
    return QuboProblem(n_vars, {k: v for k, v in entries.items() if v != 0.0}, offset)
