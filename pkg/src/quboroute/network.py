"""Network model: sensor field geometry, traffic streams, radio energy, candidate routes.

A :class:`NetworkInstance` is an undirected geometric graph with one sink node
and a set of traffic streams (source node, integer data rate). Candidate
routes per stream are collected in canonical order (hop count, then total
length, then lexicographic node sequence) into a :class:`RouteTable`, which is
the input to the QUBO builder.
"""

import json
import math
from dataclasses import dataclass, field

import networkx as nx


class InstanceError(ValueError):
    """A network instance failed validation."""


class InfeasibleInstanceError(InstanceError):
    """No feasible routing can exist for the instance."""


# First-order radio model defaults, in J/bit, J/bit/m^2 and J/bit/m^4.
E_ELEC = 50e-9
EPS_FS = 10e-12
EPS_MP = 0.0013e-12

# Relative tolerance for edge lengths against node coordinates.
LENGTH_RTOL = 1e-9


@dataclass(frozen=True)
class EnergyParams:
    """Radio energy constants for the first-order model.

    Attributes:
        e_elec: electronics energy per bit, spent once on transmit and once
            on receive.
        eps_fs: free-space amplifier coefficient (d^2 regime).
        eps_mp: multipath amplifier coefficient (d^4 regime).
    """

    e_elec: float = E_ELEC
    eps_fs: float = EPS_FS
    eps_mp: float = EPS_MP

    @property
    def d0(self) -> float:
        """Crossover distance between the free-space and multipath regimes."""
        return math.sqrt(self.eps_fs / self.eps_mp)


DEFAULT_ENERGY = EnergyParams()


def tx_energy(n_bits: float, dist: float, params: EnergyParams = DEFAULT_ENERGY) -> float:
    """Energy to transmit ``n_bits`` over distance ``dist`` meters.

    Uses the free-space amplifier below the crossover distance and the
    multipath amplifier at or above it.
    """
    if n_bits < 0:
        raise ValueError(f"bit count must be >= 0, got {n_bits}")
    if dist < 0:
        raise ValueError(f"distance must be >= 0, got {dist}")
    if dist < params.d0:
        return n_bits * params.e_elec + n_bits * params.eps_fs * dist ** 2
    return n_bits * params.e_elec + n_bits * params.eps_mp * dist ** 4


def rx_energy(n_bits: float, params: EnergyParams = DEFAULT_ENERGY) -> float:
    """Energy to receive ``n_bits``."""
    if n_bits < 0:
        raise ValueError(f"bit count must be >= 0, got {n_bits}")
    return n_bits * params.e_elec


def edge_energy_per_bit(dist: float, params: EnergyParams = DEFAULT_ENERGY) -> float:
    """Energy cost of moving one bit across one hop of length ``dist``.

    One transmit plus one receive; the receive side is charged even when the
    receiver is the sink, which only shifts every route cost by a constant.
    """
    return tx_energy(1.0, dist, params) + rx_energy(1.0, params)


@dataclass(frozen=True)
class Node:
    """Graph node with optional planar position."""

    id: int
    pos: tuple[float, float] | None = None


@dataclass(frozen=True)
class Edge:
    """Undirected edge with a fixed length in meters."""

    u: int
    v: int
    length: float

    def key(self) -> tuple[int, int]:
        """Endpoint pair normalized so the smaller id comes first."""
        return (self.u, self.v) if self.u <= self.v else (self.v, self.u)


@dataclass(frozen=True)
class TrafficStream:
    """A data stream from a source node toward the sink.

    Rates are integral: capacity arithmetic (loads, slack registers) relies
    on integer-valued edge loads.
    """

    source: int
    rate: int


@dataclass(frozen=True)
class NetworkInstance:
    """Validated routing problem instance.

    Invariants enforced at construction: unique node ids, edges reference
    existing nodes with no self-loops or duplicates, edge lengths agree with
    node coordinates where both endpoints are positioned, the graph is
    connected, every stream has a positive integer rate and a source that is
    a non-sink node, and delta_t is positive.
    """

    nodes: tuple[Node, ...]
    edges: tuple[Edge, ...]
    sink: int
    streams: tuple[TrafficStream, ...]
    delta_t: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", tuple(self.edges))
        object.__setattr__(self, "streams", tuple(self.streams))
        ids = [n.id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise InstanceError("duplicate node ids")
        if not ids:
            raise InstanceError("instance has no nodes")
        id_set = set(ids)
        if self.sink not in id_set:
            raise InstanceError(f"sink {self.sink} is not a node")
        pos = {n.id: n.pos for n in self.nodes}
        seen = set()
        for e in self.edges:
            if e.u == e.v:
                raise InstanceError(f"self-loop at node {e.u}")
            if e.u not in id_set or e.v not in id_set:
                raise InstanceError(f"edge ({e.u}, {e.v}) references unknown node")
            k = e.key()
            if k in seen:
                raise InstanceError(f"duplicate edge {k}")
            seen.add(k)
            if e.length < 0:
                raise InstanceError(f"edge {k} has negative length")
            pu, pv = pos[e.u], pos[e.v]
            if pu is not None and pv is not None:
                d = math.dist(pu, pv)
                if abs(e.length - d) > LENGTH_RTOL * max(1.0, abs(d)):
                    raise InstanceError(
                        f"edge {k} length {e.length} disagrees with coordinates ({d})"
                    )
        if not nx.is_connected(self.graph()):
            raise InstanceError("graph is not connected")
        for s in self.streams:
            if s.source not in id_set:
                raise InstanceError(f"stream source {s.source} is not a node")
            if s.source == self.sink:
                raise InstanceError("stream source equals the sink")
            if not isinstance(s.rate, int) or s.rate < 1:
                raise InstanceError(f"stream rate must be a positive integer, got {s.rate!r}")
        if not self.delta_t > 0:
            raise InstanceError(f"delta_t must be > 0, got {self.delta_t}")

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def graph(self) -> nx.Graph:
        """The instance as a networkx Graph; edges carry length and edge id."""
        g = nx.Graph()
        g.add_nodes_from(n.id for n in self.nodes)
        for i, e in enumerate(self.edges):
            g.add_edge(e.u, e.v, length=e.length, eid=i)
        return g

    def edge_id(self, u: int, v: int) -> int:
        k = (u, v) if u <= v else (v, u)
        for i, e in enumerate(self.edges):
            if e.key() == k:
                return i
        raise KeyError(f"no edge {k}")


def make_instance(nodes, edges, sink, streams, delta_t=1.0) -> NetworkInstance:
    """Build a NetworkInstance from loose tuples, deriving missing lengths.

    Args:
        nodes: iterable of (id, (x, y)) or (id, None).
        edges: iterable of (u, v) or (u, v, length). Length is derived from
            coordinates when omitted; omitting it without both endpoint
            positions is an error.
        sink: sink node id.
        streams: iterable of (source, rate).
        delta_t: scheduling interval length.
    """
    node_objs = tuple(Node(i, tuple(p) if p is not None else None) for i, p in nodes)
    pos = {n.id: n.pos for n in node_objs}
    edge_objs = []
    for spec in edges:
        if len(spec) == 3:
            u, v, length = spec
        else:
            u, v = spec
            pu, pv = pos.get(u), pos.get(v)
            if pu is None or pv is None:
                raise InstanceError(f"edge ({u}, {v}) lacks a length and an endpoint position")
            length = math.dist(pu, pv)
        edge_objs.append(Edge(u, v, float(length)))
    stream_objs = tuple(TrafficStream(s, r) for s, r in streams)
    return NetworkInstance(node_objs, tuple(edge_objs), sink, stream_objs, delta_t)


@dataclass(frozen=True)
class Route:
    """One candidate route: node sequence and the edge ids it traverses."""

    nodes: tuple[int, ...]
    edges: tuple[int, ...]
    length: float

    @property
    def hops(self) -> int:
        return len(self.edges)


@dataclass(frozen=True)
class RouteTable:
    """Candidate routes per stream plus edge incidence lookups.

    Attributes:
        routes: routes[s] holds stream s's candidates in canonical order.
        k_max: the requested per-stream route budget.
        edge_index: edge id -> ((stream, route), ...) for every route that
            traverses the edge, in (stream, route) order.
        edge_endpoints: edge id -> normalized (u, v) endpoint pair, for every
            edge any route uses.
    """

    routes: tuple[tuple[Route, ...], ...]
    k_max: int
    edge_index: dict[int, tuple[tuple[int, int], ...]] = field(repr=False)
    edge_endpoints: dict[int, tuple[int, int]] = field(repr=False)

    @property
    def n_streams(self) -> int:
        return len(self.routes)

    @property
    def n_paths(self) -> int:
        return sum(len(r) for r in self.routes)

    def options(self, stream: int) -> int:
        return len(self.routes[stream])

    def path_id(self, stream: int, route: int) -> int:
        """Global path id: streams concatenated in order."""
        if not 0 <= route < len(self.routes[stream]):
            raise IndexError(f"stream {stream} has no route {route}")
        return sum(len(self.routes[t]) for t in range(stream)) + route

    def path_of(self, pid: int) -> tuple[int, int]:
        """Inverse of path_id."""
        for s, rs in enumerate(self.routes):
            if pid < len(rs):
                return s, pid
            pid -= len(rs)
        raise IndexError("path id out of range")


def collect_paths(net: NetworkInstance, k: int) -> RouteTable:
    """Collect up to ``k`` candidate routes per stream in canonical order.

    Canonical order sorts simple source->sink paths by (hop count, total
    length, lexicographic node sequence). Enumeration is lazy (Yen's
    algorithm under a composite weight in which one hop outweighs any total
    length), so dense graphs do not require materializing every simple path.

    A stream whose source cannot reach the sink makes the instance
    infeasible. Streams get fewer than ``k`` routes only when fewer simple
    paths exist.
    """
    if k < 1:
        raise ValueError(f"route budget must be >= 1, got {k}")
    g = net.graph()
    scale = sum(e.length for e in net.edges) + 1.0
    for u, v, data in g.edges(data=True):
        data["composite"] = 1.0 + data["length"] / scale
    edge_lookup = {e.key(): (i, e.length) for i, e in enumerate(net.edges)}

    all_routes = []
    for stream in net.streams:
        candidates = []
        kth_weight = None
        cap = max(64, 8 * k)
        try:
            for path in nx.shortest_simple_paths(g, stream.source, net.sink, weight="composite"):
                hops = len(path) - 1
                length = 0.0
                weight = 0.0
                eids = []
                for a, b in zip(path, path[1:]):
                    eid, el = edge_lookup[(a, b) if a <= b else (b, a)]
                    eids.append(eid)
                    length += el
                    weight += 1.0 + el / scale
                if kth_weight is not None and weight > kth_weight + 1e-9:
                    break
                candidates.append((hops, length, tuple(path), tuple(eids)))
                if len(candidates) == k:
                    kth_weight = weight
                if len(candidates) >= cap:
                    break
        except nx.NetworkXNoPath:
            raise InfeasibleInstanceError(
                f"stream source {stream.source} has no path to sink {net.sink}"
            )
        candidates.sort(key=lambda c: (c[0], c[1], c[2]))
        all_routes.append(tuple(Route(nodes, eids, length) for _, length, nodes, eids in candidates[:k]))

    edge_index: dict[int, list[tuple[int, int]]] = {}
    for s, rs in enumerate(all_routes):
        for r, route in enumerate(rs):
            for eid in route.edges:
                edge_index.setdefault(eid, []).append((s, r))
    frozen_index = {eid: tuple(v) for eid, v in sorted(edge_index.items())}
    endpoints = {eid: net.edges[eid].key() for eid in frozen_index}
    return RouteTable(tuple(all_routes), k, frozen_index, endpoints)


@dataclass(frozen=True)
class EdgePathMatrix:
    """Sparse edge-by-path incidence in flattened-row form.

    ``rows`` maps the flattened row key of an edge with normalized endpoints
    (u, v) -- computed as (u - 1) * n + v -- to the global path ids that
    traverse it. ``by_path`` is the inverse: path id -> row keys it occupies.
    """

    n: int
    rows: dict[int, tuple[int, ...]]
    by_path: dict[int, tuple[int, ...]]


def build_edge_index(rt: RouteTable, n: int) -> EdgePathMatrix:
    """Flatten the route table's edge incidence into row-keyed form."""
    rows: dict[int, list[int]] = {}
    by_path: dict[int, list[int]] = {}
    for eid, users in rt.edge_index.items():
        u, v = rt.edge_endpoints[eid]
        key = (u - 1) * n + v
        pids = [rt.path_id(s, r) for s, r in users]
        rows[key] = pids
        for pid in pids:
            by_path.setdefault(pid, []).append(key)
    return EdgePathMatrix(
        n,
        {k: tuple(v) for k, v in sorted(rows.items())},
        {p: tuple(sorted(v)) for p, v in sorted(by_path.items())},
    )


def instance_to_dict(net: NetworkInstance) -> dict:
    """Plain-dict form of an instance, matching the on-disk JSON schema."""
    nodes = []
    for n in net.nodes:
        d = {"id": n.id}
        if n.pos is not None:
            d["x"], d["y"] = n.pos
        nodes.append(d)
    return {
        "nodes": nodes,
        "edges": [{"u": e.u, "v": e.v, "len": e.length} for e in net.edges],
        "sink": net.sink,
        "streams": [{"source": s.source, "rate": s.rate} for s in net.streams],
        "delta_t": net.delta_t,
    }


def instance_from_dict(d: dict) -> NetworkInstance:
    """Parse and validate the instance JSON schema.

    Edge ``len`` may be omitted when both endpoints carry coordinates;
    ``delta_t`` defaults to 1.0.
    """
    try:
        nodes = [
            (n["id"], (n["x"], n["y"]) if "x" in n and "y" in n else None)
            for n in d["nodes"]
        ]
        edges = [
            (e["u"], e["v"], e["len"]) if "len" in e else (e["u"], e["v"])
            for e in d["edges"]
        ]
        sink = d["sink"]
        streams = [(s["source"], s["rate"]) for s in d.get("streams", [])]
    except (KeyError, TypeError) as exc:
        raise InstanceError(f"malformed instance document: {exc}") from exc
    return make_instance(nodes, edges, sink, streams, d.get("delta_t", 1.0))


def load_instance(path) -> NetworkInstance:
    with open(path) as f:
        return instance_from_dict(json.load(f))


def save_instance(net: NetworkInstance, path) -> None:
    with open(path, "w") as f:
        json.dump(instance_to_dict(net), f, indent=2)
        f.write("\n")
