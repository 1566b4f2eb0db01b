"""QUBO compilation: objective, penalties, slack registers, variable fixing."""

import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quboroute import (
    InfeasibleInstanceError,
    PathVar,
    QuboProblem,
    SlackVar,
    brute_force_route,
    build_qubo,
    check_capacity,
    collect_paths,
    default_penalties,
    fix_variables,
    make_instance,
    objective_energy,
    qubo_energy,
    qubo_from_dict,
    qubo_from_triples,
    qubo_to_dict,
    qubo_to_triples,
    route_costs,
    solve_exact,
)
from quboroute.qubo import congestible_edges, slack_weights
from quboroute.samplers import DecodeContext
from conftest import random_instance, six_node

# hop costs (J/bit) for the walkthrough's edge lengths, from the radio model
C40 = 2 * 50e-9 + 10e-12 * 40.0 ** 2
C_E4 = 2 * 50e-9 + 10e-12 * (45.0 ** 2 + 10.0 ** 2)
C_E5 = 2 * 50e-9 + 10e-12 * (5.0 ** 2 + 50.0 ** 2)


class TestObjective:
    def test_walkthrough_values(self, walkthrough):
        rt = collect_paths(walkthrough, 2)
        # both streams on their two-hop routes: rates 3 and 2
        assert objective_energy(walkthrough, rt, (0, 0)) == pytest.approx(
            3 * 2 * C40 + 2 * 2 * C40, rel=1e-12)
        # stream 1 diverted to its longer route
        assert objective_energy(walkthrough, rt, (0, 1)) == pytest.approx(
            3 * 2 * C40 + 2 * (C_E4 + C_E5), rel=1e-12)

    def test_separable_over_streams(self, rng):
        for _ in range(10):
            net = random_instance(rng)
            rt = collect_paths(net, 2)
            costs = route_costs(net, rt)
            for assignment in itertools.islice(
                    itertools.product(*(range(len(r)) for r in rt.routes)), 16):
                total = objective_energy(net, rt, assignment)
                parts = sum(costs[s][a] for s, a in enumerate(assignment))
                assert total == pytest.approx(parts, rel=1e-12)

    def test_scales_with_delta_t(self, walkthrough):
        rt = collect_paths(walkthrough, 2)
        slow = make_instance(
            [(n.id, n.pos) for n in walkthrough.nodes],
            [(e.u, e.v, e.length) for e in walkthrough.edges],
            walkthrough.sink,
            [(s.source, s.rate) for s in walkthrough.streams],
            delta_t=4.0,
        )
        rt_slow = collect_paths(slow, 2)
        assert objective_energy(slow, rt_slow, (0, 0)) == pytest.approx(
            4.0 * objective_energy(walkthrough, rt, (0, 0)), rel=1e-12)

    def test_assignment_length_checked(self, walkthrough):
        rt = collect_paths(walkthrough, 2)
        with pytest.raises(ValueError):
            objective_energy(walkthrough, rt, (0,))


class TestCapacity:
    def test_shared_edge_load_is_rate_sum(self, walkthrough):
        rt = collect_paths(walkthrough, 2)
        report = check_capacity(walkthrough, rt, (0, 0), 5)
        # hub->sink edge carries both streams
        assert report.loads[1] == 3 + 2
        assert report.feasible

    def test_boundary(self, walkthrough):
        rt = collect_paths(walkthrough, 2)
        assert check_capacity(walkthrough, rt, (0, 0), 5).feasible
        assert not check_capacity(walkthrough, rt, (0, 0), 4).feasible

    def test_unloaded_edges_absent(self, walkthrough):
        rt = collect_paths(walkthrough, 2)
        report = check_capacity(walkthrough, rt, (0, 0), 5)
        assert 4 not in report.loads and 5 not in report.loads


class TestDefaultPenalties:
    def test_formula(self, walkthrough):
        rt = collect_paths(walkthrough, 2)
        costs = route_costs(walkthrough, rt)
        gap = sum(max(r) - min(r) for r in costs)
        maxcost = max(max(r) for r in costs)
        pen = default_penalties(walkthrough, rt, 5)
        assert pen.lambda2 == 2.0 * (gap + maxcost)
        assert pen.lambda1 == pen.lambda2 / 2.0  # smallest rate here is 2

    def test_lambda1_scales_with_unit_rates(self):
        net = six_node(r1=1, r3=1)
        rt = collect_paths(net, 2)
        pen = default_penalties(net, rt, 5)
        assert pen.lambda1 == pen.lambda2

    def test_ground_state_is_feasible_optimum(self, rng):
        """Penalty dominance: the QUBO argmin always decodes to the oracle optimum."""
        tested = 0
        attempts = 0
        while tested < 20 and attempts < 200:
            attempts += 1
            net = random_instance(rng, n_max=5, n_streams_max=2)
            rt = collect_paths(net, 2)
            oracle = brute_force_route(net, rt, 5)
            if oracle.status != "solved":
                continue
            q = build_qubo(net, rt, 5)
            if q.n_vars > 18:
                continue
            out = solve_exact(q, DecodeContext(net, rt, 5, q), top=1)
            assert out.best_feasible is not None
            assert out.best_feasible.objective == oracle.objective
            tested += 1
        assert tested == 20


class TestBuildQubo:
    def test_no_slack_when_capacity_unreachable(self, walkthrough):
        rt = collect_paths(walkthrough, 2)
        assert congestible_edges(walkthrough, rt, 5) == []
        q = build_qubo(walkthrough, rt, 5)
        assert q.n_vars == 4
        assert all(isinstance(m, PathVar) for m in q.var_meta)

    def test_congestible_edges_tight(self, walkthrough_tight):
        rt = collect_paths(walkthrough_tight, 2)
        assert congestible_edges(walkthrough_tight, rt, 5) == [1, 2, 4, 5]

    def test_variable_layout(self, walkthrough_tight):
        rt = collect_paths(walkthrough_tight, 2)
        q = build_qubo(walkthrough_tight, rt, 5, lambda1=3.0, lambda2=11.0)
        assert q.n_vars == 4 + 4 * 3
        assert q.var_meta[:4] == (PathVar(0, 0), PathVar(0, 1), PathVar(1, 0), PathVar(1, 1))
        assert q.var_meta[4:7] == (SlackVar(1, 0, 1), SlackVar(1, 1, 2), SlackVar(1, 2, 4))
        assert q.var_meta[7].edge == 2 and q.var_meta[10].edge == 4 and q.var_meta[13].edge == 5

    def test_symbolic_structure(self, walkthrough_tight):
        """Every penalty coefficient of the tight walkthrough, by hand."""
        lam1, lam2 = 3.0, 11.0
        rt = collect_paths(walkthrough_tight, 2)
        q = build_qubo(walkthrough_tight, rt, 5, lambda1=lam1, lambda2=lam2)
        # one-hot pairs carry exactly 2*lambda2: no in-stream shared congestible edge
        assert q.q[(0, 1)] == 2 * lam2
        assert q.q[(2, 3)] == 2 * lam2
        # cross-stream couplings from shared congestible edges, 2*lambda1*r*r' each
        assert q.q[(0, 2)] == 2 * lam1 * 9.0      # hub->sink edge
        assert q.q[(1, 2)] == 2 * lam1 * 9.0      # hub->lower-source edge
        assert q.q[(1, 3)] == 2 * (2 * lam1 * 9.0)  # two shared detour edges
        assert (0, 3) not in q.q
        # slack diagonals: lambda1 * (w^2 - 2*c_max*w)
        for vid, w in ((4, 1), (5, 2), (6, 4)):
            assert q.q[(vid, vid)] == lam1 * (w * w - 10.0 * w)
        # slack pairs within one register: 2*lambda1*w*w'
        assert q.q[(4, 5)] == 2 * lam1 * 2.0
        assert q.q[(4, 6)] == 2 * lam1 * 4.0
        assert q.q[(5, 6)] == 2 * lam1 * 8.0
        # path-slack couplings on the shared edge: 2*lambda1*rate*w
        assert q.q[(0, 4)] == 2 * lam1 * 3.0
        assert q.q[(0, 6)] == 2 * lam1 * 12.0
        assert q.q[(2, 5)] == 2 * lam1 * 6.0
        # no coupling between slack registers of different edges
        assert (4, 7) not in q.q and (6, 10) not in q.q
        # offset: one lambda2 per stream, lambda1*c_max^2 per congestible edge
        assert q.offset == 2 * lam2 + 4 * lam1 * 25.0
        # path diagonals: objective cost - lambda2 + capacity diagonal per edge
        cost00 = 3 * (C40 + C40)
        assert q.q[(0, 0)] == pytest.approx(cost00 - lam2 + lam1 * (9.0 - 30.0), rel=1e-9)
        cost01 = 3 * (C40 + C40 + C_E4 + C_E5)
        assert q.q[(1, 1)] == pytest.approx(cost01 - lam2 + 3 * lam1 * (9.0 - 30.0), rel=1e-9)

    def test_ground_state_matches_oracle_with_slack(self, walkthrough_tight):
        rt = collect_paths(walkthrough_tight, 2)
        oracle = brute_force_route(walkthrough_tight, rt, 5)
        assert oracle.assignment == (0, 1)  # only capacity-feasible combination
        q = build_qubo(walkthrough_tight, rt, 5)
        out = solve_exact(q, DecodeContext(walkthrough_tight, rt, 5, q), top=1)
        assert out.best_feasible.assignment == (0, 1)
        assert out.best_feasible.objective == oracle.objective
        # optimal slack zeroes the capacity squares: energy reduces to the objective
        assert out.samples[0].energy == pytest.approx(oracle.objective, rel=1e-9)

    def test_unary_slack(self):
        net = make_instance(
            [(1, (0.0, 0.0)), (2, (30.0, 0.0)), (3, (15.0, 20.0))],
            [(1, 2), (1, 3), (2, 3)],
            3,
            [(1, 3), (2, 3)],
        )
        rt = collect_paths(net, 2)
        assert slack_weights(5, "unary") == [1, 2, 3, 4, 5]
        qb = build_qubo(net, rt, 5, slack_mode="binary")
        qu = build_qubo(net, rt, 5, slack_mode="unary")
        n_cong = len(congestible_edges(net, rt, 5))
        assert qu.n_vars == 4 + 5 * n_cong
        assert qb.n_vars == 4 + 3 * n_cong
        ob = solve_exact(qb, DecodeContext(net, rt, 5, qb), top=1)
        ou = solve_exact(qu, DecodeContext(net, rt, 5, qu), top=1)
        assert ob.best_feasible.objective == ou.best_feasible.objective

    def test_rejects_rate_above_capacity(self):
        net = six_node(r1=6, r3=2)
        rt = collect_paths(net, 2)
        with pytest.raises(InfeasibleInstanceError, match="rate 6"):
            build_qubo(net, rt, 5)

    def test_rejects_streamless_instance(self):
        net = make_instance([(1, (0, 0)), (2, (1, 0))], [(1, 2)], 2, [])
        rt = collect_paths(net, 2)
        with pytest.raises(InfeasibleInstanceError, match="no streams"):
            build_qubo(net, rt, 5)

    def test_validates_c_max(self, walkthrough):
        rt = collect_paths(walkthrough, 2)
        with pytest.raises(ValueError):
            build_qubo(walkthrough, rt, 0)

    def test_stream_permutation_symmetry(self, walkthrough_tight):
        rt = collect_paths(walkthrough_tight, 2)
        q = build_qubo(walkthrough_tight, rt, 5, lambda1=3.0, lambda2=11.0)
        flipped = make_instance(
            [(n.id, n.pos) for n in walkthrough_tight.nodes],
            [(e.u, e.v, e.length) for e in walkthrough_tight.edges],
            walkthrough_tight.sink,
            [(s.source, s.rate) for s in reversed(walkthrough_tight.streams)],
        )
        rtf = collect_paths(flipped, 2)
        qf = build_qubo(flipped, rtf, 5, lambda1=3.0, lambda2=11.0)
        assert q.n_vars == qf.n_vars
        np.testing.assert_allclose(
            np.sort(dense_spectrum(q)), np.sort(dense_spectrum(qf)), rtol=1e-12, atol=0)


def solve_exact_spectrum(q: QuboProblem) -> list[float]:
    """All 2^n energies, brute force, independent of the solvers module."""
    out = []
    for mask in range(1 << q.n_vars):
        bits = [(mask >> i) & 1 for i in range(q.n_vars)]
        out.append(qubo_energy(q, bits))
    return out


def dense_spectrum(q: QuboProblem) -> np.ndarray:
    """Vectorized 2^n energy sweep for mid-sized problems."""
    u = np.zeros((q.n_vars, q.n_vars))
    for (i, j), c in q.q.items():
        u[i, j] += c
    idx = np.arange(1 << q.n_vars, dtype=np.uint64)
    bits = ((idx[:, None] >> np.arange(q.n_vars, dtype=np.uint64)) & 1).astype(float)
    return np.einsum("bi,ij,bj->b", bits, u, bits) + q.offset


def naive_energy(n, entries, offset, bits):
    """Double-loop oracle over a dense matrix."""
    m = [[0.0] * n for _ in range(n)]
    for (i, j), c in entries.items():
        m[i][j] += c
    total = offset
    for i in range(n):
        for j in range(n):
            if bits[i] and bits[j]:
                total += m[i][j]
    return total


@st.composite
def integer_qubos(draw, max_vars=10):
    n = draw(st.integers(min_value=1, max_value=max_vars))
    density = draw(st.floats(min_value=0.2, max_value=1.0))
    seed = draw(st.integers(min_value=0, max_value=2 ** 32 - 1))
    rng = np.random.default_rng(seed)
    entries = {}
    for i in range(n):
        for j in range(i, n):
            if rng.random() < density:
                c = int(rng.integers(-10, 11))
                if c:
                    entries[(i, j)] = float(c)
    offset = float(int(rng.integers(-5, 6)))
    return QuboProblem(n, entries, offset)


class TestQuboEnergy:
    @given(integer_qubos(), st.integers(min_value=0, max_value=2 ** 32 - 1))
    @settings(max_examples=60, deadline=None)
    def test_matches_naive_double_loop(self, q, bits_seed):
        rng = np.random.default_rng(bits_seed)
        bits = [int(b) for b in rng.integers(0, 2, q.n_vars)]
        assert qubo_energy(q, bits) == naive_energy(q.n_vars, q.q, q.offset, bits)

    def test_bits_length_checked(self):
        q = QuboProblem(2, {(0, 0): 1.0}, 0.0)
        with pytest.raises(ValueError):
            qubo_energy(q, [1])


class TestFixVariables:
    @given(integer_qubos(max_vars=8))
    @settings(max_examples=40, deadline=None)
    def test_landscape_identity(self, q):
        rep = fix_variables(q)
        m = len(rep.kept)
        for mask in range(1 << m):
            bits = [(mask >> i) & 1 for i in range(m)]
            full = rep.expand(bits)
            assert qubo_energy(q, full) == qubo_energy(rep.reduced, bits) + rep.offset_delta

    @given(integer_qubos(max_vars=8))
    @settings(max_examples=40, deadline=None)
    def test_minimum_preserved(self, q):
        rep = fix_variables(q)
        orig_min = min(solve_exact_spectrum(q))
        red_min = min(solve_exact_spectrum(rep.reduced)) + rep.offset_delta
        assert orig_min == red_min

    def test_cascade(self):
        q = QuboProblem(2, {(0, 0): -5.0, (0, 1): -2.0, (1, 1): 1.5}, 0.0)
        rep = fix_variables(q)
        assert rep.fixed == {0: 1, 1: 1}
        assert rep.offset_delta == -5.5
        assert rep.reduced.n_vars == 0

    def test_undecided_variable_survives(self):
        q = QuboProblem(2, {(0, 0): 1.0, (0, 1): -3.0, (1, 1): 1.0}, 0.0)
        rep = fix_variables(q)
        assert rep.fixed == {}
        assert rep.kept == (0, 1)
        assert rep.reduced.q == q.q

    def test_idempotent(self, walkthrough_tight):
        rt = collect_paths(walkthrough_tight, 2)
        q = build_qubo(walkthrough_tight, rt, 5)
        rep = fix_variables(q)
        again = fix_variables(rep.reduced)
        assert again.fixed == {}
        assert again.reduced.q == rep.reduced.q

    def test_expand_round_trip(self):
        q = QuboProblem(3, {(0, 0): 5.0, (1, 1): -4.0, (2, 2): 1.0, (1, 2): -2.0}, 0.0)
        rep = fix_variables(q)
        assert rep.fixed[0] == 0 and rep.fixed[1] == 1
        full = rep.expand([1] * len(rep.kept))
        assert full[0] == 0 and full[1] == 1
        with pytest.raises(ValueError):
            rep.expand([0] * (len(rep.kept) + 1))

    def test_metadata_follows_kept_variables(self, walkthrough_tight):
        rt = collect_paths(walkthrough_tight, 2)
        q = build_qubo(walkthrough_tight, rt, 5)
        rep = fix_variables(q)
        for pos, orig in enumerate(rep.kept):
            assert rep.reduced.var_meta[pos] == q.var_meta[orig]


class TestSerialization:
    def test_json_round_trip_exact(self, walkthrough_tight):
        rt = collect_paths(walkthrough_tight, 2)
        q = build_qubo(walkthrough_tight, rt, 5)
        doc = json.loads(json.dumps(qubo_to_dict(q)))
        again = qubo_from_dict(doc)
        assert again.n_vars == q.n_vars
        assert again.q == q.q
        assert again.offset == q.offset
        assert again.var_meta == q.var_meta
        assert again.penalties == q.penalties

    def test_triples_round_trip_exact(self, walkthrough_tight):
        rt = collect_paths(walkthrough_tight, 2)
        q = build_qubo(walkthrough_tight, rt, 5)
        again = qubo_from_triples(qubo_to_triples(q))
        assert again.q == q.q
        assert again.offset == q.offset
        assert again.n_vars == q.n_vars

    def test_rejects_lower_triangle(self):
        with pytest.raises(ValueError, match="upper triangle"):
            qubo_from_dict({"n_vars": 2, "offset": 0.0, "entries": [[1, 0, 1.0]]})

    def test_triples_normalize_order(self):
        q = qubo_from_triples("2 0 1.5\n0 0 -1.0\n")
        assert q.q == {(0, 2): 1.5, (0, 0): -1.0}
        assert q.n_vars == 3
