"""End-to-end checks of the gen/build/solve/sweep/report entry points."""

import json

import pytest

from quboroute import (
    build_qubo,
    collect_paths,
    fix_variables,
    gen_erdos_renyi,
    instance_from_dict,
    qubo_from_dict,
    qubo_from_triples,
    qubo_to_dict,
    records_from_csv,
    solve_exact,
)
from quboroute.cli import main
from quboroute.domainwall import build_encoding_map, substitute
from quboroute.network import save_instance
from conftest import six_node


@pytest.fixture
def instance_file(tmp_path):
    path = tmp_path / "instance.json"
    save_instance(six_node(), path)
    return str(path)


class TestGen:
    def test_er_single_instance_to_file(self, tmp_path):
        out = tmp_path / "inst.json"
        code = main(["gen", "--size", "5", "--edge-prob", "0.7",
                     "--seed", "3", "--out", str(out)])
        assert code == 0
        net = instance_from_dict(json.loads(out.read_text()))
        assert net == gen_erdos_renyi(5, 0.7, 1, 3)[0].network

    def test_er_batch_needs_out_dir(self):
        with pytest.raises(SystemExit):
            main(["gen", "--size", "5", "--edge-prob", "0.7",
                  "--seed", "3", "--count", "2"])

    def test_er_needs_edge_prob(self):
        with pytest.raises(SystemExit):
            main(["gen", "--size", "5", "--seed", "3"])

    def test_er_batch_to_dir(self, tmp_path, capsys):
        d = tmp_path / "batch"
        code = main(["gen", "--size", "4", "--edge-prob", "0.8", "--seed", "1",
                     "--count", "3", "--out-dir", str(d)])
        assert code == 0
        assert sorted(p.name for p in d.iterdir()) == \
            [f"er-n4-p0.8-i{i}.json" for i in range(3)]
        assert "wrote 3 instances" in capsys.readouterr().out

    def test_exhaustive_requires_out_dir(self):
        with pytest.raises(SystemExit):
            main(["gen", "--mode", "exhaustive", "--size", "3", "--seed", "1"])

    def test_exhaustive_batch(self, tmp_path):
        d = tmp_path / "ex"
        code = main(["gen", "--mode", "exhaustive", "--size", "3", "--seed", "1",
                     "--out-dir", str(d)])
        assert code == 0
        assert len(list(d.iterdir())) == 4 * 3


class TestBuild:
    def test_json_output_matches_library_build(self, instance_file, capsys):
        code = main(["build", "--instance", instance_file])
        assert code == 0
        q = qubo_from_dict(json.loads(capsys.readouterr().out))
        net = six_node()
        expect = build_qubo(net, collect_paths(net, 2), 5)
        assert q.n_vars == expect.n_vars
        assert q.q == expect.q
        assert q.offset == expect.offset

    def test_triples_domainwall_fixed(self, instance_file, capsys):
        code = main(["build", "--instance", instance_file, "--format", "triples",
                     "--encoding", "domainwall", "--fix"])
        assert code == 0
        q = qubo_from_triples(capsys.readouterr().out)
        net = six_node()
        base = build_qubo(net, collect_paths(net, 2), 5)
        expect = fix_variables(substitute(base, build_encoding_map(base))).reduced
        assert q.n_vars == expect.n_vars

    def test_infeasible_rate_exits_2(self, tmp_path, capsys):
        path = tmp_path / "hot.json"
        save_instance(six_node(r1=9), path)
        code = main(["build", "--instance", str(path)])
        assert code == 2
        assert "infeasible" in capsys.readouterr().err

    def test_output_file(self, instance_file, tmp_path):
        out = tmp_path / "q.json"
        assert main(["build", "--instance", instance_file, "--out", str(out)]) == 0
        assert json.loads(out.read_text())["n_vars"] > 0


class TestSolve:
    def test_qubo_file_exact(self, tmp_path, capsys):
        net = six_node()
        q = build_qubo(net, collect_paths(net, 2), 5)
        path = tmp_path / "q.json"
        path.write_text(json.dumps(qubo_to_dict(q)))
        code = main(["solve", "--qubo", str(path), "--sampler", "exact"])
        assert code == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["samples"][0]["energy"] == solve_exact(q).samples[0].energy

    def test_qubo_triples_auto_detected(self, tmp_path, capsys):
        path = tmp_path / "q.txt"
        path.write_text("# n_vars 2\n0 0 -1.0\n1 1 2.0\n0 1 0.5\n")
        code = main(["solve", "--qubo", str(path), "--sampler", "exact"])
        assert code == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["samples"][0]["bits"] == [1, 0]
        assert doc["samples"][0]["energy"] == -1.0

    def test_instance_end_to_end(self, instance_file, capsys):
        code = main(["solve", "--instance", instance_file, "--sampler", "exact"])
        assert code == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["status"] == "solved"
        assert doc["best_feasible"]["objective"] == doc["oracle_objective"]

    def test_anneal_instance(self, instance_file, capsys):
        code = main(["solve", "--instance", instance_file, "--reads", "5",
                     "--sweeps", "200", "--seed", "9"])
        assert code == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["status"] == "solved"
        assert doc["best_feasible"]["objective"] == doc["oracle_objective"]

    def test_requires_exactly_one_input(self, instance_file):
        with pytest.raises(SystemExit):
            main(["solve"])
        with pytest.raises(SystemExit):
            main(["solve", "--qubo", "a", "--instance", instance_file])

    def test_capacity_infeasible_exits_2(self, tmp_path, capsys):
        from quboroute import make_instance
        nodes = [(1, (0.0, 0.0)), (2, (30.0, 0.0)), (3, (60.0, 0.0))]
        net = make_instance(nodes, [(1, 2), (2, 3)], 3, [(1, 5), (2, 5)])
        path = tmp_path / "bad.json"
        save_instance(net, path)
        assert main(["solve", "--instance", str(path)]) == 2
        assert "infeasible" in capsys.readouterr().err

    def test_embedding_rejected_exits_3(self, instance_file, capsys):
        code = main(["solve", "--instance", instance_file, "--max-embed-vars", "1"])
        assert code == 3
        assert "embedding" in capsys.readouterr().err

    def test_remote_requires_url(self, instance_file):
        with pytest.raises(SystemExit):
            main(["solve", "--instance", instance_file, "--sampler", "remote"])


class TestSweepReport:
    def test_sweep_requires_seed(self, tmp_path):
        with pytest.raises(SystemExit):
            main(["sweep", "--out", str(tmp_path / "r.csv")])

    def test_sweep_then_report(self, tmp_path, capsys):
        out = tmp_path / "records.csv"
        code = main(["sweep", "--seed", "21", "--sizes", "4,5",
                     "--edge-probs", "0.7", "--instances-per-size", "3",
                     "--sampler", "exact", "--out", str(out)])
        assert code == 0
        records = records_from_csv(out)
        assert len(records) == 6
        assert "wrote 6 records" in capsys.readouterr().out
        prefix = str(tmp_path / "rep-")
        assert main(["report", "--records", str(out), "--out-prefix", prefix]) == 0
        text = capsys.readouterr().out
        assert "degradation size [p=0.7]" in text
        for suffix in ("metrics.csv", "long.csv", "degradation.csv"):
            assert (tmp_path / f"rep-{suffix}").exists()

    def test_sweep_config_file_with_overrides(self, tmp_path):
        cfgfile = tmp_path / "sweep.json"
        cfgfile.write_text(json.dumps({
            "seed": 4, "sizes": [4], "edge_probs": [0.6],
            "instances_per_size": 2, "sampler": "exact"}))
        out = tmp_path / "records.csv"
        code = main(["sweep", "--config", str(cfgfile), "--seed", "5",
                     "--instances-per-size", "3", "--out", str(out)])
        assert code == 0
        records = records_from_csv(out)
        assert len(records) == 3
        assert records[0].instance_id == "er-n4-p0.6-i0"
        fresh = gen_erdos_renyi(4, 0.6, 3, 5)
        assert [r.instance_id for r in records] == [g.instance_id for g in fresh]
