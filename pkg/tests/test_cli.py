import hashlib
import json

import pytest

from lyzero.cli import main, parse_number
from lyzero.model import Hypergraph, instance_to_json

from conftest import colour_count_poly


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, (json.loads(out.out) if out.out else None), out.err


@pytest.fixture
def edge_file(tmp_path):
    path = tmp_path / "edge.json"
    path.write_text(json.dumps(instance_to_json(Hypergraph(4, [[0, 1, 2], [1, 2, 3]]), 4)))
    return path


def test_parse_number():
    assert parse_number("1/3") == pytest.approx(1 / 3)
    assert parse_number("0.5+0.25j") == 0.5 + 0.25j


def test_gen_manifest(tmp_path, capsys):
    code, _, _ = run(capsys, "gen", "--kind", "random-hypergraph", "--param", "n=8", "--param", "k=3",
                     "--param", "delta=2", "--param", "m=3", "--q", 3, "--count", 3, "--dir", tmp_path)
    assert code == 0
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert len(manifest["files"]) == 3
    for name, digest in manifest["files"].items():
        assert hashlib.sha256((tmp_path / name).read_bytes()).hexdigest() == digest


def test_gen_zero_degree_is_an_error(tmp_path, capsys):
    code, out, err = run(capsys, "gen", "--kind", "random-hypergraph", "--param", "n=8", "--param", "k=3",
                         "--param", "delta=0", "--param", "m=1", "--dir", tmp_path)
    assert code == 2 and out is None
    assert json.loads(err)["error"]


def test_missing_instance(capsys):
    code, _, err = run(capsys, "partition", "--instance", "/nonexistent.json")
    assert code == 2 and "error" in json.loads(err)


@pytest.mark.parametrize("method", ["factorized", "brute"])
def test_partition_matches_oracle(edge_file, capsys, method):
    code, rep, _ = run(capsys, "partition", "--instance", edge_file, "--method", method)
    assert code == 0
    expected = colour_count_poly(Hypergraph(4, [[0, 1, 2], [1, 2, 3]]), 4)
    assert [int(c) for c in rep["result"]["coefficients"]] == expected


def test_report_is_deterministic(edge_file, capsys):
    reps = []
    for _ in range(2):
        _, rep, _ = run(capsys, "fisher", "--instance", edge_file, "--order", 4, "--seed", 5)
        rep["meta"].pop("wall_time")
        reps.append(json.dumps(rep, sort_keys=True))
    assert reps[0] == reps[1]
    assert json.loads(reps[0])["meta"]["seed"] == 5


def test_threads_recorded(edge_file, capsys, monkeypatch):
    monkeypatch.setenv("LYZERO_THREADS", "3")
    _, rep, _ = run(capsys, "roots", "--instance", edge_file)
    assert rep["meta"]["threads"] == "3"


def test_out_file(edge_file, tmp_path, capsys):
    target = tmp_path / "r.json"
    assert main(["verify-strip", "--instance", str(edge_file), "--out", str(target)]) == 0
    assert json.loads(target.read_text())["meta"]["command"] == "verify-strip"


def test_check_conditions(capsys):
    code, rep, _ = run(capsys, "check-conditions", "--k", 50, "--delta", 2)
    assert code == 0 and rep["result"]["pass"] is True
    code, rep, _ = run(capsys, "check-conditions", "--k", 3, "--delta", 2, "--q", 6, "--B", 2)
    assert code == 0 and rep["result"]["pass"] is False


@pytest.mark.parametrize("argv", [
    ["glauber", "--B", 2, "--sweeps", 20],
    ["lifting", "--B", 2],
    ["witness", "--B", 2, "--traces", 20],
    ["fisher", "--order", 4],
    ["self-reduce"],
    ["influence", "--var", 0, "--value", 1],
])
def test_instance_commands(edge_file, capsys, argv):
    code, rep, _ = run(capsys, argv[0], "--instance", edge_file, *argv[1:])
    assert code == 0, rep


def test_csv_output(edge_file, tmp_path, capsys):
    path = tmp_path / "law.csv"
    assert run(capsys, "clt", "--m", "4,16", "--csv", path)[0] == 0
    rows = path.read_text().strip().splitlines()
    assert len(rows) == 3


def test_invariant_commands(capsys):
    assert run(capsys, "two-trees", "--graphs", 3, "--n", 8)[0] == 0
    code, rep, _ = run(capsys, "chebyshev", "--m", "10")
    assert code == 0 and rep["result"]["pass"] is True


def test_acceptance_subset(capsys):
    code, rep, _ = run(capsys, "acceptance", "--only", "3,8")
    assert code == 0
    assert [c["criterion"] for c in rep["result"]["criteria"]] == [3, 8]
