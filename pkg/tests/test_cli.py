import json

import pytest

from tspqa import __version__
from tspqa.cli import main
from tspqa.encoding import parse_model


@pytest.fixture
def inst_file(tmp_path):
    assert main(["gen", "--n", "6", "--seed", "3", "--out", str(tmp_path)]) == 0
    return tmp_path / "tsp_n6_s3.json"


def test_version(capsys):
    assert main(["--version"]) == 0
    assert __version__ in capsys.readouterr().out


def test_gen_files_carry_command(tmp_path):
    assert main(["gen", "--n", "5", "--count", "3", "--seed", "10", "--out", str(tmp_path)]) == 0
    files = sorted(p.name for p in tmp_path.glob("*.json"))
    assert files == ["tsp_n5_s10.json", "tsp_n5_s11.json", "tsp_n5_s12.json"]
    doc = json.loads((tmp_path / "tsp_n5_s10.json").read_text())
    assert doc["command"].startswith("tspqa gen")
    assert doc["n"] == 5


def test_gen_too_small_exits_2(tmp_path):
    assert main(["gen", "--n", "2", "--out", str(tmp_path)]) == 2


def test_unknown_command_exits_1():
    assert main(["frobnicate"]) == 1


def test_missing_instance_exits_1(tmp_path):
    assert main(["loop", "--instance", str(tmp_path / "nope.json")]) == 1


def test_malformed_instance_exits_1(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"n": 3}))
    assert main(["solve", "--instance", str(bad)]) == 1


def test_encode_edge_truncated(inst_file, tmp_path, capsys):
    out = tmp_path / "m.txt"
    assert main(["encode", "--instance", str(inst_file), "--L", "3", "--out", str(out)]) == 0
    text = out.read_text()
    assert text.startswith("# command: tspqa encode")
    model = parse_model(text)
    assert "qubits" in capsys.readouterr().err
    assert 9 <= model.num_vars <= 15


def test_encode_ising_with_subset(inst_file, tmp_path):
    out = tmp_path / "m.txt"
    assert main(["encode", "--instance", str(inst_file), "--subset", "0,1,2",
                 "--form", "ising", "--out", str(out)]) == 0
    assert "form ising" in out.read_text()


def test_encode_eta_too_small_exits_2(inst_file, tmp_path):
    assert main(["encode", "--instance", str(inst_file), "--mapping", "permutation",
                 "--eta", "0.0001", "--out", str(tmp_path / "m.txt")]) == 2


@pytest.mark.parametrize("solver", ["sa", "sqa", "exact", "two-opt"])
def test_solve(inst_file, tmp_path, solver):
    out = tmp_path / "r.json"
    assert main(["solve", "--instance", str(inst_file), "--solver", solver,
                 "--mcs", "200", "--out", str(out)]) == 0
    rec = json.loads(out.read_text())
    assert rec["command"].startswith("tspqa solve")


def test_loop(inst_file, tmp_path):
    out = tmp_path / "loop.json"
    assert main(["loop", "--instance", str(inst_file), "--out", str(out)]) == 0
    rec = json.loads(out.read_text())
    assert rec["status"] == "solved"
    assert sorted(rec["tour"]) == list(range(6))


def test_loop_config_file(inst_file, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"C": 3, "max-iterations": 1}))
    out = tmp_path / "loop.json"
    assert main(["--config", str(cfg), "loop", "--instance", str(inst_file), "--out", str(out)]) == 0
    rec = json.loads(out.read_text())
    assert len(rec["iterations"]) == 1


def test_digital_histogram(tmp_path, capsys):
    main(["gen", "--n", "4", "--seed", "0", "--out", str(tmp_path)])
    hist = tmp_path / "h.csv"
    assert main(["digital", "--instance", str(tmp_path / "tsp_n4_s0.json"), "--steps", "20",
                 "--subset", "0,1", "--histogram-out", str(hist)]) == 0
    lines = hist.read_text().splitlines()
    assert lines[0].startswith("# command:")
    assert lines[1] == "bitstring,probability,structure"
    assert "most probable" in capsys.readouterr().out


def test_experiment_and_report(tmp_path, capsys):
    assert main(["experiment", "subtour-fraction", "--n", "8", "--count", "5",
                 "--out-dir", str(tmp_path)]) == 0
    jsons = list(tmp_path.glob("*.json"))
    assert len(jsons) == 1
    capsys.readouterr()
    assert main(["report", str(jsons[0])]) == 0
    assert "split_fraction" in capsys.readouterr().out
