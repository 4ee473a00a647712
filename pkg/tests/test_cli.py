import csv
import json

import numpy as np
import pytest

from pmmkit.cli import main
from pmmkit.matrix import read_matrix
from pmmkit.storage import load_shards

SETUP = {"N": 25, "K": 2, "V": 2, "M": 2, "lambda": 4, "omega": 4, "gamma": 4, "seed": 3}


def write(tmp_path, name, obj):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return str(path)


def test_setup_is_idempotent(tmp_path):
    cfg = write(tmp_path, "setup.json", SETUP)
    assert main(["setup", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
    assert main(["setup", "--config", cfg, "--out", str(tmp_path / "b")]) == 0
    files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
    assert files
    for f in files:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    assert load_shards(tmp_path / "a").N == 25


def test_run_example_verifies(tmp_path, capsys):
    main(["setup", "--config", write(tmp_path, "s.json", SETUP), "--out", str(tmp_path / "sh")])
    run = {"mode": "psmm", "shards": str(tmp_path / "sh"), "L": 2, "S": 2, "T": 2, "theta": 2, "family": "Delta1"}
    code = main(["run", "--config", write(tmp_path, "r.json", run), "--out", str(tmp_path / "sess"), "--verify"])
    assert code == 0 and "verify: match" in capsys.readouterr().out
    transcript = json.loads((tmp_path / "sess" / "transcript.json").read_text())
    assert len(transcript["consumed"]) == 19
    decoded, _ = read_matrix(tmp_path / "sess" / "decoded.pmm")
    assert decoded.shape == (4, 4)


def test_run_tcp_identical(tmp_path):
    base = {"mode": "psmm", "setup": SETUP, "L": 2, "S": 2, "T": 2, "faults": {"stragglers": [1, 2], "malicious": [4], "E": 1}}
    main(["run", "--config", write(tmp_path, "a.json", base), "--out", str(tmp_path / "a")])
    main(["run", "--config", write(tmp_path, "b.json", {**base, "transport": "tcp"}), "--out", str(tmp_path / "b")])
    for name in ("transcript.json", "decoded.pmm"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_run_baseline_and_fpmm(tmp_path):
    setup = {"N": 12, "K": 2, "V": 2, "R": 2, "seed": 1}
    code = main(["run", "--config", write(tmp_path, "b.json", {"mode": "baseline", "setup": setup, "theta_A": 2}), "--out", str(tmp_path / "b"), "--verify"])
    assert code == 0
    setup = {"N": 30, "K": 2, "V": 2, "R": 2, "L": 1, "M": 2, "seed": 1}
    code = main(["run", "--config", write(tmp_path, "f.json", {"mode": "fpmm", "setup": setup, "theta_B": 2}), "--out", str(tmp_path / "f"), "--verify"])
    assert code == 0


def test_run_failure_exit_code(tmp_path):
    cfg = {"mode": "psmm", "setup": {**SETUP, "N": 20}, "L": 2, "S": 2, "T": 2, "faults": {"stragglers": [0, 1, 2]}}
    assert main(["run", "--config", write(tmp_path, "r.json", cfg), "--out", str(tmp_path / "o")]) == 2


def test_config_errors(tmp_path, capsys):
    assert main(["setup", "--config", write(tmp_path, "x.json", {**SETUP, "bogus": 1}), "--out", str(tmp_path / "s")]) == 3
    assert "bogus" in capsys.readouterr().err
    assert main(["setup", "--config", write(tmp_path, "y.json", {**SETUP, "K": 30}), "--out", str(tmp_path / "s")]) == 3
    assert main(["setup", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path / "s")]) == 3


def test_restripe(tmp_path):
    main(["setup", "--config", write(tmp_path, "s.json", {**SETUP, "M": 1}), "--out", str(tmp_path / "sh")])
    assert main(["restripe", "--shards", str(tmp_path / "sh"), "--M", "2", "--out", str(tmp_path / "r")]) == 0
    assert load_shards(tmp_path / "r").M == 2


def test_audit_modes(tmp_path):
    out = tmp_path / "a.json"
    assert main(["audit", "--mode", "algebraic", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["passed"]
    assert main(["audit", "--mode", "exhaustive"]) == 0
    leak = write(tmp_path, "leak.json", {"mode": "exhaustive", "subset_size": 2})
    assert main(["audit", "--config", leak]) == 1
    sampled = write(tmp_path, "smp.json", {"mode": "sampled", "samples": 5000})
    assert main(["audit", "--config", sampled]) == 0


def test_costs_commands(tmp_path):
    out = tmp_path / "sweep.csv"
    assert main(["costs", "sweep", "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert {r["strategy"] for r in rows} == {"psmm", "prior"}
    out = tmp_path / "frontier.csv"
    assert main(["costs", "frontier", "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 1 + 89
    out = tmp_path / "opt.json"
    assert main(["costs", "optimize", "--out", str(out)]) == 0
    assert set(json.loads(out.read_text())) == {"L", "M", "predicted_time"}
    bad = write(tmp_path, "c.json", {"scenario": {"N": 3, "K": 2, "V": 1, "lambda": 1, "omega": 1, "gamma": 1}})
    assert main(["costs", "optimize", "--config", bad]) == 2
