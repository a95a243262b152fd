from __future__ import annotations

import csv
import io
import json

import pytest

from sunny_portfolio.cli import main

from conftest import DATA, GOLDEN_FEATURES, GOLDEN_RUNTIMES

KB = ["--features", str(GOLDEN_FEATURES), "--runtimes", str(GOLDEN_RUNTIMES), "--timeout", "1800"]


def test_schedule_golden(capsys):
    assert main(["schedule", *KB, "--k", "5", "--backup", "s3", "--query-vector", "0,0"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert [(e["solver"], e["exact"]) for e in doc["entries"]] == [("s4", "600"), ("s1", "600"), ("s3", "300"), ("s2", "300")]


def test_schedule_query_file(tmp_path, capsys):
    q = tmp_path / "q.csv"
    q.write_text("instance,f1,f2\nnew,0,0\n")
    out = tmp_path / "sched.json"
    assert main(["schedule", *KB, "--k", "5", "--backup", "s3", "--query", str(q), "--out", str(out)]) == 0
    assert capsys.readouterr().out == ""
    assert json.loads(out.read_text())["slots"] == 6


def test_schedule_default_backup(capsys):
    assert main(["schedule", *KB, "--k", "5", "--query-vector", "0,0"]) == 0
    doc = json.loads(capsys.readouterr().out)
    # s4 is elected; it is also in the sub-portfolio so it absorbs the p1 slot
    assert dict((e["solver"], e["exact"]) for e in doc["entries"]) == {"s4": "900", "s1": "600", "s2": "300"}


def test_k_zero_is_usage_error(capsys):
    assert main(["schedule", *KB, "--k", "0", "--query-vector", "0,0"]) == 2
    assert "k" in capsys.readouterr().err


def test_dimension_mismatch(capsys):
    assert main(["schedule", *KB, "--k", "5", "--query-vector", "0,0,0"]) == 3
    assert "dimensional mismatch" in capsys.readouterr().err


def test_k_exceeding_kb(capsys):
    assert main(["schedule", *KB, "--k", "6", "--query-vector", "0,0"]) == 2


def test_unknown_option(capsys):
    assert main(["schedule", *KB, "--bogus", "1", "--query-vector", "0,0"]) == 2


def test_bad_kb_file(tmp_path, capsys):
    bad = tmp_path / "f.csv"
    bad.write_text("instance,f1\np1,1\np1,2\n")
    assert main(["schedule", "--features", str(bad), "--runtimes", str(GOLDEN_RUNTIMES), "--query-vector", "0"]) == 3
    err = capsys.readouterr().err
    assert "duplicate" in err


@pytest.fixture
def synth_dir(tmp_path):
    d = tmp_path / "kb"
    assert main(["gen-synthetic", "--instances", "40", "--solvers", "4", "--clusters", "3", "--seed", "1", "--out", str(d)]) == 0
    return d


def _kb_args(d):
    return ["--features", str(d / "features.csv"), "--runtimes", str(d / "runtimes.csv")]


def test_gen_synthetic_deterministic(tmp_path, synth_dir):
    d2 = tmp_path / "kb2"
    main(["gen-synthetic", "--instances", "40", "--solvers", "4", "--clusters", "3", "--seed", "1", "--out", str(d2)])
    for name in ("features.csv", "runtimes.csv"):
        assert (synth_dir / name).read_bytes() == (d2 / name).read_bytes()


def test_evaluate_minimal_protocol(tmp_path, capsys):
    f = tmp_path / "f.csv"
    r = tmp_path / "r.csv"
    f.write_text("instance,f1\na,0\nb,1\nc,2\nd,3\n")
    r.write_text("instance,solver,time,solved\n" + "".join(f"{i},s,1,1\n" for i in "abcd"))
    assert main(["evaluate", "--features", str(f), "--runtimes", str(r), "--approaches", "SUNNY,VBS",
                 "--k", "1", "--repeats", "1", "--folds", "2"]) == 0
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert sum(1 for row in rows[1:] if row[0] == "SUNNY" and row[2] != "avg") == 2


def test_evaluate_writes_reports(tmp_path, synth_dir):
    out = tmp_path / "rep"
    args = ["evaluate", *_kb_args(synth_dir), "--approaches", "VBS,SBS,SUNNY", "--k", "5", "--repeats", "2",
            "--folds", "3", "--seed", "4", "--out", str(out)]
    assert main(args) == 0
    assert sorted(p.name for p in out.iterdir()) == ["SBS.csv", "SUNNY.csv", "VBS.csv", "comparison.csv", "report.json"]
    rows = list(csv.reader(io.StringIO((out / "comparison.csv").read_text())))
    overall = {row[0]: float(row[3]) for row in rows[1:] if row[1] == "avg"}
    assert overall["VBS"] >= overall["SUNNY"] >= overall["SBS"]


def test_evaluate_with_m(synth_dir, capsys):
    assert main(["evaluate", *_kb_args(synth_dir), "--approaches", "EQU", "--m", "2", "--k", "3",
                 "--repeats", "1", "--folds", "2"]) == 0


def test_evaluate_unknown_approach(synth_dir, capsys):
    assert main(["evaluate", *_kb_args(synth_dir), "--approaches", "SUNNY,3S"]) == 2
    assert "unknown approach" in capsys.readouterr().err


def test_sweep(tmp_path, synth_dir):
    out = tmp_path / "sweep.csv"
    assert main(["sweep", *_kb_args(synth_dir), "--k-range", "1..4", "--m-range", "2,3", "--repeats", "1",
                 "--folds", "2", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "m,k,psi,ast,avg_subpf_size,max_subpf_size"
    assert len(lines) == 1 + 4 * 2


def test_bad_range(synth_dir):
    assert main(["sweep", *_kb_args(synth_dir), "--k-range", "5..2"]) == 2


def test_run_with_schedule_file(tmp_path, capsys):
    sched = tmp_path / "s.json"
    assert main(["schedule", *KB, "--k", "5", "--backup", "s3", "--query-vector", "0,0", "--out", str(sched)]) == 0
    inst = tmp_path / "p.txt"
    inst.write_text("s4 0.05 1\ns1 0 0\ns2 0 0\ns3 0 0\n")
    # shrink the budget so the test is quick: rewrite T and entries
    doc = json.loads(sched.read_text())
    doc["T"] = "2"
    for e in doc["entries"]:
        e["exact"] = "1/2"
        e["seconds"] = 0.5
    sched.write_text(json.dumps(doc))
    config = tmp_path / "solvers.json"
    mock = DATA / "mock_solver.sh"
    config.write_text(json.dumps({"solvers": {s: {"command": f"sh {mock} {s} {{instance}}"} for s in ("s1", "s2", "s3", "s4")}}))
    trace_path = tmp_path / "trace.json"
    code = main(["run", "--schedule", str(sched), "--solvers-config", str(config), "--instance", str(inst),
                 "--fallback", "s1,s2", "--out", str(trace_path)])
    assert code == 0
    trace = json.loads(trace_path.read_text())
    assert trace["final"]["solved"] and trace["steps"][0]["solver"] == "s4"


def test_run_unsolved_exit_code(tmp_path):
    sched = tmp_path / "s.json"
    main(["schedule", *KB, "--k", "5", "--backup", "s3", "--query-vector", "0,0", "--out", str(sched)])
    doc = json.loads(sched.read_text())
    doc["T"] = "1"
    for e in doc["entries"]:
        e["exact"] = "1/4"
    sched.write_text(json.dumps(doc))
    inst = tmp_path / "p.txt"
    inst.write_text("s1 0 0\ns2 0 0\ns3 0 0\ns4 0 0\n")
    config = tmp_path / "solvers.json"
    mock = DATA / "mock_solver.sh"
    config.write_text(json.dumps({"solvers": {s: {"command": f"sh {mock} {s} {{instance}}"} for s in ("s1", "s2", "s3", "s4")}}))
    assert main(["run", "--schedule", str(sched), "--solvers-config", str(config), "--instance", str(inst),
                 "--out", str(tmp_path / "t.json")]) == 1


def test_run_needs_a_schedule(tmp_path, capsys):
    config = tmp_path / "solvers.json"
    config.write_text(json.dumps({"solvers": {}}))
    inst = tmp_path / "p.txt"
    inst.write_text("x")
    assert main(["run", "--solvers-config", str(config), "--instance", str(inst)]) == 2
