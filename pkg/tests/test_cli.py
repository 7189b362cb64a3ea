import json
from pathlib import Path

import numpy as np
import pytest

from bregproj.cli import main


def write_config(path: Path, doc: dict) -> str:
    path.write_text(json.dumps(doc, indent=2), encoding="utf-8")
    return str(path)


def halving_doc(**overrides):
    doc = {
        "name": "halving",
        "legendre": "energy",
        "dim": 1,
        "x0": [1.0],
        "set": "universal",
        "operator": {"kind": "projector",
                     "set": {"halfspace": {"a": [1.0], "b": 0.0}}},
        "tolerances": {"fix": 1e-10, "step": 1e-10},
        "max_iter": 100,
    }
    doc.update(overrides)
    return doc


def test_run_halving_writes_trace_and_summary(tmp_path, capsys):
    cfg = write_config(tmp_path / "halving.json", halving_doc())
    code = main(["run", "--config", cfg, "--out", str(tmp_path)])
    assert code == 0
    out = capsys.readouterr().out
    trace_path = tmp_path / "halving_trace.csv"
    summary_path = tmp_path / "halving_summary.json"
    assert trace_path.exists() and summary_path.exists()
    summary = json.loads(summary_path.read_text())
    assert summary["outcome"] == "converged"
    assert abs(summary["final_point"][0]) <= 1e-8
    assert summary["total_step_distance"] <= 0.5 + 1e-8
    assert "halving_trace.csv" in out


def test_run_then_check_round_trip(tmp_path):
    cfg = write_config(tmp_path / "halving.json", halving_doc())
    assert main(["run", "--config", cfg, "--out", str(tmp_path), "--quiet"]) == 0
    assert main(["check", str(tmp_path / "halving_trace.csv"), "--quiet"]) == 0


def test_check_flags_corrupted_trace(tmp_path, capsys):
    cfg = write_config(tmp_path / "halving.json", halving_doc())
    main(["run", "--config", cfg, "--out", str(tmp_path), "--quiet"])
    trace_path = tmp_path / "halving_trace.csv"
    lines = trace_path.read_text().splitlines()
    # swap the iterate columns of two data rows
    header_at = next(i for i, l in enumerate(lines) if l.startswith("n,"))
    r1, r2 = header_at + 2, header_at + 6
    c1, c2 = lines[r1].split(","), lines[r2].split(",")
    c1[6], c2[6] = c2[6], c1[6]
    lines[r1], lines[r2] = ",".join(c1), ",".join(c2)
    trace_path.write_text("\n".join(lines) + "\n")
    code = main(["check", str(trace_path)])
    assert code != 0
    out = capsys.readouterr().out
    assert "violation" in out


def test_check_empty_trace_warns_and_passes(tmp_path, capsys):
    trace_path = tmp_path / "empty_trace.csv"
    trace_path.write_text(
        "# bregproj-trace v1\n# name=empty\n# legendre=energy\n# dim=1\n# x0=0\n"
        '# c0={"halfspaces": []}\n# outcome=unknown\n'
        "n,Dxn_x0,Dstep,cum,inner_sweeps,status,x_0,y_0\n")
    assert main(["check", str(trace_path)]) == 0
    assert "empty trace" in capsys.readouterr().out


def test_check_malformed_trace_is_data_error(tmp_path):
    trace_path = tmp_path / "bad.csv"
    trace_path.write_text("not,a,trace\n1,2,3\n")
    assert main(["check", str(trace_path)]) == 65


def test_check_missing_file_is_data_error(tmp_path):
    assert main(["check", str(tmp_path / "nope.csv")]) == 65


def test_missing_x0_names_the_field(tmp_path, capsys):
    doc = halving_doc()
    del doc["x0"]
    cfg = write_config(tmp_path / "bad.json", doc)
    code = main(["run", "--config", cfg, "--out", str(tmp_path)])
    assert code == 65
    assert "x0" in capsys.readouterr().err


def test_invalid_json_is_data_error(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    assert main(["run", "--config", str(path), "--out", str(tmp_path)]) == 65
    assert "invalid JSON" in capsys.readouterr().err


def test_infeasible_scenario_exit_code(tmp_path):
    doc = halving_doc(
        name="infeasible-box",
        x0=[0.5],
        set={"box": {"lo": [0.0], "hi": [1.0]}},
        operator={"kind": "affine-map", "A": 1.0, "b": [2.0]},
        max_iter=20,
    )
    cfg = write_config(tmp_path / "inf.json", doc)
    assert main(["run", "--config", cfg, "--out", str(tmp_path), "--quiet"]) == 3
    summary = json.loads((tmp_path / "infeasible-box_summary.json").read_text())
    assert summary["outcome"] == "infeasible"
    assert summary["infeasible_at"] == 0


def test_diverging_scenario_exit_code(tmp_path):
    doc = halving_doc(
        name="diverging-line",
        x0=[0.5],
        set="universal",
        operator={"kind": "affine-map", "A": 1.0, "b": [2.0]},
        max_iter=500,
        divergence_radius=50.0,
    )
    cfg = write_config(tmp_path / "div.json", doc)
    assert main(["run", "--config", cfg, "--out", str(tmp_path), "--quiet"]) == 2


def test_max_iter_override_and_exit_code(tmp_path):
    cfg = write_config(tmp_path / "halving.json",
                       halving_doc(tolerances={"fix": 1e-15, "step": 1e-15}))
    code = main(["run", "--config", cfg, "--out", str(tmp_path), "--quiet",
                 "--max-iter", "4"])
    assert code == 4
    summary = json.loads((tmp_path / "halving_summary.json").read_text())
    assert summary["iterations"] == 4


def test_project_wedge(tmp_path, capsys):
    doc = {
        "name": "wedge",
        "legendre": "energy",
        "dim": 2,
        "x0": [2.0, 0.0],
        "set": {"halfspaces": [{"a": [1.0, 1.0], "b": 1.0},
                               {"a": [1.0, -1.0], "b": 1.0}]},
    }
    cfg = write_config(tmp_path / "wedge.json", doc)
    assert main(["project", "--config", cfg]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert np.allclose(payload["point"], [1.0, 0.0], atol=1e-8)
    assert np.allclose(payload["multipliers"], [0.5, 0.5], atol=1e-8)
    assert payload["stationarity_residual"] <= 1e-9 * 3.1


def test_project_universal_echoes_anchor(tmp_path, capsys):
    doc = {"name": "free", "legendre": "energy", "dim": 2,
           "x0": [1.0, 2.0], "set": "universal"}
    cfg = write_config(tmp_path / "free.json", doc)
    assert main(["project", "--config", cfg]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["point"] == [1.0, 2.0]


def test_project_infeasible_exit_code(tmp_path, capsys):
    doc = {
        "name": "empty", "legendre": "energy", "dim": 1, "x0": [0.5],
        "set": {"halfspaces": [{"a": [1.0], "b": 0.0},
                               {"a": [-1.0], "b": -1.0}]},
    }
    cfg = write_config(tmp_path / "empty.json", doc)
    assert main(["project", "--config", cfg]) == 3
    payload = json.loads(capsys.readouterr().out)
    assert payload["status"] == "infeasible"
    assert payload["residual_floor"] > 0


def test_bad_usage_exit_code():
    assert main(["run"]) == 64  # missing --config
    assert main(["frobnicate"]) == 64


def test_operator_validation_paths(tmp_path, capsys):
    doc = halving_doc(operator={"kind": "distpow", "p": 0.5,
                                "set": {"halfspace": {"a": [1.0], "b": 0.0}}})
    cfg = write_config(tmp_path / "bad_op.json", doc)
    assert main(["run", "--config", cfg, "--out", str(tmp_path)]) == 65
    assert "operator.p" in capsys.readouterr().err


def test_dimension_mismatch_in_config(tmp_path, capsys):
    doc = halving_doc(x0=[1.0, 2.0])
    cfg = write_config(tmp_path / "mismatch.json", doc)
    assert main(["run", "--config", cfg, "--out", str(tmp_path)]) == 65
    assert "x0" in capsys.readouterr().err


def test_repo_example_configs_run(tmp_path):
    configs = sorted(Path(__file__).resolve().parents[1].glob("configs/*.json"))
    assert configs, "example configs are part of the deliverable"
    for cfg in configs:
        doc = json.loads(cfg.read_text())
        args = ["run", "--config", str(cfg), "--out", str(tmp_path), "--quiet"]
        if "operator" not in doc:
            assert main(["project", "--config", str(cfg), "--quiet"]) in (0, 3)
            continue
        code = main(args)
        assert code in (0, 2, 3, 4)
        trace = tmp_path / f"{doc['name']}_trace.csv"
        if code in (0, 2, 4):
            assert main(["check", str(trace), "--quiet"]) == 0
