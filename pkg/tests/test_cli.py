"""Command line behavior: exit codes, error records, and written artifacts."""

import hashlib
import json

import pytest

from predmod import from_dict, to_dict
from predmod.cli import EXIT_IO, EXIT_OK, EXIT_VALIDATION, main
from predmod.runner import config_sha256

TINY = {
    "experiment": "decompose",
    "seed": 11,
    "policy": {"variant": "constant_shift", "delta": 0.05},
    "n_train": 200,
    "reps": 300,
    "figures": False,
}


def _write(tmp_path, data, name="config.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data), encoding="utf-8")
    return p


def test_validate_ok(tmp_path, capsys):
    p = _write(tmp_path, TINY)
    assert main(["validate", str(p)]) == EXIT_OK
    assert capsys.readouterr().out.strip() == "ok"


def test_validate_prints_each_violation(tmp_path, capsys):
    p = _write(tmp_path, {**TINY, "policy": {"variant": "shrinkage", "lam": 1.5}, "reps": 1})
    assert main(["validate", str(p)]) == EXIT_VALIDATION
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 2
    assert "policy.lam: must be in [0.0, 1.0], got 1.5" in lines
    assert any(line.startswith("reps:") for line in lines)


def test_run_rejects_invalid_config_with_error_record(tmp_path, capsys):
    p = _write(tmp_path, {**TINY, "policy": {"variant": "shrinkage", "lam": 1.5}})
    assert main(["run", str(p), "--out-dir", str(tmp_path / "out")]) == EXIT_VALIDATION
    record = json.loads(capsys.readouterr().err)
    assert record["error"]["kind"] == "validation"
    assert "policy.lam: must be in [0.0, 1.0], got 1.5" in record["error"]["violations"]


def test_run_unknown_preset_suggests_alternatives(capsys):
    assert main(["run", "scenario9"]) == EXIT_VALIDATION
    record = json.loads(capsys.readouterr().err)
    assert "scenario1, scenario2, scenario3" in record["error"]["message"]


def test_run_missing_config_file_is_an_io_failure(tmp_path, capsys):
    assert main(["run", str(tmp_path / "absent.json")]) == EXIT_IO
    record = json.loads(capsys.readouterr().err)
    assert record["error"]["kind"] == "io"


def test_run_rejects_zero_workers(tmp_path, capsys):
    p = _write(tmp_path, TINY)
    assert main(["run", str(p), "--workers", "0"]) == EXIT_VALIDATION
    record = json.loads(capsys.readouterr().err)
    assert "workers" in record["error"]["message"]


def test_scenarios_json_catalog(capsys):
    assert main(["scenarios", "--json"]) == EXIT_OK
    catalog = json.loads(capsys.readouterr().out)
    by_kind = {}
    for entry in catalog:
        by_kind.setdefault(entry["kind"], set()).add(entry["name"])
        assert entry["description"]
    assert by_kind["experiment"] == {
        "decompose", "optimal-shift", "showcase", "generalization", "ab-test",
    }
    assert by_kind["preset"] == {"scenario1", "scenario2", "scenario3"}


def test_scenarios_text_mentions_every_name(capsys):
    assert main(["scenarios"]) == EXIT_OK
    out = capsys.readouterr().out
    for name in ("decompose", "ab-test", "scenario2", "[preset]", "[experiment]"):
        assert name in out


def test_run_writes_artifacts_and_recomputable_manifest(tmp_path, capsys):
    p = _write(tmp_path, TINY)
    out = tmp_path / "out"
    assert main(["run", str(p), "--out-dir", str(out)]) == EXIT_OK
    printed = capsys.readouterr().out.strip().splitlines()
    assert str(out / "decomposition.csv") in printed
    assert str(out / "run_manifest.json") in printed

    manifest = json.loads((out / "run_manifest.json").read_text(encoding="utf-8"))
    assert manifest["seed"] == 11
    # the stored hash must be recomputable from the embedded config alone
    assert manifest["config_sha256"] == config_sha256(from_dict(manifest["config"]))
    for entry in manifest["outputs"]:
        blob = (out / entry["path"]).read_bytes()
        assert hashlib.sha256(blob).hexdigest() == entry["sha256"]
        assert len(blob) == entry["bytes"]

    summary = json.loads((out / "summary.json").read_text(encoding="utf-8"))
    assert summary["seed"] == 11
    assert summary["config_sha256"] == manifest["config_sha256"]


def test_run_renders_figures_when_enabled(tmp_path):
    p = _write(tmp_path, {**TINY, "figures": True})
    out = tmp_path / "out"
    assert main(["run", str(p), "--out-dir", str(out)]) == EXIT_OK
    png = out / "decomposition.png"
    assert png.exists()
    assert png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
    manifest = json.loads((out / "run_manifest.json").read_text(encoding="utf-8"))
    assert "decomposition.png" in [e["path"] for e in manifest["outputs"]]


def test_run_jsonl_format(tmp_path):
    p = _write(tmp_path, TINY)
    out = tmp_path / "out"
    assert main(["run", str(p), "--out-dir", str(out), "--format", "jsonl"]) == EXIT_OK
    lines = (out / "decomposition.jsonl").read_text(encoding="utf-8").strip().splitlines()
    rows = [json.loads(line) for line in lines]
    assert rows and all(row["n_train"] == 200 for row in rows)
    assert not (out / "decomposition.csv").exists()


def test_seed_override_changes_results_and_manifest(tmp_path):
    p = _write(tmp_path, TINY)
    outs = {}
    for seed in (1, 2):
        out = tmp_path / f"out{seed}"
        assert main(["run", str(p), "--out-dir", str(out), "--seed", str(seed)]) == EXIT_OK
        manifest = json.loads((out / "run_manifest.json").read_text(encoding="utf-8"))
        assert manifest["seed"] == seed
        assert manifest["config"]["seed"] == seed
        outs[seed] = ((out / "decomposition.csv").read_bytes(), manifest["config_sha256"])
    assert outs[1][0] != outs[2][0]
    assert outs[1][1] != outs[2][1]


def test_same_config_twice_is_byte_identical(tmp_path):
    p = _write(tmp_path, TINY)
    blobs = []
    for tag in ("a", "b"):
        out = tmp_path / tag
        assert main(["run", str(p), "--out-dir", str(out)]) == EXIT_OK
        blobs.append(
            ((out / "decomposition.csv").read_bytes(), (out / "summary.json").read_bytes())
        )
    assert blobs[0] == blobs[1]


def test_round_trip_of_tiny_config():
    cfg = from_dict(TINY)
    assert from_dict(to_dict(cfg)) == cfg
