"""Runs a validated config end to end: dispatch, result files, manifest.

Tabular results go to CSV (RFC-4180, UTF-8, header row) or JSONL; per-user
trajectories are always JSONL; every run writes summary.json and
run_manifest.json. All files are written atomically (temp file + rename) and
their bytes depend only on the config, so reruns at any worker count match.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import os
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, to_dict
from .decomp import (
    DecompositionReport,
    delta_epe,
    epe_modified,
    epe_unmodified,
    optimal_constant_shift,
    verify_identity,
)
from .errors import InputError
from .policies import constant_shift, shrinkage
from .showcase import ShowcaseConfig, compare_generalization, run_ab_test, run_showcase

try:
    VERSION = metadata.version("predmod")
except metadata.PackageNotFoundError:
    VERSION = "0.0.0"

FORMATS = ("csv", "jsonl")

DECOMP_COLUMNS = ("x", "sigma2", "sigma2_tilde", "bias", "var_fhat", "cate", "epe", "epe_tilde")
DECOMP_EXTRAS = (
    "f", "sigma2_se", "sigma2_tilde_se", "bias_se", "var_fhat_se", "cate_se",
    "epe_se", "epe_tilde_se", "cate_analytic", "n_train", "reps",
)


def _jsonable(value):
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"not JSON-serializable: {type(value).__name__}")


def canonical_json(data) -> str:
    return json.dumps(data, indent=2, sort_keys=True, default=_jsonable) + "\n"


def config_sha256(config: ExperimentConfig) -> str:
    """Hash of the canonical serialized config; recomputable from the file."""
    return hashlib.sha256(canonical_json(to_dict(config)).encode("utf-8")).hexdigest()


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(text.encode("utf-8"))
    os.replace(tmp, path)


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, np.floating):
        value = float(value)
    elif isinstance(value, np.integer):
        value = int(value)
    return str(value)


def _csv_text(fieldnames, rows) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(fieldnames))
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _cell(row.get(k)) for k in fieldnames})
    return buf.getvalue()


def _jsonl_text(rows) -> str:
    return "".join(json.dumps(r, sort_keys=True, default=_jsonable) + "\n" for r in rows)


def _emit_table(out_dir: Path, stem: str, fieldnames, rows, fmt: str) -> Path:
    if fmt == "csv":
        path = out_dir / f"{stem}.csv"
        _atomic_write(path, _csv_text(fieldnames, rows))
    else:
        path = out_dir / f"{stem}.jsonl"
        _atomic_write(path, _jsonl_text([{k: r.get(k) for k in fieldnames} for r in rows]))
    return path


def _x_cell(probe: tuple[float, ...]):
    return probe[0] if len(probe) == 1 else ";".join(repr(v) for v in probe)


def decomposition_row(report: DecompositionReport) -> dict:
    """One long-format row per probe; modified-only fields stay empty for
    unmodified reports."""
    return {
        "x": _x_cell(report.probe_x),
        "sigma2": report.sigma2,
        "sigma2_tilde": report.sigma2_tilde,
        "bias": report.bias,
        "var_fhat": report.var_fhat,
        "cate": report.cate,
        "epe": report.epe_direct,
        "epe_tilde": report.epe_tilde_direct,
        "f": report.probe_f,
        "sigma2_se": report.sigma2_se,
        "sigma2_tilde_se": report.sigma2_tilde_se,
        "bias_se": report.bias_se,
        "var_fhat_se": report.var_fhat_se,
        "cate_se": report.cate_se,
        "epe_se": report.epe_direct_se,
        "epe_tilde_se": report.epe_tilde_direct_se,
        "cate_analytic": report.cate_analytic,
        "n_train": report.n_train,
        "reps": report.reps,
    }


def _identity_dict(report: DecompositionReport) -> dict:
    check = verify_identity(report)
    out = dataclasses.asdict(check)
    out["ok"] = check.ok
    return out


def _showcase_config(config: ExperimentConfig) -> ShowcaseConfig:
    return ShowcaseConfig(
        truth=config.truth, spec=config.spec, policy=config.policy,
        n_train=config.n_train, n_showcase=config.n_showcase,
        horizon_steps=config.horizon_steps, seed=config.seed,
        customer_effect=config.customer_effect, ab_replicates=config.ab_replicates,
    )


# --- experiment bodies ------------------------------------------------------
# Each returns (summary, figure_data, written paths). figure_data carries the
# arrays the figure renderers need so nothing is recomputed.


def _run_decompose(config, out_dir, workers, fmt):
    rows, identities = [], []
    for probe in config.probes:
        report = epe_modified(
            config.truth, config.spec, config.policy, config.n_train, probe,
            config.reps, config.seed, workers=workers,
        )
        rows.append(decomposition_row(report))
        identities.append(_identity_dict(report))
    path = _emit_table(out_dir, "decomposition", DECOMP_COLUMNS + DECOMP_EXTRAS, rows, fmt)
    summary = {
        "experiment": config.experiment,
        "policy": config.policy.variant,
        "probes": [list(p) for p in config.probes],
        "rows": rows,
        "identity_checks": identities,
        "identity_ok": all(c["ok"] for c in identities),
    }
    return summary, {"rows": rows}, [path]


def _shift_rows(probe, curve):
    x = _x_cell(probe)
    return [
        {"x": x, "shift": s, "epe_tilde": m, "se": se}
        for s, m, se in zip(curve.shifts, curve.epe_tilde, curve.se)
    ]


def _run_optimal_shift(config, out_dir, workers, fmt):
    rows, per_probe = [], []
    for probe in config.probes:
        curve = optimal_constant_shift(
            config.truth, config.spec, config.n_train, probe, config.shift_grid,
            config.reps, config.seed, workers=workers,
        )
        rows.extend(_shift_rows(probe, curve))
        per_probe.append({
            "x": list(probe),
            "argmin_shift": curve.argmin_shift,
            "epe_unmodified": curve.epe_unmodified,
            "min_epe_tilde": min(curve.epe_tilde),
            "shifts": list(curve.shifts),
            "epe_tilde": list(curve.epe_tilde),
            "se": list(curve.se),
        })
    path = _emit_table(out_dir, "shift_curve", ("x", "shift", "epe_tilde", "se"), rows, fmt)
    summary = {
        "experiment": config.experiment,
        "probes": [p["x"] for p in per_probe],
        "curves": per_probe,
    }
    return summary, {"curves": per_probe}, [path]


def _trajectory_row(user, record) -> dict:
    traj = record.trajectory
    return {
        "user": user,
        "x": list(record.x),
        "y_hat": record.y_hat,
        "steps": [{"t": t, "level": b, "observed": y} for t, b, y in traj.steps],
        "rewards": list(traj.rewards),
        "final_level": traj.final_level,
        "final_outcome": traj.final_outcome,
    }


def _run_showcase(config, out_dir, workers, fmt):
    result = run_showcase(_showcase_config(config))
    rows = [
        {
            "user": r.user, "x": _x_cell(r.x), "y_hat": r.y_hat,
            "y_nat": r.y_nat, "y_mod": r.y_mod, "error": r.error,
        }
        for r in result.records
    ]
    paths = [_emit_table(out_dir, "users", ("user", "x", "y_hat", "y_nat", "y_mod", "error"), rows, fmt)]
    if config.policy.variant == "sequential_agent":
        traj_path = out_dir / "trajectories.jsonl"
        _atomic_write(traj_path, _jsonl_text(
            [_trajectory_row(r.user, r) for r in result.records]
        ))
        paths.append(traj_path)
    errors = [r.error for r in result.records]
    summary = {
        "experiment": config.experiment,
        "policy": config.policy.variant,
        "n": result.n,
        "mse": result.mse,
        "config_sha256": result.config_sha256,
    }
    figure_data = {
        "errors": errors,
        "y_hat": [r.y_hat for r in result.records],
        "y_mod": [r.y_mod for r in result.records],
        "y_nat": [r.y_nat for r in result.records],
        "mse": result.mse,
    }
    return summary, figure_data, paths


def _run_generalization(config, out_dir, workers, fmt):
    report = compare_generalization(_showcase_config(config))
    summary = {
        "experiment": config.experiment,
        "policy": config.policy.variant,
        "mse_showcase": report.mse_showcase,
        "mse_fresh": report.mse_fresh,
        "ratio": report.ratio if report.ratio != float("inf") else None,
        "n": report.n,
    }
    return summary, dict(summary), []


def _run_ab_test(config, out_dir, workers, fmt):
    report = run_ab_test(_showcase_config(config))
    rows = [
        {
            "replicate": i,
            "t_on": float(report.t_on[i]), "diff_on": float(report.diff_on[i]),
            "t_off": float(report.t_off[i]), "diff_off": float(report.diff_off[i]),
        }
        for i in range(report.replicates)
    ]
    path = _emit_table(
        out_dir, "replicates", ("replicate", "t_on", "diff_on", "t_off", "diff_off"), rows, fmt
    )
    summary = {
        "experiment": config.experiment,
        "policy": config.policy.variant,
        "n": report.n,
        "replicates": report.replicates,
        "customer_effect": report.customer_effect,
        "group_sizes": [len(report.group_a), len(report.group_b)],
        "headline": {
            "mean_a": report.mean_a, "mean_b": report.mean_b, "diff": report.diff,
            "t_stat": report.t_stat, "dof": report.dof, "p_value": report.p_value,
        },
        "alpha": report.alpha,
        "rejection_rate_on": report.rejection_rate_on,
        "rejection_rate_off": report.rejection_rate_off,
        "ks_stat": report.ks_stat,
        "ks_critical": report.ks_critical,
        "ks_alpha": report.ks_alpha,
    }
    figure_data = {
        "t_on": report.t_on.tolist(), "t_off": report.t_off.tolist(),
        "ks_stat": report.ks_stat, "ks_critical": report.ks_critical,
    }
    return summary, figure_data, [path]


def scenario1_result(config: ExperimentConfig, workers: int = 1) -> dict:
    """Well-specified large-sample regime at one probe.

    Constant shifts displace outcomes away from an already-centered prediction,
    so no nonzero shift lowers error; shrinking outcomes toward predictions
    lowers it unconditionally.
    """
    truth, spec = config.truth, config.spec
    probe = config.probes[0]
    unmod = epe_unmodified(truth, spec, config.n_train, probe, config.reps, config.seed, workers=workers)
    curve = optimal_constant_shift(
        truth, spec, config.n_train, probe, config.shift_grid, config.reps,
        config.seed, workers=workers,
    )
    # CRN makes epe_tilde - epe_unmodified an exactly paired mean per shift
    deltas = [m - curve.epe_unmodified for m in curve.epe_tilde]
    improving = [
        s != 0.0 and d < 0 and abs(d) > 3 * se
        for s, d, se in zip(curve.shifts, deltas, curve.se)
    ]
    shr = epe_modified(truth, spec, shrinkage(0.5), config.n_train, probe,
                       config.reps, config.seed, workers=workers)
    d = delta_epe(unmod, shr)
    shrinkage_improves = d.delta_direct < 0 and abs(d.delta_direct) > 3 * d.delta_direct_se
    shift_never_improves = not any(improving)
    return {
        "experiment": "scenario1",
        "probe": list(probe),
        "bias": unmod.bias,
        "bias_se": unmod.bias_se,
        "epe_unmodified": unmod.epe_direct,
        "shifts": list(curve.shifts),
        "epe_tilde": list(curve.epe_tilde),
        "delta": deltas,
        "se": list(curve.se),
        "constant_shift_never_improves": shift_never_improves,
        "shrinkage_delta": d.delta_direct,
        "shrinkage_delta_se": d.delta_direct_se,
        "shrinkage_improves": shrinkage_improves,
        "passed": shift_never_improves and shrinkage_improves,
        "decomposition_reports": {"unmodified": unmod, "shrinkage": shr},
    }


def scenario2_result(config: ExperimentConfig, workers: int = 1) -> dict:
    """Misspecified-model regime: per-probe bias with the best constant shift
    counteracting it (opposite sign, matching size within one grid step)."""
    truth, spec = config.truth, config.spec
    step = config.shift_grid[1] - config.shift_grid[0]
    probes_out, reports = [], []
    for probe in config.probes:
        unmod = epe_unmodified(truth, spec, config.n_train, probe, config.reps,
                               config.seed, workers=workers)
        curve = optimal_constant_shift(
            truth, spec, config.n_train, probe, config.shift_grid, config.reps,
            config.seed, workers=workers,
        )
        best = curve.argmin_shift
        mod = epe_modified(truth, spec, constant_shift(best), config.n_train,
                           probe, config.reps, config.seed, workers=workers)
        reports.append(mod)
        threshold = max(3 * unmod.bias_se, step)
        qualifies = abs(unmod.bias) > threshold
        matched = bool(
            qualifies
            and best * unmod.bias < 0
            and abs(best - (-unmod.bias)) <= step + 3 * unmod.bias_se
        )
        probes_out.append({
            "x": list(probe),
            "bias": unmod.bias,
            "bias_se": unmod.bias_se,
            "argmin_shift": best,
            "epe_unmodified": curve.epe_unmodified,
            "shifts": list(curve.shifts),
            "epe_tilde": list(curve.epe_tilde),
            "se": list(curve.se),
            "qualifies": qualifies,
            "sign_matched": matched,
        })
    qualifying = [p for p in probes_out if p["qualifies"]]
    passed = bool(
        any(p["bias"] < 0 and p["sign_matched"] for p in qualifying)
        and any(p["bias"] > 0 and p["sign_matched"] for p in qualifying)
        and all(p["sign_matched"] for p in qualifying)
    )
    return {
        "experiment": "scenario2",
        "grid_step": step,
        "probes": probes_out,
        "passed": passed,
        "decomposition_reports": reports,
    }


SCENARIO3_REFERENCE_N = 10_000
SCENARIO3_REFERENCE_REPS = 2_000


def scenario3_result(config: ExperimentConfig, workers: int = 1) -> dict:
    """Small-sample regime: how much of EPE is model variance at each probe,
    against the same model trained on a large reference sample."""
    truth, spec = config.truth, config.spec
    probes_out, reports = [], []
    ref_reps = min(config.reps, SCENARIO3_REFERENCE_REPS)
    for probe in config.probes:
        small = epe_unmodified(truth, spec, config.n_train, probe, config.reps,
                               config.seed, workers=workers)
        ref = epe_unmodified(truth, spec, SCENARIO3_REFERENCE_N, probe, ref_reps,
                             config.seed, workers=workers)
        reports.extend([small, ref])
        probes_out.append({
            "x": list(probe),
            "var_share": small.var_fhat / small.epe_direct,
            "var_fhat": small.var_fhat,
            "epe": small.epe_direct,
            "bias": small.bias,
            "sigma2": small.sigma2,
            "reference_var_share": ref.var_fhat / ref.epe_direct,
            "reference_epe": ref.epe_direct,
        })
    target = [0.5] if [0.5] in [p["x"] for p in probes_out] else probes_out[0]["x"]
    target_row = next(p for p in probes_out if p["x"] == target)
    passed = bool(target_row["var_share"] > 0.5)
    return {
        "experiment": "scenario3",
        "n_train": config.n_train,
        "reference_n_train": SCENARIO3_REFERENCE_N,
        "target_probe": target,
        "target_var_share": target_row["var_share"],
        "probes": probes_out,
        "passed": passed,
        "decomposition_reports": reports,
    }


def _strip_reports(result: dict) -> dict:
    return {k: v for k, v in result.items() if k != "decomposition_reports"}


def _run_scenario1(config, out_dir, workers, fmt):
    result = scenario1_result(config, workers)
    reports = result["decomposition_reports"]
    rows = [decomposition_row(reports["unmodified"]), decomposition_row(reports["shrinkage"])]
    paths = [
        _emit_table(out_dir, "decomposition", DECOMP_COLUMNS + DECOMP_EXTRAS, rows, fmt),
        _emit_table(out_dir, "shift_curve", ("x", "shift", "epe_tilde", "se"), [
            {"x": _x_cell(tuple(result["probe"])), "shift": s, "epe_tilde": m, "se": se}
            for s, m, se in zip(result["shifts"], result["epe_tilde"], result["se"])
        ], fmt),
    ]
    summary = _strip_reports(result)
    return summary, summary, paths


def _run_scenario2(config, out_dir, workers, fmt):
    result = scenario2_result(config, workers)
    rows = [decomposition_row(r) for r in result["decomposition_reports"]]
    shift_rows = []
    for p in result["probes"]:
        x = _x_cell(tuple(p["x"]))
        shift_rows.extend(
            {"x": x, "shift": s, "epe_tilde": m, "se": se}
            for s, m, se in zip(p["shifts"], p["epe_tilde"], p["se"])
        )
    paths = [
        _emit_table(out_dir, "decomposition", DECOMP_COLUMNS + DECOMP_EXTRAS, rows, fmt),
        _emit_table(out_dir, "shift_curve", ("x", "shift", "epe_tilde", "se"), shift_rows, fmt),
    ]
    summary = _strip_reports(result)
    return summary, summary, paths


def _run_scenario3(config, out_dir, workers, fmt):
    result = scenario3_result(config, workers)
    rows = [decomposition_row(r) for r in result["decomposition_reports"]]
    paths = [_emit_table(out_dir, "decomposition", DECOMP_COLUMNS + DECOMP_EXTRAS, rows, fmt)]
    summary = _strip_reports(result)
    return summary, summary, paths


_RUNNERS = {
    "decompose": _run_decompose,
    "optimal-shift": _run_optimal_shift,
    "showcase": _run_showcase,
    "generalization": _run_generalization,
    "ab-test": _run_ab_test,
    "scenario1": _run_scenario1,
    "scenario2": _run_scenario2,
    "scenario3": _run_scenario3,
}


@dataclass(frozen=True)
class RunResult:
    out_dir: Path
    outputs: tuple[Path, ...]
    manifest_path: Path
    summary: dict


def run_experiment(
    config: ExperimentConfig, out_dir: str | Path, workers: int = 1, fmt: str = "csv",
) -> RunResult:
    """Execute one experiment and write its artifacts under out_dir.

    Result bytes are a pure function of the config; only run_manifest.json
    carries volatile fields (timestamps, duration).
    """
    if fmt not in FORMATS:
        raise InputError(f"format: must be one of {list(FORMATS)}, got {fmt!r}")
    if workers < 1:
        raise InputError(f"workers: must be >= 1, got {workers}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    created = datetime.now(timezone.utc).isoformat(timespec="seconds")
    summary, figure_data, outputs = _RUNNERS[config.experiment](config, out, workers, fmt)
    summary = dict(summary)
    summary["seed"] = config.seed
    summary["config_sha256"] = config_sha256(config)
    summary_path = out / "summary.json"
    _atomic_write(summary_path, canonical_json(summary))
    outputs = list(outputs) + [summary_path]
    if config.figures:
        from . import figures

        outputs.extend(figures.render(config.experiment, figure_data, out))
    digest = config_sha256(config)
    manifest = {
        "config_sha256": digest,
        "seed": config.seed,
        "version": VERSION,
        "created_utc": created,
        "duration_seconds": round(time.perf_counter() - started, 3),
        "config": to_dict(config),
        "outputs": [
            {
                "path": p.name,
                "sha256": hashlib.sha256(p.read_bytes()).hexdigest(),
                "bytes": p.stat().st_size,
            }
            for p in outputs
        ],
    }
    manifest_path = out / "run_manifest.json"
    _atomic_write(manifest_path, canonical_json(manifest))
    return RunResult(
        out_dir=out, outputs=tuple(outputs), manifest_path=manifest_path, summary=summary,
    )
