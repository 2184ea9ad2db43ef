"""Headless figure rendering for the report path.

Each renderer consumes the data the runner already computed and writes one PNG
next to the tabular outputs. PNG metadata is stripped so bytes depend only on
the data and the matplotlib version.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_SAVE_ARGS = {"dpi": 120, "metadata": {"Software": None}}


def _save(fig, path: Path) -> Path:
    fig.savefig(path, **_SAVE_ARGS)
    plt.close(fig)
    return path


def _fmt_x(x) -> str:
    if isinstance(x, (list, tuple)):
        return "(" + ", ".join(f"{v:g}" for v in x) + ")" if len(x) > 1 else f"{x[0]:g}"
    return f"{x:g}"


def _component_bars(ax, labels, noise, gap2, var, direct):
    """Stacked error components with the directly measured total as a dot."""
    idx = np.arange(len(labels))
    ax.bar(idx, noise, label="noise")
    ax.bar(idx, gap2, bottom=noise, label="(CATE+bias)$^2$" if any(gap2) else "bias$^2$")
    ax.bar(idx, var, bottom=np.asarray(noise) + np.asarray(gap2), label="Var($\\hat f$)")
    ax.plot(idx, direct, "ko", label="direct", zorder=3)
    ax.set_xticks(idx)
    ax.set_xticklabels(labels)
    ax.set_ylabel("squared error")
    ax.legend(fontsize=8)


def render_decomposition(rows, path: Path) -> Path:
    labels, noise, gap2, var, direct = [], [], [], [], []
    for row in rows:
        modified = row.get("sigma2_tilde") is not None
        labels.append(f"x={_fmt_x(row['x'])}\nn={row['n_train']}")
        noise.append(row["sigma2_tilde"] if modified else row["sigma2"])
        cate = row["cate"] if modified else 0.0
        gap2.append((cate + row["bias"]) ** 2)
        var.append(row["var_fhat"])
        direct.append(row["epe_tilde"] if modified else row["epe"])
    fig, ax = plt.subplots(figsize=(1.6 + 1.1 * len(rows), 4))
    _component_bars(ax, labels, noise, gap2, var, direct)
    ax.set_title("error decomposition")
    fig.tight_layout()
    return _save(fig, path)


def render_shift_curves(curves, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    for curve in curves:
        shifts = np.asarray(curve["shifts"])
        vals = np.asarray(curve["epe_tilde"])
        label = f"x={_fmt_x(curve['x'])}"
        (line,) = ax.plot(shifts, vals, label=label)
        if "argmin_shift" in curve:
            ax.axvline(curve["argmin_shift"], color=line.get_color(), ls=":", lw=1)
        if "epe_unmodified" in curve:
            ax.axhline(curve["epe_unmodified"], color=line.get_color(), ls="--", lw=1)
    ax.set_xlabel("constant shift")
    ax.set_ylabel("modified error")
    ax.set_title("error vs. outcome shift (dashed: no modification)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def render_showcase(data, path: Path) -> Path:
    y_hat = np.asarray(data["y_hat"])
    fig, (left, right) = plt.subplots(1, 2, figsize=(9, 4))
    left.scatter(y_hat, data["y_nat"], s=6, alpha=0.35, label="natural")
    left.scatter(y_hat, data["y_mod"], s=6, alpha=0.35, label="modified")
    lims = [min(y_hat.min(), 0), max(y_hat.max(), 1)]
    left.plot(lims, lims, "k--", lw=1)
    left.set_xlabel("prediction")
    left.set_ylabel("outcome")
    left.legend(fontsize=8)
    right.hist(data["errors"], bins=40)
    right.axvline(0.0, color="k", lw=1)
    right.set_xlabel("outcome - prediction")
    right.set_title(f"mse = {data['mse']:.3g}")
    fig.tight_layout()
    return _save(fig, path)


def render_generalization(data, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(4, 4))
    ax.bar([0, 1], [data["mse_showcase"], data["mse_fresh"]])
    ax.set_xticks([0, 1])
    ax.set_xticklabels(["showcase", "fresh users"])
    ax.set_ylabel("mse")
    ratio = data.get("ratio")
    ax.set_title("gap ratio: " + (f"{ratio:.2f}x" if ratio is not None else "inf"))
    fig.tight_layout()
    return _save(fig, path)


def render_ab_test(data, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    bins = np.histogram_bin_edges(np.concatenate([data["t_on"], data["t_off"]]), bins=50)
    ax.hist(data["t_off"], bins=bins, alpha=0.55, label="modification off", density=True)
    ax.hist(data["t_on"], bins=bins, alpha=0.55, label="modification on", density=True)
    ax.set_xlabel("Welch t statistic")
    ax.set_ylabel("density")
    ax.set_title(f"KS = {data['ks_stat']:.4f} (critical {data['ks_critical']:.4f})")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def render_scenario1(data, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(data["shifts"], data["epe_tilde"], label="constant shift")
    ax.axhline(data["epe_unmodified"], color="k", ls="--", lw=1, label="no modification")
    ax.axhline(
        data["epe_unmodified"] + data["shrinkage_delta"],
        color="tab:red", ls="-.", lw=1, label="shrinkage(0.5)",
    )
    ax.set_xlabel("constant shift")
    ax.set_ylabel("modified error")
    ax.set_title(f"x={_fmt_x(data['probe'])}: shifts cannot beat shrinkage")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def render_scenario2(data, path: Path) -> Path:
    probes = data["probes"]
    fig, axes = plt.subplots(1, len(probes), figsize=(3.2 * len(probes), 3.6), squeeze=False)
    for ax, p in zip(axes[0], probes):
        ax.plot(p["shifts"], p["epe_tilde"])
        ax.axvline(-p["bias"], color="tab:green", ls="--", lw=1, label="-bias")
        ax.axvline(p["argmin_shift"], color="tab:red", ls=":", lw=1, label="best shift")
        ax.set_title(f"x={_fmt_x(p['x'])}")
        ax.set_xlabel("shift")
        ax.legend(fontsize=7)
    axes[0][0].set_ylabel("modified error")
    fig.tight_layout()
    return _save(fig, path)


def render_scenario3(data, path: Path) -> Path:
    probes = data["probes"]
    idx = np.arange(len(probes))
    width = 0.38
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.bar(idx - width / 2, [p["var_share"] for p in probes], width,
           label=f"n={data['n_train']}")
    ax.bar(idx + width / 2, [p["reference_var_share"] for p in probes], width,
           label=f"n={data['reference_n_train']}")
    ax.axhline(0.5, color="k", ls="--", lw=1)
    ax.set_xticks(idx)
    ax.set_xticklabels([f"x={_fmt_x(p['x'])}" for p in probes])
    ax.set_ylabel("Var($\\hat f$) share of error")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def render(experiment: str, data: dict, out_dir: Path) -> list[Path]:
    """Render the figure(s) for one experiment; returns written paths."""
    out = []
    if experiment == "decompose":
        out.append(render_decomposition(data["rows"], out_dir / "decomposition.png"))
    elif experiment == "optimal-shift":
        out.append(render_shift_curves(data["curves"], out_dir / "shift_curve.png"))
    elif experiment == "showcase":
        out.append(render_showcase(data, out_dir / "showcase.png"))
    elif experiment == "generalization":
        out.append(render_generalization(data, out_dir / "generalization.png"))
    elif experiment == "ab-test":
        out.append(render_ab_test(data, out_dir / "ab_test.png"))
    elif experiment == "scenario1":
        out.append(render_scenario1(data, out_dir / "scenario1.png"))
    elif experiment == "scenario2":
        out.append(render_scenario2(data, out_dir / "scenario2.png"))
    elif experiment == "scenario3":
        out.append(render_scenario3(data, out_dir / "scenario3.png"))
    return out
