"""Learning-curve figures from run CSVs: a planning-step sweep chart and a
world-model ablation chart, each written as a PNG with a plaintext table
fallback. Series are taken verbatim from the CSVs (no smoothing)."""
from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .experiments import read_metrics_csv

_REQUIRED_COLUMNS = {"epoch", "variant", "K", "success"}


class PlotFormatError(ValueError):
    pass


def _run_label(variant: str, k: int) -> str:
    if variant == "dqn":
        return "DQN"
    if variant == "ddq":
        return f"DDQ({k})"
    if variant == "dqn-k":
        return f"DQN({k})"
    if variant == "ddq-rand-init":
        return f"DDQ({k}, rand-init)"
    if variant == "ddq-fixed-wm":
        return f"DDQ({k}, fixed wm)"
    return f"{variant}({k})"


def load_series(csv_dir: Path) -> dict[str, dict]:
    """Per-(variant, K) mean success curves across seed CSVs.

    Returns {label: {"variant": str, "k": int, "epochs": [..], "success": [..]}}.
    """
    csv_dir = Path(csv_dir)
    paths = sorted(p for p in csv_dir.glob("*.csv") if p.name != "summary.csv")
    if not paths:
        raise PlotFormatError(f"no run CSVs found in {csv_dir}")
    per_run: dict[tuple[str, int], list[dict[int, float]]] = defaultdict(list)
    for path in paths:
        rows = read_metrics_csv(path)
        if not rows or not _REQUIRED_COLUMNS.issubset(rows[0]):
            raise PlotFormatError(f"{path} missing columns {_REQUIRED_COLUMNS}")
        evals = {int(r["epoch"]): float(r["success"]) for r in rows if r["success"] != ""}
        if not evals:
            continue
        variant = rows[0]["variant"]
        initial_k = int(rows[0]["K"])
        per_run[(variant, initial_k)].append(evals)
    series: dict[str, dict] = {}
    for (variant, k), runs in per_run.items():
        epochs = sorted(set.intersection(*(set(r) for r in runs)))
        values = [float(np.mean([r[e] for r in runs])) for e in epochs]
        series[_run_label(variant, k)] = {
            "variant": variant, "k": k, "epochs": epochs, "success": values,
        }
    return series


def _write_table(path: Path, series: dict[str, dict]) -> None:
    labels = sorted(series)
    epochs = sorted({e for s in series.values() for e in s["epochs"]})
    col = max(12, max(len(l) for l in labels) + 2)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch".ljust(8) + "".join(l.rjust(col) for l in labels) + "\n")
        for e in epochs:
            cells = []
            for l in labels:
                s = series[l]
                cells.append(
                    ("%.4f" % s["success"][s["epochs"].index(e)]).rjust(col)
                    if e in s["epochs"] else "".rjust(col)
                )
            fh.write(str(e).ljust(8) + "".join(cells) + "\n")


def _plot_figure(series: dict[str, dict], title: str, png_path: Path, txt_path: Path) -> None:
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for label in sorted(series, key=lambda l: (series[l]["variant"], series[l]["k"])):
        s = series[label]
        ax.plot(s["epochs"], s["success"], marker="o", markersize=2.5, label=label)
    ax.set_xlabel("epoch")
    ax.set_ylabel("success rate")
    ax.set_title(title)
    ax.set_ylim(0.0, 1.0)
    ax.grid(alpha=0.3, linestyle="--", linewidth=0.5)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(png_path, dpi=150)
    plt.close(fig)
    _write_table(txt_path, series)


def plot_curves(csv_dir: Path, out_dir: Path) -> dict[str, dict[str, dict]]:
    """Render the learning-curve artifacts; returns the plotted series per
    figure so callers can verify values against the CSVs."""
    out_dir = Path(out_dir)
    series = load_series(csv_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    figures: dict[str, dict[str, dict]] = {}

    sweep = {l: s for l, s in series.items() if s["variant"] in ("dqn", "ddq")}
    if sweep:
        _plot_figure(
            sweep,
            "Planning-step sweep",
            out_dir / "k_sweep.png",
            out_dir / "k_sweep.txt",
        )
        figures["k_sweep"] = sweep

    ddq_ks = [s["k"] for s in series.values() if s["variant"] == "ddq"]
    if ddq_ks:
        k_star = max(ddq_ks)
        ablation = {
            l: s for l, s in series.items()
            if s["variant"] == "dqn"
            or (s["variant"] != "dqn" and s["k"] == k_star)
        }
        if len(ablation) > 1:
            _plot_figure(
                ablation,
                f"World-model ablation (K={k_star})",
                out_dir / "world_model_ablation.png",
                out_dir / "world_model_ablation.txt",
            )
            figures["world_model_ablation"] = ablation
    return figures
