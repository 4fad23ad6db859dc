"""Experiment orchestration: variant sweeps across seeds, per-run metrics
CSVs, cross-seed summary tables, and checkpointing. The CLI is a thin shell
over this module; all learning logic lives in the trainer."""
from __future__ import annotations

import csv
import json
import multiprocessing
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import yaml

from .trainer import AgentVariant, DdqTrainer, EpochMetrics, TrainerConfig

METRICS_COLUMNS = (
    "epoch", "variant", "K", "success", "reward", "turns",
    "wm_loss_a", "wm_loss_r", "wm_loss_t",
)
METRICS_SCHEMA_VERSION = 1

SUMMARY_COLUMNS = (
    "label", "variant", "K", "epoch", "seeds",
    "success_mean", "success_std", "reward_mean", "reward_std",
    "turns_mean", "turns_std",
)


@dataclass(frozen=True)
class RunSpec:
    variant: AgentVariant
    k: int
    seed: int

    @property
    def label(self) -> str:
        if self.variant is AgentVariant.DQN:
            return "dqn"
        return f"{self.variant.value}{self.k}"

    @property
    def run_name(self) -> str:
        return f"{self.label}_seed{self.seed}"


@dataclass(frozen=True)
class ExperimentPlan:
    runs: tuple[RunSpec, ...]
    base_config: TrainerConfig = field(default_factory=TrainerConfig)
    eval_checkpoints: tuple[int, ...] = (100, 200, 300)

    def __post_init__(self):
        for cp in self.eval_checkpoints:
            if not 1 <= cp <= self.base_config.epochs:
                raise ValueError(f"checkpoint {cp} outside [1, {self.base_config.epochs}]")


def make_plan(
    variants: list[tuple[AgentVariant, int]],
    seeds: list[int],
    base_config: TrainerConfig,
    eval_checkpoints: tuple[int, ...] | None = None,
) -> ExperimentPlan:
    runs = tuple(
        RunSpec(variant=v, k=k, seed=s) for (v, k) in variants for s in seeds
    )
    checkpoints = eval_checkpoints
    if checkpoints is None:
        default = (100, 200, 300)
        checkpoints = tuple(c for c in default if c <= base_config.epochs) or (
            base_config.epochs,
        )
    return ExperimentPlan(runs=runs, base_config=base_config, eval_checkpoints=checkpoints)


def _format(value, fmt: str) -> str:
    return "" if value is None else fmt % value


def metrics_rows(metrics: list[EpochMetrics]) -> list[list[str]]:
    rows = []
    for m in metrics:
        rows.append([
            str(m.epoch),
            m.variant,
            str(m.k),
            _format(m.success, "%.4f"),
            _format(m.reward, "%.4f"),
            _format(m.turns, "%.4f"),
            _format(m.wm_loss_a, "%.6f"),
            _format(m.wm_loss_r, "%.6f"),
            _format(m.wm_loss_t, "%.6f"),
        ])
    return rows


def write_metrics_csv(metrics: list[EpochMetrics], path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METRICS_COLUMNS)
        writer.writerows(metrics_rows(metrics))


def read_metrics_csv(path: Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def execute_run(spec: RunSpec, base_config: TrainerConfig, out_dir: Path,
                eval_checkpoints: tuple[int, ...]) -> list[EpochMetrics]:
    """Train one (variant, K, seed) run, streaming checkpoints at every
    evaluation epoch and the metrics CSV at the end."""
    config = replace(
        base_config, variant=spec.variant, planning_steps=spec.k, seed=spec.seed
    )
    trainer = DdqTrainer(config)
    ckpt_dir = out_dir / "checkpoints"
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    for _ in range(config.epochs):
        m = trainer.run_epoch()
        if m.success is not None:
            trainer.save_checkpoint(ckpt_dir / f"{spec.run_name}_latest.npz")
            if m.epoch in eval_checkpoints:
                trainer.save_checkpoint(ckpt_dir / f"{spec.run_name}_epoch{m.epoch}.npz")
    write_metrics_csv(trainer.metrics, out_dir / f"{spec.run_name}.csv")
    return trainer.metrics


def _run_job(args):
    spec, base_config, out_dir, checkpoints = args
    metrics = execute_run(spec, base_config, Path(out_dir), checkpoints)
    return spec, metrics


def summarize(plan: ExperimentPlan, results: dict[RunSpec, list[EpochMetrics]]) -> list[dict]:
    """Per-checkpoint means across seeds for each (variant, K) group."""
    import numpy as np

    groups: dict[str, list[RunSpec]] = {}
    for spec in plan.runs:
        groups.setdefault(spec.label, []).append(spec)
    rows = []
    for label in sorted(groups):
        specs = groups[label]
        for checkpoint in plan.eval_checkpoints:
            success, reward, turns = [], [], []
            for spec in specs:
                evals = [
                    m for m in results[spec]
                    if m.success is not None and m.epoch <= checkpoint
                ]
                if evals:
                    success.append(evals[-1].success)
                    reward.append(evals[-1].reward)
                    turns.append(evals[-1].turns)
            if not success:
                continue
            rows.append({
                "label": label,
                "variant": specs[0].variant.value,
                "K": specs[0].k,
                "epoch": checkpoint,
                "seeds": len(success),
                "success_mean": float(np.mean(success)),
                "success_std": float(np.std(success)),
                "reward_mean": float(np.mean(reward)),
                "reward_std": float(np.std(reward)),
                "turns_mean": float(np.mean(turns)),
                "turns_std": float(np.std(turns)),
            })
    return rows


def write_summary_csv(rows: list[dict], path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SUMMARY_COLUMNS)
        for row in rows:
            writer.writerow([
                row["label"], row["variant"], str(row["K"]), str(row["epoch"]),
                str(row["seeds"]),
                "%.4f" % row["success_mean"], "%.4f" % row["success_std"],
                "%.4f" % row["reward_mean"], "%.4f" % row["reward_std"],
                "%.4f" % row["turns_mean"], "%.4f" % row["turns_std"],
            ])


def run_experiment(plan: ExperimentPlan, out_dir: Path, jobs: int = 1):
    """Execute every run in the plan (optionally in parallel processes),
    then write the cross-seed summary. Returns the summary rows."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    job_args = [(spec, plan.base_config, str(out_dir), plan.eval_checkpoints) for spec in plan.runs]
    results: dict[RunSpec, list[EpochMetrics]] = {}
    if jobs > 1 and len(job_args) > 1:
        ctx = multiprocessing.get_context("spawn")
        with ctx.Pool(jobs) as pool:
            for spec, metrics in pool.imap_unordered(_run_job, job_args):
                results[spec] = metrics
    else:
        for args in job_args:
            spec, metrics = _run_job(args)
            results[spec] = metrics
    rows = summarize(plan, results)
    write_summary_csv(rows, out_dir / "summary.csv")
    return rows


_CONFIG_ALIASES = {"k": "planning_steps", "n": "epochs", "l": "max_turns",
                   "c": "target_sync_every", "z": "update_steps"}


def load_trainer_config(path: Path | str, **overrides) -> TrainerConfig:
    """TrainerConfig from a YAML or JSON file, with keyword overrides."""
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh) if path.suffix in (".yaml", ".yml") else json.load(fh)
    data = data or {}
    merged: dict = {}
    for key, value in data.items():
        merged[_CONFIG_ALIASES.get(key.lower(), key)] = value
    merged.update(overrides)
    if "variant" in merged and not isinstance(merged["variant"], AgentVariant):
        merged["variant"] = AgentVariant(merged["variant"])
    return TrainerConfig(**merged)


def save_trainer_config(config: TrainerConfig, path: Path | str) -> None:
    data = asdict(config)
    data["variant"] = config.variant.value
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")
