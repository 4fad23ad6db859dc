"""Command-line entry point: variant training sweeps, learning-curve plots,
and the human-in-the-loop training service."""
from __future__ import annotations

from pathlib import Path

import click

from .experiments import load_trainer_config, make_plan, run_experiment
from .trainer import AgentVariant, TrainerConfig

VARIANT_CHOICES = [v.value for v in AgentVariant]


def _parse_int_list(value: str) -> list[int]:
    return [int(part) for part in value.split(",") if part.strip() != ""]


@click.group()
def main():
    """Deep Dyna-Q dialogue policy learning."""


@main.command()
@click.option("--variant", "variants", multiple=True, default=("ddq",),
              help="Agent variant(s); comma-separated or repeated "
                   f"({', '.join(VARIANT_CHOICES)}).")
@click.option("--k", "ks", default="5", show_default=True,
              help="Planning steps; comma-separated for a sweep.")
@click.option("--seeds", default="5", show_default=True,
              help="Seed count (N means seeds 0..N-1) or explicit comma list.")
@click.option("--epochs", default=300, show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path),
              default=None, help="YAML/JSON file of trainer-config overrides.")
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
@click.option("--jobs", default=1, show_default=True)
@click.option("--eval-every", default=None, type=int)
@click.option("--eval-dialogues", default=None, type=int)
@click.option("--full-fidelity", is_flag=True,
              help="Evaluate with 2000 dialogues per checkpoint.")
def train(variants, ks, seeds, epochs, config_path, out_dir, jobs,
          eval_every, eval_dialogues, full_fidelity):
    """Train one or more agent variants and write per-run metrics CSVs,
    checkpoints, and a cross-seed summary."""
    variant_names: list[str] = []
    for v in variants:
        variant_names.extend(name.strip() for name in v.split(",") if name.strip())
    try:
        chosen = [AgentVariant(name) for name in variant_names]
    except ValueError as exc:
        raise click.BadParameter(str(exc))

    k_values = _parse_int_list(ks)
    seed_list = _parse_int_list(seeds)
    if len(seed_list) == 1 and "," not in seeds:
        seed_list = list(range(seed_list[0]))

    overrides: dict = {"epochs": epochs}
    if eval_every is not None:
        overrides["eval_every"] = eval_every
    if eval_dialogues is not None:
        overrides["eval_dialogues"] = eval_dialogues
    if full_fidelity:
        overrides["eval_dialogues"] = 2000
    if config_path is not None:
        base = load_trainer_config(config_path, **overrides)
    else:
        base = TrainerConfig(**overrides)

    pairs = []
    for variant in chosen:
        if variant is AgentVariant.DQN:
            pairs.append((variant, 0))
        else:
            pairs.extend((variant, k) for k in k_values)
    plan = make_plan(pairs, seed_list, base)
    click.echo(f"running {len(plan.runs)} runs -> {out_dir}")
    rows = run_experiment(plan, out_dir, jobs=jobs)
    for row in rows:
        click.echo(
            "%-20s epoch %3d: success %.4f +/- %.4f (reward %7.2f, turns %5.2f, %d seeds)"
            % (row["label"], row["epoch"], row["success_mean"], row["success_std"],
               row["reward_mean"], row["turns_mean"], row["seeds"])
        )


@main.command()
@click.option("--in", "in_dir", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
def plot(in_dir, out_dir):
    """Render learning-curve figures (PNG + plaintext) from run CSVs."""
    from .plotting import PlotFormatError, plot_curves

    try:
        figures = plot_curves(in_dir, out_dir)
    except PlotFormatError as exc:
        raise click.ClickException(str(exc))
    if not figures:
        raise click.ClickException("no plottable series found")
    for name in figures:
        click.echo(f"wrote {Path(out_dir) / (name + '.png')} (+ .txt)")


@main.command("hitl-serve")
@click.option("--port", default=8300, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--checkpoint", type=click.Path(exists=True, path_type=Path), default=None,
              help="Warm-start policy checkpoint applied to every registered run.")
@click.option("--variants", default="dqn,ddq:10,ddq:5,ddq-rand-init:10,ddq-rand-init:5",
              show_default=True, help="Registered runs as variant[:K] entries.")
@click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path),
              default=None)
@click.option("--seed", default=0, show_default=True)
@click.option("--data-dir", type=click.Path(path_type=Path), default=Path("hitl-data"),
              show_default=True, help="Session log and checkpoint directory.")
def hitl_serve(port, host, checkpoint, variants, config_path, seed, data_dir):
    """Serve the human-in-the-loop training API (and chat UI, if built)."""
    import uvicorn

    from .hitl import HitlService, create_app

    if config_path is not None:
        base = load_trainer_config(config_path)
    else:
        base = TrainerConfig()
    service = HitlService.from_variant_string(
        variants, base, seed=seed, data_dir=data_dir, checkpoint=checkpoint
    )
    app = create_app(service)
    click.echo(f"serving on http://{host}:{port} (runs: {variants})")
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
