"""Command-line entry points for the experiment pipeline.

Exit codes: 0 success, 1 configuration error, 2 runtime error.  The
output directory resolves as: --out flag, then the QUANTAUDIT_OUT
environment variable, then the config's output_dir.
"""

from __future__ import annotations

import dataclasses
import os
import sys
from pathlib import Path

import click

from . import pipeline
from .config import ExperimentConfig, load_config
from .exceptions import ConfigError, QuantAuditError

ENV_OUT = "QUANTAUDIT_OUT"


def _resolve_config(config_path, out, seed, parallel) -> ExperimentConfig:
    config = load_config(Path(config_path))
    updates = {}
    env_out = os.environ.get(ENV_OUT)
    if out is not None:
        updates["output_dir"] = str(out)
    elif env_out:
        updates["output_dir"] = env_out
    if seed is not None:
        updates["master_seed"] = seed
    if parallel is not None:
        updates["parallel"] = parallel
    return dataclasses.replace(config, **updates) if updates else config


def _common(func):
    func = click.option("--config", "config_path", required=True,
                        type=click.Path(), help="experiment config YAML")(func)
    func = click.option("--out", type=click.Path(), default=None,
                        help="output directory (overrides config and env)")(func)
    func = click.option("--seed", type=int, default=None,
                        help="master seed override")(func)
    func = click.option("--parallel", type=int, default=None,
                        help="worker processes for the runs stage")(func)
    func = click.option("--resume/--no-resume", default=True,
                        help="skip already-completed artifacts")(func)
    return func


@click.group()
def main():
    """Privacy auditing of post-training quantizers."""


def _stage_command(name, help_text, stage):
    @main.command(name=name, help=help_text)
    @_common
    def command(config_path, out, seed, parallel, resume):
        try:
            config = _resolve_config(config_path, out, seed, parallel)
        except ConfigError as exc:
            click.echo(f"config error: {exc}", err=True)
            sys.exit(1)
        try:
            stage(config, resume)
        except QuantAuditError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)
        except OSError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)

    return command


def _out_dir(config: ExperimentConfig) -> Path:
    path = Path(config.output_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _gen_data(config, resume):
    paths = pipeline.stage_gen_data(config, _out_dir(config))
    click.echo(f"wrote {len(paths)} data files under {config.output_dir}")


def _train_probe(config, resume):
    # the record files are the hand-off artifact of this stage
    config = dataclasses.replace(config, save_records=True)
    done = pipeline.stage_runs(config, _out_dir(config), resume=resume)
    click.echo(f"completed {done} new runs (records under {config.output_dir}/records)")


def _estimate_r(config, resume):
    path = pipeline.stage_summarize(config, _out_dir(config))
    click.echo(f"wrote {path}")


def _baseline(config, resume):
    paths = pipeline.stage_baseline(config, _out_dir(config), resume=resume)
    if not paths:
        click.echo("no baseline section in config; nothing to do")
    for path in paths:
        click.echo(f"wrote {path}")


def _oracle(config, resume):
    paths = pipeline.stage_oracle(config, _out_dir(config))
    if not paths:
        click.echo("no oracle_tasks in config; nothing to do")
    for path in paths:
        click.echo(f"wrote {path}")


def _rank(config, resume):
    rankings = pipeline.emit_report(config, _out_dir(config))
    for label, entry in rankings.items():
        click.echo(f"{label}: " + " > ".join(entry["r_qn_ranking"]))


def _report(config, resume):
    pipeline.emit_report(config, _out_dir(config))
    click.echo(f"report written under {config.output_dir}/report")


def _all(config, resume):
    out = pipeline.run_experiment(config, resume=resume)
    click.echo(f"experiment complete: {out}")


_stage_command("gen-data", "Write mixture specs and datasets.", _gen_data)
_stage_command("train-probe", "Train runs and write trajectory loss records.", _train_probe)
_stage_command("estimate-r", "Summarize per-run privacy scores into CSV.", _estimate_r)
_stage_command("baseline-mis", "Train membership discriminators and estimate security.", _baseline)
_stage_command("oracle", "Exact enumeration curves for configured tasks.", _oracle)
_stage_command("rank", "Print and write quantizer rankings.", _rank)
_stage_command("report", "Write rankings, stability, scatter, trade-off files.", _report)
_stage_command("all", "Run the full pipeline end to end.", _all)


if __name__ == "__main__":
    main()
