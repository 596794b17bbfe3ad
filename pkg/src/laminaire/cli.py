"""Command line driver: ``laminaire run <config>``, ``list-experiments``, ``fixtures``.

Configuration files are INI style::

    [experiment]
    name = lemma45
    seed = 7
    out = results/lemma45

    [params]
    lambda = 0.9

Keys ``r_sequence`` and ``sigma_sequence`` are accepted as aliases of ``r`` and
``sigmas``. Exit status is 0 when every criterion passes, 1 when any fails and
2 for usage errors (unknown experiment, bad parameters, unwritable output).
"""

from __future__ import annotations

import configparser
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import click

EXPERIMENT_NAMES = ("uniform_wedge", "cantor_product", "demailly_self", "lemma45",
                    "defect_sweep", "pipeline", "henon_mu")
_RESERVED = {"name", "seed", "out", "fixture", "threads"}
_ALIASES = {"r_sequence": "r", "sigma_sequence": "sigmas"}
_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS")


class UsageError(Exception):
    pass


@dataclass
class ExperimentConfig:
    name: str
    seed: int = 0
    out: Path = Path("results")
    fixture: str | None = None
    threads: int | None = None
    params: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.name not in EXPERIMENT_NAMES:
            raise UsageError(f"unknown experiment {self.name!r}; choose from {', '.join(EXPERIMENT_NAMES)}")
        if self.threads is not None and self.threads < 1:
            raise UsageError("--threads must be at least 1")


def load_config(path: str | os.PathLike) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    if not parser.has_section("experiment") or not parser.has_option("experiment", "name"):
        raise UsageError("config needs an [experiment] section with a name")
    exp = parser["experiment"]
    params = {k: v for k, v in exp.items() if k not in _RESERVED}
    if parser.has_section("params"):
        params.update(parser["params"].items())
    params = {_ALIASES.get(k, k): v for k, v in params.items()}
    try:
        seed = exp.getint("seed", 0)
        threads = exp.getint("threads") if "threads" in exp else None
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    return ExperimentConfig(exp["name"].strip(), seed, Path(exp.get("out", "results")),
                            exp.get("fixture"), threads, params)


def cap_threads(n: int | None) -> None:
    # only effective before numpy is first imported, which is why experiments load lazily
    if n is not None:
        for var in _THREAD_VARS:
            os.environ[var] = str(n)


def run_experiment(config: ExperimentConfig):
    config.validate()
    from . import experiments

    try:
        return experiments.EXPERIMENTS[config.name](config.params, config.seed)
    except experiments.ConfigError as exc:
        raise UsageError(f"invalid parameters: {exc}") from exc


def emit_report(result, out: Path) -> list[Path]:
    from .experiments import render_csv, render_summary

    try:
        out.mkdir(parents=True, exist_ok=True)
        files = [out / f"{result.name}.csv", out / "summary.json"]
        files[0].write_text(render_csv(result), encoding="utf-8")
        files[1].write_text(render_summary(result), encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot write reports to {out}: {exc}") from exc
    return files


@click.group()
def main():
    """Laminar current experiments."""


@main.command("run")
@click.argument("config_file", type=click.Path(dir_okay=False))
@click.option("--threads", type=int, default=None, help="Cap on worker threads.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None, help="Output directory.")
@click.option("--seed", type=int, default=None, help="Seed override for Monte Carlo samplers.")
def run_cmd(config_file, threads, out_dir, seed):
    """Run the experiment described by CONFIG_FILE."""
    try:
        cfg = load_config(config_file)
        if threads is not None:
            cfg.threads = threads
        if out_dir is not None:
            cfg.out = Path(out_dir)
        if seed is not None:
            cfg.seed = seed
        cfg.validate()
        cap_threads(cfg.threads)
        result = run_experiment(cfg)
        emit_report(result, cfg.out)
    except UsageError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    for c in result.criteria:
        click.echo(f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.value!r} {c.comparison} {c.threshold!r}")
    sys.exit(0 if result.passed else 1)


@main.command("list-experiments")
def list_experiments():
    """Print the experiment names."""
    for name in EXPERIMENT_NAMES:
        click.echo(name)


@main.command("fixtures")
def fixtures():
    """Print the model fixtures."""
    from .models import FIXTURES

    for name, text in FIXTURES.items():
        click.echo(f"{name}: {text}")


if __name__ == "__main__":
    main()
