"""fedflex-sim: run and replay desk-scale federated deployments."""

from __future__ import annotations

import json
from pathlib import Path

import click

from .catalog import write_catalog
from .dp import DpConfig
from .metrics import format_ctr_percent
from .sim import ExperimentConfig, gen_catalog, run_experiment


@click.group()
def main():
    """Federated recommendation simulation harness."""


@main.command()
@click.option("--clients", default=22, show_default=True)
@click.option("--days", default=53, show_default=True)
@click.option("--catalog", "catalog_path", type=click.Path(exists=True), default=None,
              help="Catalog CSV; a synthetic catalog is generated when omitted.")
@click.option("--epsilon", default=2.0, show_default=True)
@click.option("--delta", default=1e-5, show_default=True)
@click.option("--clip", "clip_norm", default=1.0, show_default=True)
@click.option("--no-dp", is_flag=True, help="Disable differential privacy.")
@click.option("--dim", default=16, show_default=True)
@click.option("--k", default=10, show_default=True)
@click.option("--first-session-k", default=50, show_default=True, type=int,
              help="Larger slate for each client's first session; 0 disables.")
@click.option("--seed", default=7, show_default=True)
@click.option("--out", "out_dir", type=click.Path(), default="report",
              show_default=True)
def run(clients, days, catalog_path, epsilon, delta, clip_norm, no_dp, dim, k,
        first_session_k, seed, out_dir):
    """Run a full simulated deployment and write the report."""
    config = ExperimentConfig(
        n_clients=clients,
        n_rounds=days,
        catalog_path=catalog_path,
        k=k,
        first_session_k=first_session_k or None,
        dim=dim,
        dp=DpConfig(epsilon=epsilon, delta=delta, clip_norm=clip_norm,
                    enabled=not no_dp),
        seed=seed,
    )
    report = run_experiment(config, out_dir=out_dir)
    _print_summary(report)
    click.echo(f"report written to {out_dir}/")


@main.command()
@click.option("--report", "report_dir", type=click.Path(exists=True), required=True)
def replay(report_dir):
    """Re-run an experiment from its seeds file and verify the summary is
    byte-identical."""
    report_dir = Path(report_dir)
    seeds = json.loads((report_dir / "seeds.json").read_text(encoding="utf-8"))
    config = ExperimentConfig.from_json(seeds["config"])
    original = (report_dir / "summary.json").read_bytes()
    replay_dir = report_dir / "replay"
    run_experiment(config, out_dir=replay_dir)
    replayed = (replay_dir / "summary.json").read_bytes()
    if original == replayed:
        click.echo("replay OK: summary.json is byte-identical")
    else:
        raise click.ClickException("replay mismatch: summary.json differs")


@main.command("gen-catalog")
@click.option("--items", default=800, show_default=True)
@click.option("--genres", default=8, show_default=True)
@click.option("--seed", default=7, show_default=True)
@click.option("--out", "out_path", type=click.Path(), default="catalog.csv",
              show_default=True)
def gen_catalog_cmd(items, genres, seed, out_path):
    """Write a synthetic catalog CSV for tests and demos."""
    write_catalog(out_path, gen_catalog(items, genres, seed))
    click.echo(f"wrote {items} items to {out_path}")


def _print_summary(report: dict) -> None:
    per_mode = report["per_mode_ctr"]
    parts = []
    for mode in ("personalized", "diversity"):
        value = per_mode.get(mode)
        parts.append(format_ctr_percent(value) if value is not None else "n/a")
    click.echo(f"CTR personalized vs. diversity: {parts[0]} vs. {parts[1]}")
    click.echo(
        f"impressions={report['counters']['impressions']} "
        f"unique_clicked={report['counters']['unique_clicked']} "
        f"final_auc={report['auc_trajectory'][-1]:.3f}"
    )


if __name__ == "__main__":
    main()
