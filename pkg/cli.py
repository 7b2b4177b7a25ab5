"""Command-line front end.

    python cli.py calibrate
    python cli.py run --preset discrete --engine both --shots 10000000
    python cli.py run --config my_scenario.json --out results/mine
    python cli.py report --report results/discrete/report.json --out rerendered
    python cli.py init --out configs
    python cli.py serve --port 5000
"""
import json
import logging
import os

import click

from app import create_app
from config import APP_NAME, APP_VERSION, PRESET_NAMES, load_config, preset_config
from exceptions import ConfigError, DistillationError
from experiment import calibrate, calibrate_envelope, run_scenario
from helpers import format_float, write_json
from reports import render_report

logger = logging.getLogger(APP_NAME)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def configure_logging(verbose):
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO, format=LOG_FORMAT, force=True)


def _fail(ctx, exc):
    click.echo(f"error: {exc}", err=True)
    ctx.exit(getattr(exc, "exit_code", 1))


def _print_summary(report):
    click.echo("=" * 60)
    click.echo(f"SCENARIO {report.scenario}  [{report.status}]")
    click.echo("=" * 60)
    click.echo(f"Gaussian LN before distillation : {report.ln_before:+.4f}")
    click.echo(f"Upper bound on total LN         : {report.upper_bound:+.4f}")
    click.echo(f"{'threshold':>10} {'success':>12} {'gaussian LN':>12} {'entropy':>9}")
    for row in report.rows:
        if not row.ok:
            click.echo(f"{row.threshold:>10.4g} {'-':>12} {'-':>12} {'-':>9}  ({row.error})")
            continue
        entropy = f"{row.weight_entropy:9.4f}" if row.weight_entropy is not None else f"{'-':>9}"
        click.echo(f"{row.threshold:>10.4g} {row.success_probability:>12.4e} {row.ln:>+12.4f} {entropy}")
    for note in report.notes:
        click.echo(f"note: {note}")


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Debug logging.")
@click.version_option(APP_VERSION, prog_name=APP_NAME)
def cli(verbose):
    """Continuous-variable entanglement distillation simulator."""
    configure_logging(verbose)


@cli.command("calibrate")
@click.option("--ln-initial", type=float, default=0.76, show_default=True)
@click.option("--ln-discrete-premix", type=float, default=-1.63, show_default=True)
@click.option("--ln-semicontinuous-premix", type=float, default=None,
              help="Also fit the semi-continuous envelope to this LN.")
@click.option("--p-full", type=float, default=0.2, show_default=True)
@click.pass_context
def calibrate_command(ctx, ln_initial, ln_discrete_premix, ln_semicontinuous_premix, p_full):
    """Invert the published LN values into source (and envelope) parameters."""
    try:
        v_s, v_a = calibrate(ln_initial, ln_discrete_premix)
        result = {"v_squeezed": v_s, "v_antisqueezed": v_a}
        if ln_semicontinuous_premix is not None:
            beta, _ = calibrate_envelope(v_s, v_a, ln_semicontinuous_premix, p_full)
            result.update(beta=beta, p_full=p_full)
    except DistillationError as exc:
        _fail(ctx, exc)
        return
    click.echo(json.dumps({k: format_float(v) for k, v in result.items()}, indent=2))


@cli.command("run")
@click.option("--config", "config_path", type=click.Path(dir_okay=False), help="Scenario config (JSON).")
@click.option("--preset", type=click.Choice(PRESET_NAMES), help="Built-in scenario instead of --config.")
@click.option("--engine", type=click.Choice(["analytic", "mc", "both"]))
@click.option("--shots", type=int)
@click.option("--seed", type=int)
@click.option("--workers", type=int)
@click.option("--out", type=click.Path(file_okay=False))
@click.pass_context
def run_command(ctx, config_path, preset, engine, shots, seed, workers, out):
    """Run one scenario and write its artifacts."""
    try:
        if bool(config_path) == bool(preset):
            raise ConfigError("give exactly one of --config or --preset")
        config = load_config(config_path) if config_path else preset_config(preset)
        config = config.with_overrides(engine=engine, shots=shots, seed=seed, workers=workers, out=out)
        report = run_scenario(config)
    except DistillationError as exc:
        _fail(ctx, exc)
        return
    _print_summary(report)
    ctx.exit(report.exit_code)


@cli.command("report")
@click.option("--report", "report_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(file_okay=False))
@click.option("--no-json", is_flag=True)
@click.option("--no-csv", is_flag=True)
@click.pass_context
def report_command(ctx, report_path, out, no_json, no_csv):
    """Re-render artifacts from a stored report.json."""
    try:
        paths = render_report(report_path, out, write_json=not no_json, write_csv=not no_csv)
    except DistillationError as exc:
        _fail(ctx, exc)
        return
    for path in paths:
        click.echo(path)


@cli.command("init")
@click.option("--out", default="configs", show_default=True, type=click.Path(file_okay=False))
@click.pass_context
def init_command(ctx, out):
    """Write the built-in scenario configs as editable JSON files."""
    try:
        os.makedirs(out, exist_ok=True)
        for name in PRESET_NAMES:
            path = write_json(os.path.join(out, f"{name}.json"), preset_config(name).to_dict())
            click.echo(path)
    except (DistillationError, OSError) as exc:
        _fail(ctx, exc)


@cli.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=5000, show_default=True, type=int)
def serve_command(host, port):
    """Serve the JSON query API."""
    create_app().run(host=host, port=port)


if __name__ == "__main__":
    cli(prog_name=APP_NAME)
