# cli.py
"""
Command-line entry point:

    python cli.py converge --config illprep-1d --out runs/demo
    python cli.py spectrum --config cosine-rho0-1d --resolution 256
"""
from __future__ import annotations

import functools
import logging
import sys
from pathlib import Path
from typing import Optional, Tuple

import click

ROOT = Path(__file__).resolve().parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from anelastic import services  # noqa: E402
from anelastic.errors import ScenarioConfigError  # noqa: E402
from anelastic.loaders import ScenarioConfig, load_scenario  # noqa: E402
from webapp.config import ANELASTIC_LOG_LEVEL, ANELASTIC_RUNS_DIR  # noqa: E402


def _parse_eps(ctx, param, value: Optional[str]) -> Tuple[float, ...]:
    if not value:
        return ()
    try:
        return tuple(float(x) for x in value.split(",") if x.strip())
    except ValueError:
        raise click.BadParameter(f"expected a comma separated list of numbers, got {value!r}")


def scenario_options(fn):
    @click.option("--config", "config_ref", required=True, help="Scenario file path or bundled scenario name.")
    @click.option("--out", "out_dir", type=click.Path(file_okay=False, path_type=Path), default=None,
                  help="Output directory (default: runs/<subcommand>-<scenario>).")
    @click.option("--eps", callback=_parse_eps, default=None, help="Override the eps list, e.g. 0.2,0.1.")
    @click.option("--resolution", type=int, default=None, help="Override grid points per dimension.")
    @click.option("--quiet", is_flag=True, help="Only warnings and errors.")
    @functools.wraps(fn)
    def wrapper(config_ref, out_dir, eps, resolution, quiet, **kwargs):
        logging.basicConfig(
            level=logging.WARNING if quiet else getattr(logging, ANELASTIC_LOG_LEVEL.upper(), logging.INFO),
            format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        )
        try:
            config = load_scenario(config_ref).with_overrides(eps=eps or None, resolution=resolution)
        except ScenarioConfigError as exc:
            click.echo(f"[ERR] {exc}", err=True)
            sys.exit(1)
        out = out_dir or Path(ANELASTIC_RUNS_DIR) / f"{fn.__name__.replace('_cmd', '')}-{config.name}"
        out.mkdir(parents=True, exist_ok=True)
        try:
            return fn(config=config, out_dir=out, quiet=quiet, **kwargs)
        except (ValueError, RuntimeError) as exc:
            click.echo(f"[ERR] {type(exc).__name__}: {exc}", err=True)
            sys.exit(1)

    return wrapper


def _ok(quiet: bool, message: str) -> None:
    if not quiet:
        click.echo(f"[OK] {message}")


@click.group()
def cli():
    """Scaled GPE runs, limit systems and convergence sweeps."""


@cli.command("simulate")
@scenario_options
def simulate_cmd(config: ScenarioConfig, out_dir: Path, quiet: bool):
    """Evolve the GPE for each eps; write time series and final state."""
    for path in services.run_simulate(config, out_dir):
        _ok(quiet, f"wrote {path}")
    click.echo(f"[DONE] simulate {config.name} -> {out_dir}")


@cli.command("spectrum")
@scenario_options
def spectrum_cmd(config: ScenarioConfig, out_dir: Path, quiet: bool):
    """Eigenvalues and eigenmodes of -div(rho0 grad .)."""
    spectrum, modes = services.run_spectrum(config, out_dir)
    _ok(quiet, f"wrote {spectrum} and {modes}")
    click.echo(f"[DONE] spectrum {config.name} -> {out_dir}")


@cli.command("resonances")
@scenario_options
def resonances_cmd(config: ScenarioConfig, out_dir: Path, quiet: bool):
    """Resonant triples and near-resonances of the retained modes."""
    exact, near = services.run_resonances(config, out_dir)
    _ok(quiet, f"wrote {exact} and {near}")
    click.echo(f"[DONE] resonances {config.name} -> {out_dir}")


@cli.command("project")
@scenario_options
def project_cmd(config: ScenarioConfig, out_dir: Path, quiet: bool):
    """Weighted Helmholtz split of the initial current."""
    stats = services.run_project(config, out_dir)
    _ok(quiet, f"residual={stats['residual']:.3e} iterations={stats['iterations']}")
    click.echo(f"[DONE] project {config.name} -> {out_dir}")


@cli.command("anelastic")
@scenario_options
def anelastic_cmd(config: ScenarioConfig, out_dir: Path, quiet: bool):
    """Anelastic Euler system alone."""
    path = services.run_anelastic(config, out_dir)
    _ok(quiet, f"wrote {path}")
    click.echo(f"[DONE] anelastic {config.name} -> {out_dir}")


@cli.command("oscillate")
@scenario_options
def oscillate_cmd(config: ScenarioConfig, out_dir: Path, quiet: bool):
    """Anelastic system coupled with the oscillating system."""
    path = services.run_oscillate(config, out_dir)
    _ok(quiet, f"wrote {path}")
    click.echo(f"[DONE] oscillate {config.name} -> {out_dir}")


@cli.command("modenergy")
@scenario_options
def modenergy_cmd(config: ScenarioConfig, out_dir: Path, quiet: bool):
    """Modulated energy time series per eps."""
    for path in services.run_modenergy(config, out_dir):
        _ok(quiet, f"wrote {path}")
    click.echo(f"[DONE] modenergy {config.name} -> {out_dir}")


@cli.command("converge")
@scenario_options
@click.option("--no-index", is_flag=True, help="Do not record the run in the index database.")
@click.option("--workers", type=int, default=None, help="Parallel eps runs (default from the scenario).")
def converge_cmd(config: ScenarioConfig, out_dir: Path, quiet: bool, no_index: bool, workers: Optional[int]):
    """Full eps sweep with the convergence table."""
    result = services.run_scenario(config, out_dir, index=not no_index, workers=workers)
    for row in result.table.rows:
        if row.ok:
            _ok(quiet, f"eps={row.eps:g} sup|rho-rho0|={row.sup_density_error:.3e} maxH={row.max_H:.3e}")
        else:
            click.echo(f"[ERR] eps={row.eps:g} {row.error}", err=True)
    click.echo(f"[DONE] converge {config.name} -> {result.run_dir / 'table.csv'}")


if __name__ == "__main__":
    cli()
