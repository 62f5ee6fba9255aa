from pathlib import Path
from typing import Callable, List, Optional, Sequence

import click
from pydantic import BaseModel, ValidationError

from ecs_metrology.core.config import get_settings
from ecs_metrology.core.dependencies import get_sweep_repository, get_sweep_service, resolve
from ecs_metrology.core.exceptions import AgreementException, ValidationException
from ecs_metrology.models.schemas import (
    Command,
    OutputFormat,
    ParityRow,
    RunConfig,
    StateReport,
    SweepRow,
)
from ecs_metrology.quantum.states import ProbeKind
from ecs_metrology.services.sweep_service import SweepOutcome
from ecs_metrology.utils.grid_utils import GridUtils


def _describe(error: ValidationError) -> str:
    return "; ".join(
        f"{'.'.join(str(part) for part in item['loc']) or 'config'}: {item['msg']}" for item in error.errors()
    )


def _config(**fields) -> RunConfig:
    settings = get_settings()
    if fields.get("cutoff") is None:
        fields["cutoff"] = settings.default_cutoff
    if fields.get("mu") is None:
        fields["mu"] = settings.default_mu
    if "phi" in fields and fields["phi"] is None:
        fields["phi"] = settings.working_phase
    try:
        return RunConfig(**fields)
    except ValidationError as e:
        raise ValidationException(_describe(e))


def _grid(parser: Callable[[str], List], spec: str, option: str) -> List:
    try:
        return parser(spec)
    except ValueError as e:
        raise ValidationException(f"Invalid {option}: {str(e)}")


def _emit(rows: Sequence[BaseModel], row_model: type, config: RunConfig) -> None:
    repository = resolve(get_sweep_repository, config.format)
    text = repository.save(rows, row_model, config.echo(), config.out)
    if config.out is None:
        click.echo(text, nl=False)


def _finish(outcome: SweepOutcome, row_model: type, config: RunConfig) -> None:
    """Write every row, then report agreement failures through the exit status"""
    _emit(outcome.rows, row_model, config)
    if not outcome.passed:
        raise AgreementException(f"{len(outcome.failures)} row(s) failed their internal agreement check")


def output_options(command: Callable) -> Callable:
    """--cutoff, --mu, --out and --format shared by every command"""
    command = click.option(
        "--format", "fmt", type=click.Choice([f.value for f in OutputFormat]), default=OutputFormat.CSV.value,
        show_default=True, help="Output format",
    )(command)
    command = click.option(
        "--out", type=click.Path(dir_okay=False, path_type=Path), default=None, help="Output file (stdout if omitted)"
    )(command)
    command = click.option("--mu", type=int, default=None, help="Number of repeated shots")(command)
    command = click.option("--cutoff", type=int, default=None, help="Fock levels kept per mode")(command)
    return command


@click.command("pure-sweep")
@click.option("--n-range", default="1:4", show_default=True, help="Photon numbers as first:last or a comma list")
@click.option("--alphas", default="2.0", show_default=True, help="ECS amplitudes used with --no-matched")
@click.option("--matched/--no-matched", default=True, show_default=True, help="Match ECS mean photons to each N")
@output_options
def pure_sweep(n_range: str, alphas: str, matched: bool, cutoff: Optional[int], mu: Optional[int],
               out: Optional[Path], fmt: str):
    """Lossless bounds for NOON, BAT, ECS and uncorrelated probes."""
    config = _config(
        command=Command.PURE_SWEEP,
        cutoff=cutoff,
        mu=mu,
        n_values=_grid(GridUtils.parse_int_grid, n_range, "--n-range"),
        alphas=_grid(GridUtils.parse_grid, alphas, "--alphas"),
        matched=matched,
        out=out,
        format=fmt,
    )
    _finish(resolve(get_sweep_service).run_pure_sweep(config), SweepRow, config)


@click.command("loss-sweep")
@click.option("--n-range", default="4", show_default=True, help="Photon numbers of the NOON/BAT/uncorrelated probes")
@click.option("--alphas", default="2.0", show_default=True, help="ECS amplitudes")
@click.option("--t-grid", default="0.05:1:20", show_default=True, help="Transmissivities as start:stop:count or a comma list")
@click.option("--phi", type=float, default=None, help="Working phase (the bound does not depend on it)")
@output_options
def loss_sweep(n_range: str, alphas: str, t_grid: str, phi: Optional[float], cutoff: Optional[int],
               mu: Optional[int], out: Optional[Path], fmt: str):
    """Mixed-state bounds under equal photon loss in both arms."""
    config = _config(
        command=Command.LOSS_SWEEP,
        cutoff=cutoff,
        mu=mu,
        n_values=_grid(GridUtils.parse_int_grid, n_range, "--n-range"),
        alphas=_grid(GridUtils.parse_grid, alphas, "--alphas"),
        t_grid=_grid(GridUtils.parse_grid, t_grid, "--t-grid"),
        phi=phi,
        out=out,
        format=fmt,
    )
    _finish(resolve(get_sweep_service).run_loss_sweep(config), SweepRow, config)


@click.command("parity-sweep")
@click.option("--alphas", default="0.5,1,1.5,2,2.5", show_default=True, help="ECS amplitudes")
@click.option("--transmissivity", type=float, default=1.0, show_default=True, help="Loss applied before readout")
@click.option("--phi-grid", default="", help="Phases for the parity curve (start:stop:count or comma list)")
@click.option("--include-curve", is_flag=True, default=False, help="Emit the parity curve on a default phase grid")
@output_options
def parity_sweep(alphas: str, transmissivity: float, phi_grid: str, include_curve: bool, cutoff: Optional[int],
                 mu: Optional[int], out: Optional[Path], fmt: str):
    """Parity readout working point and curve per amplitude."""
    config = _config(
        command=Command.PARITY_SWEEP,
        cutoff=cutoff,
        mu=mu,
        alphas=_grid(GridUtils.parse_grid, alphas, "--alphas"),
        transmissivity=transmissivity,
        phi_grid=_grid(GridUtils.parse_grid, phi_grid, "--phi-grid") if phi_grid.strip() else [],
        include_curve=include_curve,
        out=out,
        format=fmt,
    )
    _finish(resolve(get_sweep_service).run_parity_sweep(config), ParityRow, config)


@click.command("state-info")
@click.option("--probe", type=click.Choice([k.value for k in ProbeKind]), required=True, help="Probe kind")
@click.option("--n", "photons", type=int, default=4, show_default=True, help="Photon number (NOON, BAT, uncorrelated)")
@click.option("--alpha", type=float, default=2.0, show_default=True, help="Coherent amplitude (ECS, SCS)")
@click.option("--cutoff", type=int, default=None, help="Fock levels kept per mode")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=None, help="Output file")
def state_info(probe: str, photons: int, alpha: float, cutoff: Optional[int], out: Optional[Path]):
    """JSON report of one probe: mean photons, normalizer and truncation."""
    kind = ProbeKind(probe)
    config = _config(
        command=Command.STATE_INFO,
        cutoff=cutoff,
        probe=kind,
        n_values=[photons if kind not in (ProbeKind.ECS, ProbeKind.SCS) else 1],
        alphas=[alpha],
        out=out,
        format=OutputFormat.JSON,
    )
    try:
        report = resolve(get_sweep_service).run_state_info(config)
    except ValidationError as e:
        raise ValidationException(_describe(e))
    _emit([report], StateReport, config)


@click.command("resource-match")
@click.option("--n-range", default="1:8", show_default=True, help="NOON photon numbers to match")
@output_options
def resource_match(n_range: str, cutoff: Optional[int], mu: Optional[int], out: Optional[Path], fmt: str):
    """ECS amplitude whose mode-1 mean photon number equals N/2."""
    config = _config(
        command=Command.RESOURCE_MATCH,
        cutoff=cutoff,
        mu=mu,
        n_values=_grid(GridUtils.parse_int_grid, n_range, "--n-range"),
        out=out,
        format=fmt,
    )
    _finish(resolve(get_sweep_service).run_resource_match(config), SweepRow, config)


COMMANDS = [pure_sweep, loss_sweep, parity_sweep, state_info, resource_match]
