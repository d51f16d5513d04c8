import math
import sys
from pathlib import Path
from typing import Optional

import click
from dotenv import dotenv_values
from pydantic import ValidationError

from core.config import settings
from core.exceptions import LabError, NumericError, ToleranceError
from core.logger import setup_logging, get_logger
from schemas.report import ExperimentReport, Relation
from schemas.run import ExperimentId, OutputFormat, RunConfig
from tasks.export import emit_report
from tasks.multibubble import run_multibubble
from tasks.quantization import run_quantization
from tasks.rigged import run_rigged
from tasks.verify_core import run_verify_core

logger = get_logger(__name__)

EXIT_PASS = 0
EXIT_CONFIG = 2


def _grid_kwargs(config: RunConfig) -> dict:
    kwargs = {}
    if config.n is not None:
        kwargs['n'] = config.n
    if config.half_width is not None:
        kwargs['half_width'] = config.half_width
    return kwargs


def execute(config: RunConfig) -> ExperimentReport:
    """Run the configured experiment and return its report."""
    if config.experiment == ExperimentId.QUANTIZATION:
        kwargs = _grid_kwargs(config)
        if config.deltas is not None:
            kwargs['deltas'] = config.deltas
        return run_quantization(mu=config.mu, **kwargs)

    if config.experiment == ExperimentId.MULTIBUBBLE:
        kwargs = _grid_kwargs(config)
        if config.centers is not None:
            kwargs['centers'] = config.centers
        if config.deltas is not None:
            kwargs['deltas'] = config.deltas
        return run_multibubble(mu=config.mu, **kwargs)

    if config.experiment == ExperimentId.RIGGED:
        kwargs = _grid_kwargs(config)
        if config.ks is not None:
            kwargs['ks'] = config.ks
        return run_rigged(mu=config.mu, **kwargs)

    #verify-core fixes its own resolutions
    if config.n is not None or config.half_width is not None:
        logger.warning("verify-core ignores --n and --half-width")
    return run_verify_core(mu=config.mu, seed=config.seed, inject_kernel_fault=config.inject_kernel_fault)


def require_finite_rows(report: ExperimentReport):
    """Tolerance rows must carry finite values; info rows may record an undetermined order."""
    bad = [r.quantity for r in report.rows if r.relation != Relation.INFO and not math.isfinite(r.value)]
    if bad:
        raise NumericError(f"non-finite value in {len(bad)} row(s): {', '.join(bad)}")


def require_pass(report: ExperimentReport):
    if report.inconclusive:
        raise ToleranceError(f"{report.experiment} is inconclusive: {report.notes}")
    failed = report.failed_rows
    if failed:
        names = ", ".join(f"{r.quantity}[{r.param_value}]" if r.param_value is not None else r.quantity
                          for r in failed)
        raise ToleranceError(f"{len(failed)} row(s) outside tolerance: {names}")


def run(config: RunConfig) -> int:
    """Execute, write the report, and map the outcome to an exit status.

    0 when every declared tolerance passes, 1 on a tolerance failure or an
    inconclusive report, 2 on configuration errors, 3 on numeric failures.
    """
    try:
        report = execute(config)
        emit_report(report, config.format, config.out)
        require_finite_rows(report)
        require_pass(report)
    except ToleranceError as e:
        logger.warning(f"Run failed: {e.message}", extra={"experiment": config.experiment.value})
        return e.exit_code
    except LabError as e:
        logger.error(f"Run aborted: {e.message}", exc_info=isinstance(e, NumericError), extra={"experiment": config.experiment.value})
        return e.exit_code
    except ValidationError as e:
        logger.error(f"Invalid input: {e}", extra={"experiment": config.experiment.value})
        return EXIT_CONFIG

    logger.info(f"{config.experiment.value}: all {len(report.rows)} rows within tolerance",
                extra={"experiment": config.experiment.value})
    return EXIT_PASS


def build_config(config_file: Optional[Path], **options) -> RunConfig:
    """CLI options merged over an optional flat key=value file (CLI wins)."""
    values = {}
    if config_file is not None:
        values.update({k.lower().replace('-', '_'): v for k, v in dotenv_values(config_file).items()
                       if v is not None})
    values.update({k: v for k, v in options.items() if v is not None})
    if not values.get('inject_kernel_fault'):
        values.pop('inject_kernel_fault', None)
    return RunConfig(**values)


@click.command()
@click.option('--experiment', type=click.Choice([e.value for e in ExperimentId]), default=None)
@click.option('--mu', type=float, default=None)
@click.option('--n', 'n', type=int, default=None, help='cells per axis (power of two, 64..2048)')
@click.option('--half-width', type=float, default=None)
@click.option('--out', type=click.Path(path_type=Path), default=None)
@click.option('--format', 'format', type=click.Choice([f.value for f in OutputFormat]), default=None)
@click.option('--seed', type=int, default=None)
@click.option('--deltas', default=None, help='comma separated, e.g. 8,32,128')
@click.option('--ks', default=None, help='comma separated, e.g. 4,8,16,32')
@click.option('--centers', default=None, help='semicolon separated points, e.g. "0.25,0;-0.25,0"')
@click.option('--config', 'config_file', type=click.Path(exists=True, dir_okay=False, path_type=Path), default=None)
@click.option('--inject-kernel-fault', is_flag=True, default=False)
@click.option('--log-level', type=click.Choice(['DEBUG', 'INFO', 'WARNING', 'ERROR'], case_sensitive=False), default=None)
def cli(config_file, log_level, **options):
    """Numerical lab for the nonlocal Liouville equation."""
    setup_logging(log_level.upper() if log_level else None)
    logger.info(f"{settings.project_name} starting ({settings.environment})")
    try:
        config = build_config(config_file, **options)
    except (ValidationError, LabError) as e:
        logger.error(f"Invalid configuration: {e}")
        sys.exit(EXIT_CONFIG)
    sys.exit(run(config))


if __name__ == '__main__':
    cli()
