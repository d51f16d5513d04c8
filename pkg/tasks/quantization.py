"""Energy quantization sweep: a single nonlocal bubble concentrating at the origin.

For each scale the ball mass is measured with the source restricted to B_R and
with the whole plane as source (analytic tail beyond the box); the sequence is
extrapolated as m(delta) ~ m_inf + C delta^{-p} and m_inf is compared against 8 pi. Neck masses over
B_R minus B_{delta^{-1/2}} are fitted to a decay exponent.
"""
import math
from typing import NamedTuple, Sequence

import numpy as np

from core.exceptions import ConfigError, GeometryError
from core.logger import get_logger
from schemas.analysis import MassReport
from schemas.bubble import BubbleParams
from schemas.grid import Annulus, Grid2D
from schemas.report import ExperimentReport, Relation, ReportRow
from services.blowup import nonlocal_density
from services.closed_form import bubble_nonlocal
from services.field import disk_mask, fd_laplacian, full_mask, integrate, make_grid, masked_sup_abs, region_mask, sample
from tasks.fitting import fit_power_law, richardson_limit
from utils.sweep import ordered_map
from utils.validators import require_finite

logger = get_logger(__name__)

EXPERIMENT = "quantization"
EIGHT_PI = 8.0 * math.pi
DEFAULT_DELTAS = (8.0, 32.0, 128.0)


class ScaleMasses(NamedTuple):
    delta: float
    ball: float
    ball_full_src: float
    neck: float
    residual: float


def check_resolution(grid: Grid2D, delta_max: float):
    if grid.h > 1.0 / (4.0 * delta_max):
        needed = 2 ** math.ceil(math.log2(8.0 * grid.half_width * delta_max))
        raise ConfigError(
            f"grid spacing {grid.h:.4g} cannot resolve a bubble of scale {delta_max:g}; "
            f"use n >= {needed} or a smaller half width"
        )


def measure_scale(mu: float, delta: float, R: float, grid: Grid2D) -> ScaleMasses:
    u = bubble_nonlocal(BubbleParams(mu=mu, delta=delta))
    ball = disk_mask(grid, (0.0, 0.0), R)
    neck = region_mask(grid, Annulus(r_in=delta ** -0.5, r_out=R))

    density = nonlocal_density(u, 1.0, ball, mu)
    ball_mass = require_finite(integrate(density, ball), f"B_R mass at delta={delta:g}")
    neck_mass = require_finite(integrate(density, neck), f"neck mass at delta={delta:g}")
    full = nonlocal_density(u, 1.0, full_mask(grid), mu, tail=True)
    full_src = require_finite(integrate(full, ball), f"full-source mass at delta={delta:g}")

    #relative interior residual of the full-plane equation over B_R
    lap = fd_laplacian(sample(u, grid))
    residual = (-lap) - full
    scale = masked_sup_abs(full, ball)
    rel_residual = masked_sup_abs(residual, ball) / scale

    logger.debug(f"delta={delta:g}: B_R mass {ball_mass:.6f}, full source {full_src:.6f}, neck {neck_mass:.3e}")
    return ScaleMasses(delta=delta, ball=ball_mass, ball_full_src=full_src, neck=neck_mass, residual=rel_residual)


def run_quantization(
        mu: float = 1.0,
        deltas: Sequence[float] = DEFAULT_DELTAS,
        R: float = 1.0,
        half_width: float = 1.0,
        n: int = 1024,
) -> ExperimentReport:
    deltas = [float(d) for d in deltas]
    if not deltas:
        raise ConfigError("quantization sweep needs at least one scale")
    if any(d < 4 for d in deltas):
        raise ConfigError("bubble scales must be at least 4")
    if any(b <= a for a, b in zip(deltas, deltas[1:])):
        raise ConfigError("bubble scales must be strictly increasing")
    if not 0 < R <= half_width:
        raise GeometryError(f"B_R with R={R} must fit in the grid of half width {half_width}")

    grid = make_grid(half_width=half_width, n=n)
    check_resolution(grid, max(deltas))
    logger.info(f"Quantization sweep mu={mu}, deltas={deltas}, R={R}, n={n}", extra={"experiment": EXPERIMENT})

    scales = ordered_map(lambda d: measure_scale(mu, d, R, grid), deltas)

    def row(quantity, value, delta=None, **kw) -> ReportRow:
        return ReportRow(experiment=EXPERIMENT, param_name="delta" if delta is not None else "",
                         param_value=delta, quantity=quantity, value=value, **kw)

    rows = []
    mass_reports = []
    for s in scales:
        rows.append(row("mass_BR", s.ball, s.delta, target=EIGHT_PI))
        rows.append(row("mass_BR_full_src", s.ball_full_src, s.delta, target=EIGHT_PI))
        rows.append(row("neck_mass", s.neck, s.delta))
        rows.append(row("residual_rel", s.residual, s.delta))
        mass_reports.append(MassReport(label=f"delta={s.delta:g}", region_mass=s.ball, residual_sup=s.residual))

    masses = [s.ball for s in scales]
    if len(scales) > 1:
        steps = np.diff(masses) / EIGHT_PI
        rows.append(row("mass_monotone", float(steps.min()), target=0.0, tolerance=0.005, relation=Relation.GE))

    if len(scales) < 3:
        logger.warning(f"{len(scales)} scale(s) cannot be extrapolated: report is inconclusive")
        return ExperimentReport(experiment=EXPERIMENT, param_name="delta", sweep=deltas, rows=rows,
                                mass_reports=mass_reports, inconclusive=True,
                                notes="extrapolation needs at least three scales")

    limit, order = richardson_limit(deltas, masses)
    rows.append(row("mass_BR_extrapolated", require_finite(limit, "extrapolated mass"), target=EIGHT_PI,
                    tolerance=0.03 * EIGHT_PI, relation=Relation.ABS))
    rows.append(row("extrapolation_order", order))

    neck_fit = fit_power_law(deltas, [s.neck for s in scales])
    rows.append(row("neck_decay_exponent", neck_fit.exponent, target=-0.5, tolerance=0.0, relation=Relation.LE))

    report = ExperimentReport(experiment=EXPERIMENT, param_name="delta", sweep=deltas, rows=rows,
                              mass_reports=mass_reports, fits={"neck_mass": neck_fit})
    logger.info(f"Extrapolated B_R mass {limit:.6f} (8 pi = {EIGHT_PI:.6f}), order {order:.3g}",
                extra={"experiment": EXPERIMENT})
    return report
