"""Several bubbles in one ball: per-bubble, interaction and neck masses.

The field is the superposition u = log(sum e^{u_i}), so e^u splits exactly
into the bubble exponentials. Sources and targets are both partitioned into
the bubble balls and the neck, which makes the total over B_R the sum of
self masses, pairwise interactions and everything touching the neck.
"""
import math
from itertools import combinations
from typing import Sequence

import numpy as np

from core.exceptions import ConfigError, GeometryError
from core.logger import get_logger
from schemas.analysis import MassReport
from schemas.bubble import BubbleParams
from schemas.grid import Grid2D, RegionMask
from schemas.report import ExperimentReport, Relation, ReportRow
from services.blowup import interaction_mass, nonlocal_density, nonlocal_residual
from services.closed_form import ClosedFormField, bubble_nonlocal, superpose
from services.field import disk_mask, integrate, make_grid, masked_sup_abs
from tasks.fitting import fit_power_law
from tasks.quantization import check_resolution
from utils.sweep import ordered_map
from utils.validators import require_finite

logger = get_logger(__name__)

EXPERIMENT = "multibubble"
EIGHT_PI = 8.0 * math.pi
DEFAULT_CENTERS = ((0.25, 0.0), (-0.25, 0.0))
DEFAULT_DELTA = 120.0
SEPARATIONS = (0.5, 1.0, 2.0)
#bubble ball radius in units of the concentration scale 1/delta
BALL_SCALE = 12.0


def _field(mu: float, centers, deltas) -> ClosedFormField:
    return superpose([bubble_nonlocal(BubbleParams(mu=mu, x0=c, delta=d)) for c, d in zip(centers, deltas)])


def _neck_mask(outer: RegionMask, balls: list[RegionMask]) -> RegionMask:
    covered = np.zeros_like(outer.weights)
    inside = np.zeros_like(outer.flags)
    for b in balls:
        covered = covered + b.weights
        inside = inside | b.flags
    return RegionMask(grid=outer.grid, flags=outer.flags & ~inside,
                      weights=np.clip(outer.weights - covered, 0.0, 1.0))


def _check_layout(centers, radii, R: float):
    for (i, a), (j, b) in combinations(enumerate(centers), 2):
        d = math.dist(a, b)
        if d == 0.0:
            raise ConfigError(f"bubble centers {i} and {j} coincide")
        if d <= radii[i] + radii[j]:
            raise ConfigError(f"bubble balls {i} and {j} overlap at these scales (distance {d:.4g})")
    for c, r in zip(centers, radii):
        if math.hypot(*c) >= R / 2:
            raise GeometryError(f"center {c} must lie inside B_(R/2)")
        if math.hypot(*c) + r > R:
            raise GeometryError(f"bubble ball at {c} leaves B_R")


def interaction_at_separation(mu: float, delta: float, d: float, h: float) -> float:
    """Interaction mass between two bubbles at +-(d/2, 0), by direct summation on a grid of spacing h."""
    r = BALL_SCALE / delta
    centers = ((0.5 * d, 0.0), (-0.5 * d, 0.0))
    half_width = 0.5 * d + 2.0 * r
    n = 2 * math.ceil(half_width / h)
    grid = make_grid(half_width=half_width, n=n)
    u = _field(mu, centers, (delta, delta))
    a = disk_mask(grid, centers[0], r)
    b = disk_mask(grid, centers[1], r)
    value = interaction_mass(u, 1.0, a, b, mu, direct=True)
    logger.debug(f"Interaction at separation {d:g}: {value:.6g}")
    return require_finite(value, f"interaction at d={d:g}")


def run_multibubble(
        mu: float = 1.0,
        centers: Sequence[tuple[float, float]] = DEFAULT_CENTERS,
        deltas: Sequence[float] = (DEFAULT_DELTA,),
        R: float = 1.0,
        half_width: float = 1.0,
        n: int = 1024,
        separations: Sequence[float] = SEPARATIONS,
) -> ExperimentReport:
    centers = [tuple(map(float, c)) for c in centers]
    deltas = [float(d) for d in deltas]
    if not centers:
        raise ConfigError("multibubble run needs at least one center")
    if len(deltas) == 1:
        deltas = deltas * len(centers)
    if len(deltas) != len(centers):
        raise ConfigError(f"{len(deltas)} scales given for {len(centers)} centers")
    if any(d < 4 for d in deltas):
        raise ConfigError("bubble scales must be at least 4")
    if not 0 < R <= half_width:
        raise GeometryError(f"B_R with R={R} must fit in the grid of half width {half_width}")

    radii = [BALL_SCALE / d for d in deltas]
    _check_layout(centers, radii, R)
    grid: Grid2D = make_grid(half_width=half_width, n=n)
    check_resolution(grid, max(deltas))
    N = len(centers)
    logger.info(f"Multibubble run mu={mu}, {N} bubble(s), deltas={deltas}", extra={"experiment": EXPERIMENT})

    u = _field(mu, centers, deltas)
    outer = disk_mask(grid, (0.0, 0.0), R)
    balls = [disk_mask(grid, c, r) for c, r in zip(centers, radii)]
    neck = _neck_mask(outer, balls)
    sources = balls + [neck]

    partial = ordered_map(lambda src: nonlocal_density(u, 1.0, src, mu), sources)
    total_density = nonlocal_density(u, 1.0, outer, mu)

    def row(quantity, value, **kw) -> ReportRow:
        return ReportRow(experiment=EXPERIMENT, quantity=quantity, value=value, **kw)

    rows = []
    mass_reports = []
    self_masses = []
    for i, ball in enumerate(balls):
        m = require_finite(integrate(partial[i], ball), f"self mass of bubble {i}")
        self_masses.append(m)
        rows.append(row(f"self_mass_{i}", m, param_name="delta", param_value=deltas[i],
                        target=EIGHT_PI, tolerance=0.05, relation=Relation.REL))
        mass_reports.append(MassReport(label=f"bubble_{i}", region_mass=m))

    interactions = 0.0
    for i, j in ((i, j) for i in range(N) for j in range(N) if i != j):
        m = require_finite(integrate(partial[i], balls[j]), f"interaction {i}->{j}")
        interactions += m
        d = math.dist(centers[i], centers[j])
        bound = EIGHT_PI * (radii[i] / d) ** (0.5 * mu)
        rows.append(row(f"interaction_{i}_{j}", m, param_name="separation", param_value=d,
                        target=bound, tolerance=0.0, relation=Relation.LE))

    neck_mass = integrate(partial[N], outer) + sum(integrate(partial[i], neck) for i in range(N))
    rows.append(row("neck_mass", require_finite(neck_mass, "neck mass")))
    mass_reports.append(MassReport(label="neck", region_mass=neck_mass))

    total = require_finite(integrate(total_density, outer), "total mass")
    booked = sum(self_masses) + interactions + neck_mass
    rows.append(row("mass_total", total, target=EIGHT_PI * N, tolerance=0.05, relation=Relation.REL))
    rows.append(row("mass_closure", booked, target=total, tolerance=0.01, relation=Relation.REL))

    residual = nonlocal_residual(u, 1.0, outer, grid, mu)
    rows.append(row("residual_rel", masked_sup_abs(residual, outer) / masked_sup_abs(total_density, outer)))

    fits = {}
    if separations:
        delta = deltas[0]
        seps = [float(s) for s in separations]
        values = ordered_map(lambda s: interaction_at_separation(mu, delta, s, grid.h), seps)
        for s, v in zip(seps, values):
            rows.append(row("interaction_sweep", v, param_name="separation", param_value=s,
                            target=EIGHT_PI * (BALL_SCALE / delta / s) ** (0.5 * mu),
                            tolerance=0.0, relation=Relation.LE))
        if len(seps) >= 3:
            fit = fit_power_law(seps, values)
            fits["interaction"] = fit
            rows.append(row("interaction_decay_exponent", -fit.exponent, target=mu,
                            tolerance=0.2, relation=Relation.REL))
            rows.append(row("interaction_decay_vs_bound", -fit.exponent, target=0.5 * mu,
                            tolerance=0.0, relation=Relation.GE))

    logger.info(f"Total mass {total:.6f} against {N} x 8 pi = {EIGHT_PI * N:.6f}", extra={"experiment": EXPERIMENT})
    return ExperimentReport(experiment=EXPERIMENT, param_name="bubbles", sweep=[float(N)], rows=rows,
                            mass_reports=mass_reports, fits=fits)
