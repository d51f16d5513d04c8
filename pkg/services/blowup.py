"""Checkable functionals of blow-up analysis.

Residuals, region and interaction masses, the A1/A2/A3 classifier, the
selection lemma, the sup+inf quantity, the driving estimate and the
Brezis-Merle inequality, all evaluated on sampled closed-form fields.
"""
import math
from typing import NamedTuple, Sequence, Union

import numpy as np
from scipy.ndimage import maximum_filter

from core.config import settings
from core.exceptions import ConfigError, GeometryError, NumericError
from core.logger import get_logger
from schemas.analysis import AlternativeVerdict, ClassifierParams, SelectionResult, Verdict
from schemas.bubble import RadialTail
from schemas.grid import Disk, Grid2D, RegionMask, ScalarField
from schemas.potential import RieszConfig
from services.closed_form import ClosedFormField, exponents
from services.field import (
    disk_mask,
    fd_laplacian,
    integrate,
    make_grid,
    masked_max,
    masked_min,
    masks_overlap,
    sample,
)
from services.potential import dirichlet_disk_solve, riesz_direct, riesz_fft
from services.quadrature import tail_mass_outside_box
from utils.sweep import ordered_map

logger = get_logger(__name__)

EIGHT_PI = 8.0 * math.pi

Coefficient = Union[float, ScalarField, ClosedFormField]


def _coefficient(V: Coefficient, grid: Grid2D) -> np.ndarray:
    if isinstance(V, ScalarField):
        if not V.grid.same_as(grid):
            raise GeometryError("coefficient V lives on a different grid")
        return V.values
    if isinstance(V, ClosedFormField):
        return sample(V, grid).values
    return np.full((grid.n, grid.n), float(V))


def _exp_tail(u: ClosedFormField, lam: float) -> RadialTail:
    tail = u.exp_tail(lam)
    if tail is None:
        raise ConfigError(f"{u.kind} field has no analytic tail for e^(lambda u); use a bounded source")
    return tail


def _is_full(mask: RegionMask) -> bool:
    return bool(np.all(mask.weights == 1.0))


def nonlocal_density(
        u: ClosedFormField,
        V: Coefficient,
        src_mask: RegionMask,
        mu: float,
        tail: bool = False,
) -> ScalarField:
    """V * I_mu[e^{lambda u} chi_src] * e^{lambda u} at every node of the source grid."""
    cfg = RieszConfig(mu=mu)
    grid = src_mask.grid
    e_lam = ScalarField(grid=grid, values=np.exp(cfg.lam * sample(u, grid).values))
    potential = riesz_fft(e_lam, cfg, support=src_mask, tail=_exp_tail(u, cfg.lam) if tail else None)
    return ScalarField(grid=grid, values=_coefficient(V, grid) * potential.values * e_lam.values)


def nonlocal_residual(
        u: ClosedFormField,
        V: Coefficient,
        omega_src: RegionMask,
        eval_grid: Grid2D,
        mu: float,
        tail: bool = False,
) -> ScalarField:
    """-Delta_h u - V I_mu[e^{lambda u} chi_src] e^{lambda u}; boundary ring invalid."""
    if not omega_src.grid.same_as(eval_grid):
        raise GeometryError("source mask and evaluation grid differ")
    exponents(mu)
    lap = fd_laplacian(sample(u, eval_grid))
    rhs = nonlocal_density(u, V, omega_src, mu, tail)
    return ScalarField(grid=eval_grid, values=-lap.values - rhs.values, valid=lap.valid)


def local_residual(u: ClosedFormField, eval_grid: Grid2D) -> ScalarField:
    """-Delta_h u - e^{u}; boundary ring invalid."""
    sampled = sample(u, eval_grid)
    lap = fd_laplacian(sampled)
    return ScalarField(grid=eval_grid, values=-lap.values - np.exp(sampled.values), valid=lap.valid)


def _outer_mass(u: ClosedFormField, V: Coefficient, src_mask: RegionMask, mu: float, src_tail: bool) -> float:
    """Mass carried by targets beyond the grid box.

    Far away I_mu[e^{lambda u} chi_src](x) is replaced by M_src (beta + |x - c|^2)^{-mu/2}
    with M_src the total source mass; the product with the e^{lambda u} tail is a
    radial profile integrated analytically.
    """
    if not isinstance(V, (int, float)):
        logger.warning("Outer tail mass needs a constant V, skipped")
        return 0.0
    lam = (4.0 - mu) / 4.0
    grid = src_mask.grid
    e_tail = _exp_tail(u, lam)
    e_lam = np.exp(lam * sample(u, grid).values)
    m_src = float(np.sum(e_lam * src_mask.weights) * grid.h ** 2)
    if src_tail:
        m_src += tail_mass_outside_box(e_tail, grid.bounds, settings.tail_angular_nodes)
    outer = RadialTail(center=e_tail.center, coeff=m_src * e_tail.coeff, beta=e_tail.beta, s=e_tail.s + 0.5 * mu)
    return float(V) * tail_mass_outside_box(outer, grid.bounds, settings.tail_angular_nodes)


def region_mass(
        u: ClosedFormField,
        V: Coefficient,
        src_mask: RegionMask,
        target_mask: RegionMask,
        mu: float,
        tail: bool = False,
) -> float:
    """Integral over the target of V I_mu[e^{lambda u} chi_src] e^{lambda u}.

    With `tail` the source extends beyond the grid box through the analytic tail
    of e^{lambda u}; a target covering the whole grid then extends beyond it too.
    """
    if not src_mask.grid.same_as(target_mask.grid):
        raise GeometryError("source and target masks live on different grids")
    if src_mask.is_empty and not tail:
        return 0.0
    density = nonlocal_density(u, V, src_mask, mu, tail)
    mass = integrate(density, target_mask)
    if tail and _is_full(target_mask):
        mass += _outer_mass(u, V, src_mask, mu, src_tail=True)
    if not math.isfinite(mass):
        raise NumericError(f"region mass is not finite for {u.kind}")
    return mass


def interaction_mass(
        u: ClosedFormField,
        V: Coefficient,
        src_mask: RegionMask,
        target_mask: RegionMask,
        mu: float,
        direct: bool = False,
) -> float:
    """Region mass between disjoint source and target masks.

    `direct` sums over the target nodes only, for grids too large for the FFT path.
    """
    if masks_overlap(src_mask, target_mask):
        raise GeometryError("interaction mass needs disjoint source and target masks")
    if src_mask.is_empty or target_mask.is_empty:
        return 0.0
    if not direct:
        return integrate(nonlocal_density(u, V, src_mask, mu), target_mask)

    cfg = RieszConfig(mu=mu)
    grid = src_mask.grid
    e_lam = ScalarField(grid=grid, values=np.exp(cfg.lam * sample(u, grid).values))
    ti, tj = np.nonzero(target_mask.weights)
    X, Y = grid.mesh()
    targets = np.column_stack([X[ti, tj], Y[ti, tj]])
    potential = riesz_direct(e_lam, src_mask, cfg, targets)
    coeff = _coefficient(V, grid)[ti, tj]
    return float(np.sum(coeff * potential * e_lam.values[ti, tj] * target_mask.weights[ti, tj]) * grid.h ** 2)


def mass_threshold(p: float, mu: float) -> float:
    """4 pi (1 - 1/(2 lambda p)), equal to 4 pi for p = infinity."""
    rel = exponents(mu, p)
    if math.isinf(p):
        return 4.0 * math.pi
    return 4.0 * math.pi * (1.0 - 1.0 / (2.0 * rel.lam * p))


def _strictly_monotone(values: Sequence[float], increasing: bool) -> bool:
    pairs = zip(values, values[1:])
    if increasing:
        return all(b > a for a, b in pairs)
    return all(b < a for a, b in pairs)


def _cluster_peaks(values: np.ndarray, candidates: np.ndarray, grid: Grid2D) -> list[tuple[int, int]]:
    #greedy clustering of peak nodes within 2h, strongest first
    idx = np.argwhere(candidates)
    order = np.lexsort((idx[:, 1], idx[:, 0], -values[idx[:, 0], idx[:, 1]]))
    chosen: list[tuple[int, int]] = []
    for i, j in idx[order]:
        if all(math.hypot(int(i) - a, int(j) - b) * grid.h > 2.0 * grid.h for a, b in chosen):
            chosen.append((int(i), int(j)))
    return chosen


def blowup_ball_mass(u: ClosedFormField, point: tuple[float, float], params: ClassifierParams) -> float:
    """Mass on a ball of radius 8 * growth * e^{-u(x)/2} about a blow-up point.

    Measured on a local grid of half width 2r with source ball 2r, so the
    resolution follows the concentration scale of the member.
    """
    r = 8.0 * params.growth * math.exp(-0.5 * u.at(point))
    local = make_grid(center=point, half_width=2.0 * r, n=params.local_n)
    src = disk_mask(local, point, 2.0 * r)
    target = disk_mask(local, point, r)
    return region_mass(u, params.V, src, target, params.mu)


def classify_alternative(
        family: Sequence[ClosedFormField],
        omega: RegionMask,
        params: ClassifierParams,
) -> AlternativeVerdict:
    """Finite-sample reading of the A1/A2/A3 alternatives.

    A2: the last member's sup over omega is below -T and sups decrease over the
    trend window. A1: every member stays below M on omega. A3: local maxima above M
    whose values increase over the trend window, each carrying at least the mass
    threshold minus the tolerance. Anything else is inconclusive.
    """
    if len(family) < 3:
        raise ConfigError(f"classification needs at least 3 family members, got {len(family)}")
    if omega.cell_count == 0:
        raise GeometryError("classification region is empty")
    grid = omega.grid
    samples = ordered_map(lambda u: sample(u, grid), family)
    sups = [masked_max(s, omega) for s in samples]
    infs = [masked_min(s, omega) for s in samples]
    window = min(params.trend_window, len(family))
    T, M = params.drop_threshold, params.bound_m

    if sups[-1] < -T and _strictly_monotone(sups[-window:], increasing=False):
        logger.info(f"Family diverges to -infinity: last sup {sups[-1]:.4g}")
        return AlternativeVerdict(verdict=Verdict.A2)

    if max(sups) <= M:
        logger.info(f"Family bounded above: sup {max(sups):.4g}, inf {min(infs):.4g}")
        return AlternativeVerdict(verdict=Verdict.A1)

    last = samples[-1].values
    peaks = (last == maximum_filter(last, size=3, mode='nearest')) & omega.flags & (last > M)
    points = []
    for i, j in _cluster_peaks(last, peaks, grid):
        trail = [s.values[i, j] for s in samples[-window:]]
        if _strictly_monotone(trail, increasing=True):
            points.append(grid.node(i, j))

    if not points:
        logger.warning("Family neither bounded, divergent, nor concentrating: inconclusive")
        return AlternativeVerdict(inconclusive=True, notes="no persistent maxima above the bound")

    masses = [blowup_ball_mass(family[-1], pt, params) for pt in points]
    floor = mass_threshold(params.p, params.mu) - params.mass_tolerance * EIGHT_PI
    if min(masses) < floor:
        logger.warning(f"Blow-up masses {masses} below threshold {floor:.4g}: inconclusive")
        return AlternativeVerdict(inconclusive=True, notes=f"mass below threshold {floor:.6g}")

    logger.info(f"Concentration at {len(points)} point(s), masses {[round(m, 4) for m in masses]}")
    return AlternativeVerdict(verdict=Verdict.A3, blowup_points=points, masses=masses)


def select_bubble(phi: ScalarField, x_tilde: tuple[float, float], rho: float, a: float) -> SelectionResult:
    """Discrete maximizer of psi(y) = (rho - |y - x~|)^a phi(y) over the ball.

    x~ is snapped to its nearest node; ties go to the smallest distance to x~, then
    to lexicographic node order. Both selection inequalities are checked in psi form.
    """
    grid = phi.grid
    if rho <= 0:
        raise ConfigError(f"selection radius must be positive, got {rho}")
    x0, x1, y0, y1 = grid.bounds
    if not (x0 <= x_tilde[0] - rho and x_tilde[0] + rho <= x1 and y0 <= x_tilde[1] - rho and x_tilde[1] + rho <= y1):
        raise GeometryError("selection ball must lie inside the grid")

    ci, cj = grid.nearest_index(x_tilde)
    center = grid.node(ci, cj)
    X, Y = grid.mesh()
    dist = np.hypot(X - center[0], Y - center[1])
    ball = dist < rho
    if np.any(phi.values[ball] <= 0):
        raise ConfigError("phi must be positive on the selection ball")

    psi = np.where(ball, np.clip(rho - dist, 0.0, None) ** a * phi.values, -np.inf)
    best = psi.max()
    ti, tj = np.nonzero(psi == best)
    pick = np.lexsort((tj, ti, dist[ti, tj]))[0]
    i, j = int(ti[pick]), int(tj[pick])

    r = (rho - dist[i, j]) / 2.0
    center_ok = bool(psi[i, j] >= psi[ci, cj])
    near = np.hypot(X - X[i, j], Y - Y[i, j]) <= r
    ball_ok = bool(np.all(psi[i, j] >= r ** a * phi.values[near] * (1.0 - 1e-12)))
    if not (center_ok and ball_ok):
        logger.warning(f"Selection inequalities failed at node ({i}, {j})")
    return SelectionResult(x=grid.node(i, j), r=r, center_inequality=center_ok, ball_inequality=ball_ok)


def sup_inf_functional(u: ClosedFormField, K: RegionMask, omega: RegionMask, C1: float) -> float:
    """max_K u + C1 min_omega u over grid nodes."""
    if C1 <= 1:
        raise ConfigError(f"C1 must exceed 1, got {C1}")
    if not K.grid.same_as(omega.grid):
        raise GeometryError("K and omega live on different grids")
    if K.cell_count == 0 or omega.cell_count == 0:
        raise GeometryError("sup+inf needs nonempty masks")
    if np.any(K.flags & ~omega.flags):
        raise ConfigError("K must be contained in omega")
    values = sample(u, omega.grid)
    return masked_max(values, K) + C1 * masked_min(values, omega)


def rescaled_sup_inf(u: ClosedFormField, x0: tuple[float, float], r: float, omega: RegionMask, C1: float) -> float:
    """u(x0) + C1 min_{B_r(x0)} u + 2 (1 + C1) log r, the minimum over omega nodes in the ball."""
    if r <= 0:
        raise ConfigError(f"radius must be positive, got {r}")
    ball = disk_mask(omega.grid, x0, r)
    nodes = ball.flags & omega.flags
    if not np.any(nodes):
        raise GeometryError("no omega nodes inside B_r(x0)")
    values = sample(u, omega.grid).values
    return u.at(x0) + C1 * float(values[nodes].min()) + 2.0 * (1.0 + C1) * math.log(r)


def _ball_inside(omega: RegionMask, x0, rho: float) -> bool:
    geometry = omega.geometry
    if isinstance(geometry, Disk):
        return math.hypot(x0[0] - geometry.center[0], x0[1] - geometry.center[1]) + rho <= geometry.radius * (1 + 1e-12)
    ball = disk_mask(omega.grid, x0, rho)
    return not np.any(ball.flags & ~omega.flags)


def driving_estimate_check(
        u: ClosedFormField,
        f: Union[ClosedFormField, ScalarField],
        x0: tuple[float, float],
        rho: float,
        r: float,
        omega: RegionMask,
) -> tuple[float, float]:
    """(u(x0) - min_omega u, (1/2 pi) int_{B_r(x0)} f log(rho/r)); expect lhs >= rhs."""
    if not 0 < r < rho:
        raise ConfigError(f"driving estimate needs 0 < r < rho, got r={r}, rho={rho}")
    if not _ball_inside(omega, x0, rho):
        raise GeometryError("B_rho(x0) must lie inside omega")
    grid = omega.grid
    f_field = f if isinstance(f, ScalarField) else sample(f, grid)
    if not f_field.grid.same_as(grid):
        raise GeometryError("f lives on a different grid than omega")
    if np.any(f_field.values < 0):
        raise ConfigError("driving estimate needs f >= 0")
    lhs = u.at(x0) - masked_min(sample(u, grid), omega)
    rhs = integrate(f_field, disk_mask(grid, x0, r)) * math.log(rho / r) / (2.0 * math.pi)
    return lhs, rhs


class BrezisMerleCheck(NamedTuple):
    lhs: float
    bound: float


def brezis_merle_check(f: ScalarField, disk: RegionMask, delta: float) -> BrezisMerleCheck:
    """lhs = int_disk exp((4 pi - delta)|u|/||f||_1) with u the Dirichlet solution; bound = (4 pi^2/delta) diam^2."""
    if not 0 < delta < 4 * math.pi:
        raise ConfigError(f"delta must lie in (0, 4 pi), got {delta}")
    if not isinstance(disk.geometry, Disk):
        raise GeometryError("Brezis-Merle check needs an exact disk mask")
    if np.any(f.values * disk.weights < 0):
        raise ConfigError("Brezis-Merle check needs f >= 0")
    f_norm = integrate(f, disk)
    if f_norm <= 0:
        raise ConfigError("Brezis-Merle check needs f not identically zero")
    u = dirichlet_disk_solve(f, disk)
    g = ScalarField(grid=f.grid, values=np.exp((4 * math.pi - delta) * np.abs(u.values) / f_norm))
    lhs = integrate(g, disk)
    bound = (4 * math.pi ** 2 / delta) * (2 * disk.geometry.radius) ** 2
    return BrezisMerleCheck(lhs=lhs, bound=bound)


def integrability_ratio(u: ClosedFormField, omega: RegionMask, mu: float, p: float = math.inf) -> float:
    """||I_mu[e^{lambda u} chi] e^{lambda u}||_{L^p'} / ||e^{lambda u}||_{L^q}^2 over omega."""
    rel = exponents(mu, p)
    grid = omega.grid
    values = sample(u, grid).values
    h2 = grid.h ** 2
    f = nonlocal_density(u, 1.0, omega, mu).values
    f_norm = float(np.sum(np.abs(f) ** rel.p_conj * omega.weights) * h2) ** (1.0 / rel.p_conj)
    e_norm = float(np.sum(np.exp(rel.lam * rel.q * values) * omega.weights) * h2) ** (1.0 / rel.q)
    if e_norm == 0.0:
        raise ConfigError("e^{lambda u} vanishes on omega")
    return f_norm / e_norm ** 2
