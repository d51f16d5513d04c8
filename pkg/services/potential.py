"""Riesz potential, logarithmic potential and the Dirichlet solver on a disk.

The fast path is a zero-padded FFT convolution with a KernelTable; the direct
sums use the very same weights at grid nodes and serve as its oracle.
"""
import math
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from scipy.fft import irfft2, rfft2
from scipy.interpolate import RectBivariateSpline

from core.config import settings
from core.exceptions import ConfigError, GeometryError
from core.logger import get_logger
from schemas.bubble import RadialTail
from schemas.grid import Disk, Grid2D, RegionMask, ScalarField
from schemas.potential import HLSDiagnostic, KernelKind, KernelTable, RieszConfig, SingularRule
from services.quadrature import (
    log_cell_integrals,
    log_unit_block,
    riesz_cell_integrals,
    riesz_unit_block,
    tail_potential_outside_box,
)

logger = get_logger(__name__)

_TWO_PI = 2.0 * math.pi


class _Kernel:
    """Point values and exact cell averages of one kernel at spacing h."""

    def __init__(self, kind: KernelKind, h: float, mu: Optional[float], rule: SingularRule, near_cells: int):
        self.kind = kind
        self.h = h
        self.mu = mu
        self.rule = rule
        self.m = near_cells if rule == SingularRule.POLAR_LOCAL else 0

    def point(self, d2: np.ndarray) -> np.ndarray:
        #d2 is the squared offset in cell units
        with np.errstate(divide='ignore'):
            if self.kind == KernelKind.RIESZ:
                return self.h ** (-self.mu) * d2 ** (-0.5 * self.mu)
            return math.log(self.h) + 0.5 * np.log(d2)

    def block(self, m: int) -> np.ndarray:
        if self.kind == KernelKind.RIESZ:
            return riesz_unit_block(self.mu, m) * self.h ** (-self.mu)
        return log_unit_block(m) + math.log(self.h)

    def cell_average(self, ox: np.ndarray, oy: np.ndarray) -> np.ndarray:
        if self.kind == KernelKind.RIESZ:
            return riesz_cell_integrals(ox, oy, self.mu) * self.h ** (-self.mu)
        return log_cell_integrals(ox, oy) + math.log(self.h)

    def distance(self, d: np.ndarray) -> np.ndarray:
        #kernel as a function of physical distance, for tail integrals
        if self.kind == KernelKind.RIESZ:
            return d ** (-self.mu)
        return np.log(d)


def _kernel_for(cfg: Optional[RieszConfig], h: float, kind: KernelKind) -> _Kernel:
    if kind == KernelKind.RIESZ:
        return _Kernel(kind, h, cfg.mu, cfg.singular_rule, settings.near_field_cells)
    rule = cfg.singular_rule if cfg is not None else SingularRule(settings.singular_rule)
    return _Kernel(kind, h, None, rule, settings.near_field_cells)


@lru_cache(maxsize=32)
def _cached_table(kind: KernelKind, h: float, n: int, mu: Optional[float], rule: SingularRule, near_cells: int) -> KernelTable:
    kernel = _Kernel(kind, h, mu, rule, near_cells)
    k = np.arange(-(n - 1), n, dtype=float)
    d2 = k[:, None] ** 2 + k[None, :] ** 2
    values = kernel.point(d2)
    m = min(kernel.m, n - 1)
    c = n - 1
    values[c - m:c + m + 1, c - m:c + m + 1] = kernel.block(m)
    logger.debug(f"Built {kind.value} kernel table: n={n}, h={h:.6g}, near block {2 * m + 1}x{2 * m + 1}")
    return KernelTable(kind=kind, h=h, n=n, mu=mu, near_cells=m, rule=rule, values=values)


def kernel_table(grid: Grid2D, cfg: RieszConfig) -> KernelTable:
    return _cached_table(KernelKind.RIESZ, grid.h, grid.n, cfg.mu, cfg.singular_rule, settings.near_field_cells)


def log_kernel_table(grid: Grid2D) -> KernelTable:
    return _cached_table(KernelKind.LOG, grid.h, grid.n, None, SingularRule(settings.singular_rule), settings.near_field_cells)


def perturbed_table(table: KernelTable, center_scale: float) -> KernelTable:
    """Copy of a table with the center weight scaled; used to check that the oracle notices."""
    values = np.array(table.values)
    values[table.n - 1, table.n - 1] *= center_scale
    return table.model_copy(update={"values": values})


def _weighted_density(density: ScalarField, support: Optional[RegionMask]) -> np.ndarray:
    if support is None:
        return density.values
    if not density.grid.same_as(support.grid):
        raise GeometryError("density and support live on different grids")
    return density.values * support.weights


def _convolve(rho: np.ndarray, table: KernelTable, padding_factor: int) -> np.ndarray:
    n = table.n
    size = padding_factor * n
    if size < 2 * n - 1:
        raise ConfigError(f"padded size {size} is too small for a linear convolution of {n} cells")
    spectrum = rfft2(rho, s=(size, size)) * rfft2(table.values, s=(size, size))
    full = irfft2(spectrum, s=(size, size))
    return full[n - 1:2 * n - 1, n - 1:2 * n - 1] * table.h ** 2


def _check_table(table: KernelTable, grid: Grid2D, kind: KernelKind):
    if table.kind != kind or table.n != grid.n or not math.isclose(table.h, grid.h, rel_tol=1e-12):
        raise ConfigError("kernel table does not match the density grid")


def _tail_field(grid: Grid2D, tail: RadialTail, kernel: _Kernel) -> np.ndarray:
    """Potential of the tail beyond the box at every node, splined from a coarse lattice."""
    P = settings.tail_lattice_points
    ax = np.linspace(grid.axis_x[0], grid.axis_x[-1], P)
    ay = np.linspace(grid.axis_y[0], grid.axis_y[-1], P)
    AX, AY = np.meshgrid(ax, ay, indexing='ij')
    pts = np.column_stack([AX.ravel(), AY.ravel()])
    vals = tail_potential_outside_box(tail, grid.bounds, kernel.distance, pts,
                                      settings.tail_angular_nodes, settings.tail_radial_nodes).reshape(P, P)
    spline = RectBivariateSpline(ax, ay, vals, kx=3, ky=3)
    return spline(grid.axis_x, grid.axis_y)


def riesz_fft(
        density: ScalarField,
        cfg: RieszConfig,
        support: Optional[RegionMask] = None,
        tail: Optional[RadialTail] = None,
        table: Optional[KernelTable] = None,
) -> ScalarField:
    """I_mu[density * chi_support] at every node.

    With a tail profile the potential of the density beyond the grid box is added
    from the analytic tail integrals (lattice + bicubic spline).
    """
    grid = density.grid
    if table is None:
        table = kernel_table(grid, cfg)
    _check_table(table, grid, KernelKind.RIESZ)
    rho = _weighted_density(density, support)
    if np.any(rho < 0):
        logger.warning("Riesz potential of a density with negative values")
    values = _convolve(rho, table, cfg.padding_factor)
    if tail is not None:
        values = values + _tail_field(grid, tail, _kernel_for(cfg, grid.h, KernelKind.RIESZ))
    return ScalarField(grid=grid, values=values)


def _lattice_offsets(grid: Grid2D, targets: np.ndarray) -> tuple[np.ndarray, bool]:
    #fractional node coordinates of targets; second value tells whether all sit on nodes
    x0, _, y0, _ = grid.bounds
    fi = (targets[:, 0] - x0) / grid.h - 0.5
    fj = (targets[:, 1] - y0) / grid.h - 0.5
    frac = np.column_stack([fi, fj])
    on_lattice = bool(np.all(np.abs(frac - np.round(frac)) < 1e-9))
    return frac, on_lattice


def _direct_sum(
        density: ScalarField,
        support: Optional[RegionMask],
        targets: Sequence,
        kernel: _Kernel,
        chunk: int = 256,
) -> np.ndarray:
    grid = density.grid
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    rho = _weighted_density(density, support)
    src_i, src_j = np.nonzero(rho)
    out = np.zeros(len(targets))
    if src_i.size == 0:
        return out
    src_rho = rho[src_i, src_j] * grid.h ** 2
    #keep the (targets x sources) work arrays around a couple million entries
    chunk = max(1, min(chunk, 2_000_000 // src_i.size))

    frac, on_lattice = _lattice_offsets(grid, targets)
    if on_lattice:
        frac = np.round(frac)
    m = kernel.m
    block = kernel.block(m) if on_lattice else None

    for start in range(0, len(targets), chunk):
        f = frac[start:start + chunk]
        ox = f[:, 0, None] - src_i[None, :]
        oy = f[:, 1, None] - src_j[None, :]
        w = kernel.point(ox ** 2 + oy ** 2)

        if on_lattice:
            near = (np.abs(ox) <= m) & (np.abs(oy) <= m)
            w[near] = block[ox[near].astype(int) + m, oy[near].astype(int) + m]
        else:
            reach = m + 0.5 if m > 0 else 0.5
            near = (np.abs(ox) < reach) & (np.abs(oy) < reach)
            if np.any(near):
                w[near] = kernel.cell_average(ox[near], oy[near])
        out[start:start + chunk] = w @ src_rho
    return out


def riesz_direct(
        density: ScalarField,
        support: Optional[RegionMask],
        cfg: RieszConfig,
        targets: Sequence,
        tail: Optional[RadialTail] = None,
) -> np.ndarray:
    """Brute-force I_mu[density * chi_support] at explicit targets.

    At grid nodes the weights coincide with the KernelTable; elsewhere the near
    cells get exact kernel averages for the actual offsets.
    """
    rho = _weighted_density(density, support)
    if np.any(rho < 0):
        logger.warning("Riesz potential of a density with negative values")
    kernel = _kernel_for(cfg, density.grid.h, KernelKind.RIESZ)
    values = _direct_sum(density, support, targets, kernel)
    if tail is not None:
        values = values + tail_potential_outside_box(tail, density.grid.bounds, kernel.distance,
                                                     np.atleast_2d(np.asarray(targets, dtype=float)),
                                                     settings.tail_angular_nodes, settings.tail_radial_nodes)
    return values


def log_potential(f: ScalarField, support: Optional[RegionMask] = None, tail: Optional[RadialTail] = None) -> ScalarField:
    """(Gamma * f)(x) = -(1/2 pi) sum f(y) log|x - y| h^2 at every node, plus the tail beyond the box."""
    grid = f.grid
    table = log_kernel_table(grid)
    values = _convolve(_weighted_density(f, support), table, settings.riesz_padding_factor)
    if tail is not None:
        values = values + _tail_field(grid, tail, _kernel_for(None, grid.h, KernelKind.LOG))
    return ScalarField(grid=grid, values=-values / _TWO_PI)


def log_potential_direct(f: ScalarField, support: Optional[RegionMask], targets: Sequence,
                         tail: Optional[RadialTail] = None) -> np.ndarray:
    kernel = _kernel_for(None, f.grid.h, KernelKind.LOG)
    values = _direct_sum(f, support, targets, kernel)
    if tail is not None:
        values = values + tail_potential_outside_box(tail, f.grid.bounds, kernel.distance,
                                                     np.atleast_2d(np.asarray(targets, dtype=float)),
                                                     settings.tail_angular_nodes, settings.tail_radial_nodes)
    return -values / _TWO_PI


def dirichlet_disk_solve(f: ScalarField, disk: RegionMask, chunk: int = 256) -> ScalarField:
    """u = sum G(x, y) f(y) h^2 with the Dirichlet Green's function of the disk.

    In scaled coordinates x' = (x - c)/R:
    G = -(1/2 pi) [log|x' - y'| - 1/2 log(|x'|^2 |y'|^2 - 2 x'.y' + 1)],
    which reduces to -(1/2 pi) log|y'| at x' = 0. u vanishes outside the disk.
    """
    if not isinstance(disk.geometry, Disk):
        raise GeometryError("dirichlet_disk_solve needs a mask with exact disk geometry")
    if not f.grid.same_as(disk.grid):
        raise GeometryError("source and disk mask live on different grids")
    grid = f.grid
    c = disk.geometry.center
    R = disk.geometry.radius

    targets_i, targets_j = np.nonzero(disk.flags)
    u = np.zeros((grid.n, grid.n))
    if targets_i.size == 0:
        return ScalarField(grid=grid, values=u)

    # singular log|x - y| part with the same cell weights as the log potential
    kernel = _kernel_for(None, grid.h, KernelKind.LOG)
    X, Y = grid.mesh()
    pts = np.column_stack([X[targets_i, targets_j], Y[targets_i, targets_j]])
    log_part = _direct_sum(f, disk, pts, kernel, chunk=chunk)

    rho = f.values * disk.weights
    total = float(np.sum(rho) * grid.h ** 2)
    #image part: log R + (1/2) log(|x'|^2 |y'|^2 - 2 x'.y' + 1) = (1/2) log|x'|^2 + log|y - x*|
    #with x* = c + R^2 (x - c)/|x - c|^2, summed with the same near-cell weights as the
    #singular part since x* meets the sources when x is on the circle
    tx = (pts[:, 0] - c[0]) / R
    ty = (pts[:, 1] - c[1]) / R
    t2 = tx ** 2 + ty ** 2
    regular = np.full(len(pts), math.log(R) * total)
    off_center = t2 > 1e-24
    if np.any(off_center):
        images = np.column_stack([c[0] + R * tx[off_center] / t2[off_center],
                                  c[1] + R * ty[off_center] / t2[off_center]])
        regular[off_center] = 0.5 * np.log(t2[off_center]) * total + _direct_sum(f, disk, images, kernel, chunk=chunk)

    u[targets_i, targets_j] = -(log_part - regular) / _TWO_PI
    return ScalarField(grid=grid, values=u)


def hls_ratio(f: ScalarField, support: Optional[RegionMask], mu: float, p: float) -> HLSDiagnostic:
    """||I_mu f||_{L^r} / ||f||_{L^p} with 1/r = 1/p - (2 - mu)/2, both norms by grid quadrature."""
    cfg = RieszConfig(mu=mu)
    upper = 2.0 / (2.0 - mu)
    if not (1.0 < p < upper):
        raise ConfigError(f"inadmissible HLS pair: need 1 < p < {upper:.6g} for mu={mu}, got p={p}")
    r = 1.0 / (1.0 / p - (2.0 - mu) / 2.0)

    grid = f.grid
    weights = support.weights if support is not None else np.ones((grid.n, grid.n))
    h2 = grid.h ** 2
    norm_p = float(np.sum(np.abs(f.values) ** p * weights) * h2) ** (1.0 / p)
    if norm_p == 0.0:
        logger.warning("HLS ratio of a zero density, returning 0")
        return HLSDiagnostic(ratio=0.0, p=p, r=r, mu=mu, degenerate=True)

    potential = riesz_fft(f, cfg, support)
    norm_r = float(np.sum(np.abs(potential.values) ** r) * h2) ** (1.0 / r)
    return HLSDiagnostic(ratio=norm_r / norm_p, p=p, r=r, mu=mu)
