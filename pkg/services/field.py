from typing import Optional

import numpy as np

from core.exceptions import ConfigError, GeometryError, NumericError
from core.logger import get_logger
from schemas.bubble import RadialTail
from schemas.grid import Annulus, Box, Complement, Disk, Grid2D, RegionMask, ScalarField
from services.quadrature import box_cell_fractions, disk_cell_fractions, tail_mass_outside_box
from core.config import settings

logger = get_logger(__name__)


def make_grid(center=(0.0, 0.0), half_width: float = 1.0, n: int = 64) -> Grid2D:
    if n < 4:
        raise ConfigError(f"grid needs at least 4 cells per axis, got n={n}")
    if not half_width > 0:
        raise ConfigError(f"grid half width must be positive, got {half_width}")
    return Grid2D(center=center, half_width=half_width, n=n)


def sample(f, grid: Grid2D) -> ScalarField:
    """Point values of a closed-form field at every node (no interpolation)."""
    X, Y = grid.mesh()
    values = np.asarray(f(X, Y), dtype=float)
    if values.shape != X.shape:
        values = np.broadcast_to(values, X.shape)
    if not np.all(np.isfinite(values)):
        bad = int(np.count_nonzero(~np.isfinite(values)))
        raise NumericError(f"sampling {getattr(f, 'kind', f)} produced {bad} non-finite values")
    return ScalarField(grid=grid, values=values)


def _edges(grid: Grid2D) -> tuple[np.ndarray, np.ndarray]:
    x0, _, y0, _ = grid.bounds
    k = np.arange(grid.n + 1)
    return x0 + k * grid.h, y0 + k * grid.h


def _weights_for(grid: Grid2D, geometry) -> tuple[np.ndarray, np.ndarray]:
    X, Y = grid.mesh()
    xe, ye = _edges(grid)
    if isinstance(geometry, Disk):
        d2 = (X - geometry.center[0]) ** 2 + (Y - geometry.center[1]) ** 2
        flags = d2 <= geometry.radius ** 2
        weights = disk_cell_fractions(xe, ye, geometry.center, geometry.radius)
    elif isinstance(geometry, Annulus):
        d2 = (X - geometry.center[0]) ** 2 + (Y - geometry.center[1]) ** 2
        flags = (d2 <= geometry.r_out ** 2) & (d2 > geometry.r_in ** 2)
        weights = disk_cell_fractions(xe, ye, geometry.center, geometry.r_out)
        if geometry.r_in > 0:
            weights = np.clip(weights - disk_cell_fractions(xe, ye, geometry.center, geometry.r_in), 0.0, 1.0)
    elif isinstance(geometry, Box):
        flags = (X >= geometry.x_min) & (X <= geometry.x_max) & (Y >= geometry.y_min) & (Y <= geometry.y_max)
        weights = box_cell_fractions(xe, ye, (geometry.x_min, geometry.x_max, geometry.y_min, geometry.y_max))
    elif isinstance(geometry, Complement):
        inner_flags, inner_weights = _weights_for(grid, geometry.inner)
        flags = ~inner_flags
        weights = 1.0 - inner_weights
    else:
        raise GeometryError(f"unsupported geometry {geometry!r}")
    return flags, weights


def region_mask(grid: Grid2D, geometry) -> RegionMask:
    flags, weights = _weights_for(grid, geometry)
    warning = None
    if not np.any(weights > 0):
        warning = f"{geometry.kind} does not intersect the grid"
        logger.warning(f"Empty region mask: {warning}")
    return RegionMask(grid=grid, flags=flags, weights=weights, geometry=geometry, warning=warning)


def full_mask(grid: Grid2D) -> RegionMask:
    x0, x1, y0, y1 = grid.bounds
    shape = (grid.n, grid.n)
    return RegionMask(grid=grid, flags=np.ones(shape, dtype=bool), weights=np.ones(shape),
                      geometry=Box(x_min=x0, x_max=x1, y_min=y0, y_max=y1))


def disk_mask(grid: Grid2D, center, radius: float) -> RegionMask:
    return region_mask(grid, Disk(center=center, radius=radius))


def mask_difference(a: RegionMask, b: RegionMask) -> RegionMask:
    #cells of a not covered by b, weights subtract
    _check_same_grid(a.grid, b.grid)
    return RegionMask(grid=a.grid, flags=a.flags & ~b.flags,
                      weights=np.clip(a.weights - b.weights, 0.0, 1.0))


def masks_overlap(a: RegionMask, b: RegionMask) -> bool:
    _check_same_grid(a.grid, b.grid)
    return bool(np.any((a.weights > 0) & (b.weights > 0)))


def _check_same_grid(a: Grid2D, b: Grid2D):
    if not a.same_as(b):
        raise GeometryError("operands live on different grids")


def integrate(f: ScalarField, region: RegionMask, tail: Optional[RadialTail] = None) -> float:
    """Midpoint rule sum(values * weights) h^2 over the region.

    Invalid nodes of f are skipped. A tail profile adds its integral over the plane
    outside the grid box.
    """
    _check_same_grid(f.grid, region.grid)
    weights = region.weights
    if f.valid is not None:
        weights = weights * f.valid
    total = float(np.sum(f.values * weights) * f.grid.h ** 2)
    if tail is not None:
        total += tail_mass_outside_box(tail, f.grid.bounds, settings.tail_angular_nodes)
    return total


def fd_laplacian(u: ScalarField) -> ScalarField:
    """Five-point Laplacian on interior nodes; the boundary ring is flagged invalid."""
    v = u.values
    h2 = u.grid.h ** 2
    out = np.zeros_like(v)
    out[1:-1, 1:-1] = (v[2:, 1:-1] + v[:-2, 1:-1] + v[1:-1, 2:] + v[1:-1, :-2] - 4.0 * v[1:-1, 1:-1]) / h2

    valid = np.zeros(v.shape, dtype=bool)
    src = u.valid_mask
    valid[1:-1, 1:-1] = (src[1:-1, 1:-1] & src[2:, 1:-1] & src[:-2, 1:-1] & src[1:-1, 2:] & src[1:-1, :-2])
    return ScalarField(grid=u.grid, values=out, valid=valid)


def masked_values(f: ScalarField, mask: RegionMask) -> np.ndarray:
    _check_same_grid(f.grid, mask.grid)
    sel = mask.flags & f.valid_mask
    return f.values[sel]


def masked_max(f: ScalarField, mask: RegionMask) -> float:
    vals = masked_values(f, mask)
    if vals.size == 0:
        raise GeometryError("max over an empty mask")
    return float(vals.max())


def masked_min(f: ScalarField, mask: RegionMask) -> float:
    vals = masked_values(f, mask)
    if vals.size == 0:
        raise GeometryError("min over an empty mask")
    return float(vals.min())


def masked_sup_abs(f: ScalarField, mask: RegionMask) -> float:
    vals = masked_values(f, mask)
    if vals.size == 0:
        raise GeometryError("sup over an empty mask")
    return float(np.max(np.abs(vals)))
