import math

import numpy as np
import pytest
from pydantic import ValidationError

from core.exceptions import ConfigError, GeometryError
from schemas.grid import Annulus, Box, Complement, Disk, Grid2D, ScalarField
from services.field import (
    disk_mask,
    fd_laplacian,
    full_mask,
    integrate,
    make_grid,
    mask_difference,
    masked_max,
    masks_overlap,
    region_mask,
    sample,
)


def test_node_positions():
    grid = Grid2D(center=(1.0, -2.0), half_width=2.0, n=8)
    assert grid.h == 0.5
    assert grid.node(0, 0) == pytest.approx((1.0 - 2.0 + 0.25, -2.0 - 2.0 + 0.25))
    assert grid.node(3, 5) == pytest.approx((1.0 - 2.0 + 3.5 * 0.5, -2.0 - 2.0 + 5.5 * 0.5))
    with pytest.raises(IndexError):
        grid.node(8, 0)


def test_odd_grid_has_origin_node(unit_grid):
    assert unit_grid.node(32, 32) == pytest.approx((0.0, 0.0))
    assert unit_grid.nearest_index((0.0, 0.0)) == (32, 32)


@pytest.mark.parametrize("kwargs", [dict(half_width=0.0, n=8), dict(half_width=1.0, n=2)])
def test_make_grid_rejects(kwargs):
    with pytest.raises(ConfigError):
        make_grid(**kwargs)


@pytest.mark.parametrize("n", [32, 64, 128])
def test_disk_area_within_perimeter_band(n):
    grid = make_grid(half_width=1.5, n=n)
    mask = disk_mask(grid, (0.1, -0.2), 1.0)
    flag_area = mask.cell_count * grid.h ** 2
    assert abs(flag_area - math.pi) <= 4 * grid.h * 2 * math.pi
    #fractional weights are exact up to rounding
    assert mask.area == pytest.approx(math.pi, rel=1e-10)


def test_annulus_and_complement_partition(unit_grid):
    disk = region_mask(unit_grid, Disk(radius=0.5))
    ring = region_mask(unit_grid, Annulus(r_in=0.5, r_out=0.9))
    outside = region_mask(unit_grid, Complement(inner=Disk(radius=0.9)))
    total = disk.weights + ring.weights + outside.weights
    np.testing.assert_allclose(total, 1.0, atol=1e-12)
    assert not masks_overlap(disk, outside)


def test_annulus_validation():
    with pytest.raises(ValidationError):
        Annulus(r_in=1.0, r_out=0.5)
    with pytest.raises(ValidationError):
        Box(x_min=1.0, x_max=0.0, y_min=0.0, y_max=1.0)


def test_empty_mask_warns():
    grid = make_grid(half_width=1.0, n=16)
    mask = disk_mask(grid, (5.0, 5.0), 0.5)
    assert mask.is_empty
    assert mask.warning is not None


def test_mask_difference(unit_grid):
    big = disk_mask(unit_grid, (0.0, 0.0), 0.8)
    small = disk_mask(unit_grid, (0.0, 0.0), 0.4)
    ring = mask_difference(big, small)
    assert ring.area == pytest.approx(math.pi * (0.64 - 0.16), rel=1e-10)


def test_field_arithmetic_merges_validity(unit_grid):
    ones = np.ones((65, 65))
    valid = np.ones((65, 65), dtype=bool)
    valid[0, 0] = False
    a = ScalarField(grid=unit_grid, values=ones, valid=valid)
    b = ScalarField(grid=unit_grid, values=2 * ones)
    total = a + b
    assert total.values[5, 5] == 3.0
    assert not total.valid_mask[0, 0]
    assert (2 * b - a).values[1, 1] == 3.0
    assert (-a).values[2, 2] == -1.0


def test_field_rejects_foreign_grid(unit_grid):
    other = make_grid(half_width=1.0, n=33)
    a = ScalarField(grid=unit_grid, values=np.zeros((65, 65)))
    b = ScalarField(grid=other, values=np.zeros((33, 33)))
    with pytest.raises(GeometryError):
        a + b


def test_field_rejects_non_finite(unit_grid):
    values = np.zeros((65, 65))
    values[3, 3] = np.nan
    with pytest.raises(ValidationError):
        ScalarField(grid=unit_grid, values=values)


def test_field_is_immutable(unit_grid):
    f = ScalarField(grid=unit_grid, values=np.zeros((65, 65)))
    with pytest.raises(ValueError):
        f.values[0, 0] = 1.0


def test_integrate_skips_invalid_nodes(unit_grid):
    valid = np.zeros((65, 65), dtype=bool)
    f = ScalarField(grid=unit_grid, values=np.ones((65, 65)), valid=valid)
    assert integrate(f, full_mask(unit_grid)) == 0.0


def test_laplacian_of_quadratic(unit_grid):
    f = sample(lambda x, y: x ** 2 + 3 * y ** 2, unit_grid)
    lap = fd_laplacian(f)
    assert not lap.valid_mask[0, 10]
    np.testing.assert_allclose(lap.values[1:-1, 1:-1], 8.0, rtol=1e-9)
    assert masked_max(lap, disk_mask(unit_grid, (0.0, 0.0), 0.5)) == pytest.approx(8.0)


def test_integrate_converges_at_second_order():
    #exact integral of exp(x + y/2) over [-1, 1]^2
    exact = (math.e - 1 / math.e) * 2.0 * (math.exp(0.5) - math.exp(-0.5))
    errors = []
    for n in (16, 32, 64):
        grid = make_grid(half_width=1.0, n=n)
        f = sample(lambda x, y: np.exp(x + 0.5 * y), grid)
        errors.append(abs(integrate(f, full_mask(grid)) - exact))
    orders = [math.log2(a / b) for a, b in zip(errors, errors[1:])]
    assert min(orders) >= 1.8


def test_laplacian_is_linear(unit_grid, rng):
    f = ScalarField(grid=unit_grid, values=rng.normal(size=(65, 65)))
    g = ScalarField(grid=unit_grid, values=rng.normal(size=(65, 65)))
    a, b = 2.5, -0.75
    combined = fd_laplacian(a * f + b * g)
    separate = a * fd_laplacian(f) + b * fd_laplacian(g)
    inner = combined.valid_mask
    scale = np.abs(separate.values[inner]).max()
    np.testing.assert_allclose(combined.values[inner], separate.values[inner], rtol=0.0, atol=1e-12 * scale)
