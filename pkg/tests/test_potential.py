import math

import numpy as np
import pytest

from core.exceptions import ConfigError, GeometryError
from schemas.bubble import BubbleParams
from schemas.grid import ScalarField
from schemas.potential import RieszConfig
from services.closed_form import bubble_constant, bubble_nonlocal, rigged_family
from services.field import disk_mask, full_mask, make_grid, sample
from services.potential import (
    dirichlet_disk_solve,
    hls_ratio,
    kernel_table,
    log_kernel_table,
    log_potential,
    log_potential_direct,
    perturbed_table,
    riesz_direct,
    riesz_fft,
)


def _indicator(grid, radius=1.0, mass=None):
    mask = disk_mask(grid, (0.0, 0.0), radius)
    scale = 1.0 if mass is None else mass / mask.area
    return ScalarField(grid=grid, values=scale * mask.weights)


def test_riesz_of_unit_disk_at_origin():
    grid = make_grid(half_width=1.25, n=129)
    center = grid.nearest_index((0.0, 0.0))
    value = riesz_fft(_indicator(grid), RieszConfig(mu=1.0)).values[center]
    assert value == pytest.approx(2.0 * math.pi, rel=2e-3)


@pytest.mark.parametrize("mu", [0.5, 1.0, 1.5])
def test_fft_matches_direct_sum_at_nodes(mu, rng):
    grid = make_grid(half_width=1.0, n=64)
    X, Y = grid.mesh()
    density = ScalarField(grid=grid, values=np.exp(-(X ** 2 + Y ** 2) / 0.2))
    cfg = RieszConfig(mu=mu)
    idx = rng.integers(0, 64, size=(20, 2))
    targets = np.array([grid.node(i, j) for i, j in idx])
    fast = riesz_fft(density, cfg).values[idx[:, 0], idx[:, 1]]
    slow = riesz_direct(density, None, cfg, targets)
    np.testing.assert_allclose(fast, slow, rtol=1e-9)


def test_direct_sum_off_lattice_is_close_to_neighbours():
    grid = make_grid(half_width=1.0, n=64)
    density = _indicator(grid, 0.6)
    cfg = RieszConfig(mu=1.0)
    a = riesz_direct(density, None, cfg, [grid.node(32, 32)])[0]
    b = riesz_direct(density, None, cfg, [grid.node(33, 32)])[0]
    mid = riesz_direct(density, None, cfg, [(0.5 * (grid.node(32, 32)[0] + grid.node(33, 32)[0]), grid.node(32, 32)[1])])[0]
    assert min(a, b) - 1e-2 <= mid <= max(a, b) + 1e-2


def test_support_restricts_the_source(unit_grid):
    density = ScalarField(grid=unit_grid, values=np.ones((65, 65)))
    cfg = RieszConfig(mu=1.0)
    whole = riesz_fft(density, cfg).values
    half = riesz_fft(density, cfg, support=disk_mask(unit_grid, (0.0, 0.0), 0.5)).values
    assert np.all(half < whole)


def test_bubble_potential_with_tail_matches_closed_form():
    mu = 1.0
    cfg = RieszConfig(mu=mu)
    grid = make_grid(half_width=6.0, n=129)
    U = bubble_nonlocal(BubbleParams(mu=mu))
    e_lam = ScalarField(grid=grid, values=np.exp(cfg.lam * sample(U, grid).values))
    potential = riesz_fft(e_lam, cfg, tail=U.exp_tail(cfg.lam)).values
    X, Y = grid.mesh()
    exact = bubble_constant(mu) ** cfg.lam * 2.0 * math.pi / (2.0 - mu) * (1.0 + X ** 2 + Y ** 2) ** (-0.5 * mu)
    inner = X ** 2 + Y ** 2 <= 9.0
    assert np.max(np.abs(potential[inner] / exact[inner] - 1.0)) < 5e-3


def test_perturbed_table_is_detected(unit_grid):
    cfg = RieszConfig(mu=1.0)
    density = _indicator(unit_grid, 0.5)
    table = kernel_table(unit_grid, cfg)
    faulty = perturbed_table(table, 1.5)
    assert faulty.center_value == pytest.approx(1.5 * table.center_value)
    node = unit_grid.node(32, 32)
    slow = riesz_direct(density, None, cfg, [node])[0]
    fast = riesz_fft(density, cfg, table=faulty).values[32, 32]
    assert abs(fast - slow) / slow > 1e-4


def test_table_must_match_grid(unit_grid):
    cfg = RieszConfig(mu=1.0)
    other = make_grid(half_width=1.0, n=33)
    with pytest.raises(ConfigError):
        riesz_fft(_indicator(unit_grid), cfg, table=kernel_table(other, cfg))


def test_support_on_foreign_grid(unit_grid):
    other = make_grid(half_width=1.0, n=33)
    with pytest.raises(GeometryError):
        riesz_fft(_indicator(unit_grid), RieszConfig(mu=1.0), support=disk_mask(other, (0.0, 0.0), 0.5))


def test_log_potential_of_unit_mass_disk():
    grid = make_grid(half_width=1.25, n=129)
    f = _indicator(grid, mass=1.0)
    center = grid.nearest_index((0.0, 0.0))
    assert log_potential(f).values[center] == pytest.approx(1.0 / (4.0 * math.pi), rel=2e-3)
    direct = log_potential_direct(f, None, [grid.node(*center)])[0]
    assert direct == pytest.approx(log_potential(f).values[center], rel=1e-9)


def test_log_potential_of_rigged_source_with_tail():
    k = 10
    grid = make_grid(half_width=1.0, n=257)
    F = rigged_family(k, 1.0).F
    center = grid.nearest_index((0.0, 0.0))
    value = log_potential(sample(F, grid), tail=F.tail).values[center]
    assert value == pytest.approx(4.0 * math.log(k), rel=1e-2)


def test_dirichlet_solution_of_constant_source():
    #h = 1/32 with a node on the origin and on (0.5, 0)
    grid = make_grid(half_width=65 / 64, n=65)
    disk = disk_mask(grid, (0.0, 0.0), 1.0)
    u = dirichlet_disk_solve(ScalarField(grid=grid, values=np.ones((65, 65))), disk)
    assert u.values[32, 32] == pytest.approx(0.25, abs=2e-3)
    assert u.values[48, 32] == pytest.approx(0.1875, abs=2e-3)
    assert u.values[0, 0] == 0.0


def test_dirichlet_needs_exact_disk(unit_grid):
    with pytest.raises(GeometryError):
        dirichlet_disk_solve(_indicator(unit_grid), full_mask(unit_grid))


def test_hls_ratio(unit_grid):
    f = _indicator(unit_grid, 0.5)
    diag = hls_ratio(f, None, 1.0, 4.0 / 3.0)
    assert diag.r == pytest.approx(4.0)
    assert 0 < diag.ratio < math.inf
    with pytest.raises(ConfigError):
        hls_ratio(f, None, 1.0, 2.5)
    zero = hls_ratio(ScalarField(grid=unit_grid, values=np.zeros((65, 65))), None, 1.0, 4.0 / 3.0)
    assert zero.degenerate and zero.ratio == 0.0


def _assert_grid_symmetric(values, atol):
    #the eight symmetries of the square lattice about its center
    for image in (values[::-1, :], values[:, ::-1], values.T, values[::-1, ::-1].T):
        np.testing.assert_allclose(image, values, rtol=0.0, atol=atol)


@pytest.mark.parametrize("mu", [0.5, 1.0, 1.5])
def test_kernel_tables_are_symmetric(mu):
    grid = make_grid(half_width=1.0, n=32)
    table = kernel_table(grid, RieszConfig(mu=mu)).values
    _assert_grid_symmetric(table, 1e-12 * np.abs(table).max())
    logs = log_kernel_table(grid).values
    _assert_grid_symmetric(logs, 1e-12 * np.abs(logs).max())


@pytest.mark.parametrize("mu", [0.5, 1.5])
def test_potential_of_radial_density_is_symmetric(mu):
    #even n centers the lattice on the origin
    grid = make_grid(half_width=1.0, n=64)
    X, Y = grid.mesh()
    values = riesz_fft(ScalarField(grid=grid, values=np.exp(-(X ** 2 + Y ** 2) / 0.2)), RieszConfig(mu=mu)).values
    assert values.min() > 0
    _assert_grid_symmetric(values, 1e-12 * values.max())


@pytest.mark.parametrize("source", ["constant", "random"])
def test_dirichlet_solution_vanishes_on_the_circle(source, rng):
    grid = make_grid(half_width=65 / 64, n=65)
    disk = disk_mask(grid, (0.0, 0.0), 1.0)
    values = np.ones((65, 65)) if source == "constant" else rng.uniform(0.5, 1.5, size=(65, 65))
    u = dirichlet_disk_solve(ScalarField(grid=grid, values=values), disk)
    #(+-1, 0) and (0, +-1) are nodes on the circle
    for i, j in ((64, 32), (0, 32), (32, 64), (32, 0)):
        assert u.values[i, j] == pytest.approx(0.0, abs=1e-9)
    #|grad u| <= 3/4 for 0 <= f <= 3/2, so the ring within h of the circle stays below h
    X, Y = grid.mesh()
    ring = disk.flags & (np.hypot(X, Y) > 1.0 - grid.h)
    assert np.abs(u.values[ring]).max() <= grid.h
