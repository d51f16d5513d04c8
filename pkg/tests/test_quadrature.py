import math

import numpy as np
import pytest
from scipy.integrate import dblquad, quad

from core.exceptions import GeometryError
from schemas.bubble import RadialTail
from services.quadrature import (
    box_cell_fractions,
    disk_cell_fractions,
    log_cell_integrals,
    riesz_cell_integrals,
    tail_mass_outside_box,
    tail_potential_outside_box,
)


def test_disk_fractions_sum_to_area():
    edges = np.linspace(-1.0, 1.0, 41)
    fractions = disk_cell_fractions(edges, edges, (0.13, -0.07), 0.71)
    cell = (edges[1] - edges[0]) ** 2
    assert fractions.sum() * cell == pytest.approx(math.pi * 0.71 ** 2, rel=1e-12)
    assert fractions.min() >= 0.0 and fractions.max() <= 1.0


def test_box_fractions():
    edges = np.linspace(0.0, 4.0, 5)
    fractions = box_cell_fractions(edges, edges, (0.5, 2.0, 1.0, 1.25))
    assert fractions[0, 1] == pytest.approx(0.25 * 0.5)
    assert fractions[1, 1] == pytest.approx(0.25)
    assert fractions[3, 3] == 0.0


def test_riesz_center_cell_closed_form():
    #integral of 1/|z| over the unit square about the origin is 4 log(1 + sqrt 2)
    value = riesz_cell_integrals(np.array(0.0), np.array(0.0), 1.0)
    assert float(value) == pytest.approx(4.0 * math.log(1.0 + math.sqrt(2.0)), rel=1e-10)


@pytest.mark.parametrize("mu", [0.5, 1.0, 1.5])
def test_riesz_offset_cell_matches_dblquad(mu):
    ox, oy = 2.0, -1.0
    reference, _ = dblquad(lambda y, x: math.hypot(x, y) ** -mu, ox - 0.5, ox + 0.5, oy - 0.5, oy + 0.5)
    assert float(riesz_cell_integrals(np.array(ox), np.array(oy), mu)) == pytest.approx(reference, rel=1e-8)


def _log_cell_reference(ox, oy):
    if ox == 0.0 and oy == 0.0:
        #polar about the singular center: eight triangles 0 <= theta <= pi/4, r <= 1/(2 cos theta)
        def wedge(theta):
            R = 0.5 / math.cos(theta)
            return R * R * (0.5 * math.log(R) - 0.25)
        return 8.0 * quad(wedge, 0.0, 0.25 * math.pi, epsabs=1e-13)[0]
    return dblquad(lambda y, x: math.log(math.hypot(x, y)), ox - 0.5, ox + 0.5, oy - 0.5, oy + 0.5)[0]


@pytest.mark.parametrize("ox, oy", [(0.0, 0.0), (1.0, 0.0), (3.0, 2.0)])
def test_log_cells_match_reference(ox, oy):
    reference = _log_cell_reference(ox, oy)
    assert float(log_cell_integrals(np.array(ox), np.array(oy))) == pytest.approx(reference, rel=1e-6, abs=1e-8)


def _outside_disk(tail: RadialTail, rho: float) -> float:
    return tail.coeff * math.pi * (tail.beta + rho ** 2) ** (1.0 - tail.s) / (tail.s - 1.0)


@pytest.mark.parametrize("s", [1.5, 2.0, 3.0])
def test_tail_mass_between_inscribed_and_circumscribed_disks(s):
    tail = RadialTail(coeff=2.0, beta=1.0, s=s)
    L = 3.0
    mass = tail_mass_outside_box(tail, (-L, L, -L, L))
    assert _outside_disk(tail, L * math.sqrt(2)) < mass < _outside_disk(tail, L)


def test_tail_mass_of_off_center_profile_is_translation_invariant():
    centered = tail_mass_outside_box(RadialTail(coeff=1.0, beta=0.5, s=2.0), (-2, 2, -2, 2))
    shifted = tail_mass_outside_box(RadialTail(center=(1.0, 0.5), coeff=1.0, beta=0.5, s=2.0), (-1, 3, -1.5, 2.5))
    assert shifted == pytest.approx(centered, rel=1e-12)


def test_tail_rejects_bad_geometry():
    with pytest.raises(GeometryError):
        tail_mass_outside_box(RadialTail(coeff=1.0, s=0.8), (-1, 1, -1, 1))
    with pytest.raises(GeometryError):
        tail_mass_outside_box(RadialTail(center=(5.0, 0.0), coeff=1.0, s=2.0), (-1, 1, -1, 1))


def test_tail_potential_with_unit_kernel_is_tail_mass():
    tail = RadialTail(coeff=1.0, beta=1.0, s=2.5)
    box = (-2.0, 2.0, -2.0, 2.0)
    values = tail_potential_outside_box(tail, box, np.ones_like, np.array([[0.0, 0.0], [0.5, -1.0]]), 64, 64)
    np.testing.assert_allclose(values, tail_mass_outside_box(tail, box, 64), rtol=1e-8)
