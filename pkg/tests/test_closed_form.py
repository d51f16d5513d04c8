import math

import numpy as np
import pytest
from pydantic import ValidationError

from core.exceptions import ConfigError
from schemas.bubble import BubbleParams, RadialTail
from services.closed_form import (
    MAX_DEPTH,
    Constant,
    RadialPower,
    Rescaled,
    bubble_constant,
    bubble_local,
    bubble_nonlocal,
    exponents,
    kelvin,
    nonlocal_energy,
    rescale,
    rigged_family,
    superpose,
)

U_AT_ORIGIN = (2.0 / 3.0) * math.log(4.0 / math.pi)

points = np.array([[0.3, -0.1], [1.5, 2.0], [-0.7, 0.25], [4.0, -3.0]])


def test_local_bubble_values():
    assert bubble_local().at((0.0, 0.0)) == pytest.approx(math.log(8.0))
    assert bubble_local(delta=3.0).at((0.0, 0.0)) == pytest.approx(math.log(8.0) + 2 * math.log(3.0))


@pytest.mark.parametrize("delta, expected", [(1.0, 0.16104), (10.0, 4.76626)])
def test_nonlocal_bubble_values(delta, expected):
    U = bubble_nonlocal(BubbleParams(mu=1.0, delta=delta))
    assert U.at((0.0, 0.0)) == pytest.approx(expected, abs=1e-4)


def test_rigged_family_values():
    family = rigged_family(1, 1.0)
    assert family.A == pytest.approx(1.08385, abs=1e-5)
    assert family.u.at((0.0, 0.0)) == pytest.approx(2 * math.log(family.A))
    assert family.u.at((0.0, 0.0)) == pytest.approx(U_AT_ORIGIN)
    assert rigged_family(10, 1.0).u.at((0.0, 0.0)) == pytest.approx(4.76621, abs=1e-4)
    assert rigged_family(10, 1.0).F.at((0.0, 0.0)) == pytest.approx(800.0)


@pytest.mark.parametrize("k, mu", [(0, 1.0), (2, 2.0), (2, 0.0)])
def test_rigged_family_rejects(k, mu):
    with pytest.raises(ConfigError):
        rigged_family(k, mu)


def test_energy_constants():
    assert nonlocal_energy(1.0) == pytest.approx(4 ** (2 / 3) * math.pi ** (1 / 3))
    assert nonlocal_energy(1.0) == pytest.approx(3.6905, abs=1e-4)
    #e^{U} = C (1 + |x|^2)^-2 integrates to C pi
    assert nonlocal_energy(1.0) == pytest.approx(bubble_constant(1.0) * math.pi)


@pytest.mark.parametrize("mu", [0.25, 1.0, 1.75])
@pytest.mark.parametrize("p", [math.inf, 5.0, 40.0])
def test_exponent_identity(mu, p):
    if not p > 2 / mu:
        pytest.skip("inadmissible pair")
    rel = exponents(mu, p)
    assert rel.identity_defect() < 1e-12
    assert rel.lam == pytest.approx((4 - mu) / 4)


@pytest.mark.parametrize("mu, p", [(2.5, math.inf), (0.0, math.inf), (1.0, 2.0), (0.5, 3.0)])
def test_exponents_reject(mu, p):
    with pytest.raises(ConfigError):
        exponents(mu, p)


def test_bubble_params_validation():
    with pytest.raises(ValidationError):
        BubbleParams(mu=2.5)
    with pytest.raises(ValidationError):
        BubbleParams(mu=1.0, delta=0.0)


@pytest.mark.parametrize("u", [bubble_local(), bubble_nonlocal(BubbleParams(mu=1.0))])
def test_rescale_matches_definition(u):
    v = rescale(u, (0.2, -0.4), 3.0)
    direct = u(3.0 * (points[:, 0] - 0.2), 3.0 * (points[:, 1] + 0.4)) + 2 * math.log(3.0)
    np.testing.assert_allclose(v(points[:, 0], points[:, 1]), direct, rtol=1e-12)


def test_rescale_composes_in_closed_form():
    base = superpose([bubble_local((0.1, 0.0)), Constant(c=-1.0)])
    once = rescale(rescale(base, (0.5, 0.5), 2.0), (-1.0, 0.0), 3.0)
    assert isinstance(once, Rescaled)
    assert once.depth == base.depth + 1
    direct = base(6.0 * (points[:, 0] + 1.0) - 1.0, 6.0 * points[:, 1] - 1.0) + 2 * math.log(6.0)
    np.testing.assert_allclose(once(points[:, 0], points[:, 1]), direct, rtol=1e-12)


def test_rescale_constant():
    assert rescale(Constant(c=1.0), (3.0, 3.0), math.e).c == pytest.approx(3.0)


@pytest.mark.parametrize("delta", [1.0, 4.0])
def test_bubbles_are_kelvin_fixed_points(delta):
    for u in (bubble_local(delta=delta), bubble_nonlocal(BubbleParams(mu=1.0, delta=delta))):
        k = kelvin(u, (0.0, 0.0), 1.0 / delta)
        np.testing.assert_allclose(k(points[:, 0], points[:, 1]), u(points[:, 0], points[:, 1]), rtol=1e-12)


def test_kelvin_is_an_involution():
    base = superpose([bubble_local((0.3, 0.1), 2.0), Constant(c=0.5)])
    twice = kelvin(kelvin(base, (1.0, -1.0), 0.7), (1.0, -1.0), 0.7)
    np.testing.assert_allclose(twice(points[:, 0], points[:, 1]), base(points[:, 0], points[:, 1]), rtol=1e-12)


def test_kelvin_undefined_at_center():
    with pytest.raises(ConfigError):
        kelvin(bubble_local(), (0.0, 0.0), 1.0).at((0.0, 0.0))
    with pytest.raises(ConfigError):
        kelvin(bubble_local(), (0.0, 0.0), 0.0)


def test_kelvin_tail_decays_like_inverse_fourth_power():
    k = kelvin(bubble_local(), (0.0, 0.0), 2.0)
    tail = k.exp_tail()
    assert tail.s == 2.0
    far = np.exp(k.at((300.0, 0.0)))
    assert far == pytest.approx(tail(300.0, 0.0), rel=1e-3)


def test_transform_depth_is_bounded():
    u = bubble_local()
    for _ in range(MAX_DEPTH):
        u = kelvin(u, (0.0, 0.0), 1.0)
    with pytest.raises(ConfigError):
        kelvin(u, (0.0, 0.0), 1.0)


def test_superpose_adds_exponentials():
    a = bubble_local((0.5, 0.0), 2.0)
    b = bubble_local((-0.5, 0.0), 3.0)
    s = superpose([a, b])
    np.testing.assert_allclose(np.exp(s(points[:, 0], points[:, 1])),
                               np.exp(a(points[:, 0], points[:, 1])) + np.exp(b(points[:, 0], points[:, 1])))
    with pytest.raises(ConfigError):
        superpose([])


def test_tails():
    U = bubble_nonlocal(BubbleParams(mu=1.0, delta=2.0))
    tail = U.exp_tail(U.lam)
    assert tail.s == pytest.approx(2.0 * U.lam)
    r = np.array([0.0, 0.5, 7.0])
    np.testing.assert_allclose(tail.of_radius(r), np.exp(U.lam * U(r, 0.0 * r)), rtol=1e-12)
    assert RadialPower(c=1.0, a=2.0).tail is None
    assert Constant(c=0.0).exp_tail() is None


def test_radial_tail_total():
    tail = RadialTail(coeff=8.0, beta=1.0, s=2.0)
    assert tail.total == pytest.approx(8.0 * math.pi)
    assert tail.rescaled((0.0, 0.0), 5.0).total == pytest.approx(8.0 * math.pi)
    assert RadialTail(coeff=1.0, s=2.0).total == math.inf
