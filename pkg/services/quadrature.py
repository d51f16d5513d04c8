"""Cell-level quadrature rules.

Exact covered-area fractions of disks, analytic cell averages of the Riesz and
logarithmic kernels, and polar quadrature of radial far-field tails outside an
axis-aligned box.
"""
from functools import lru_cache
from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import quad

from core.exceptions import GeometryError
from core.logger import get_logger
from schemas.bubble import RadialTail

logger = get_logger(__name__)


# --- disk / rectangle areas -------------------------------------------------

def _quadrant_disk_area(a: np.ndarray, b: np.ndarray, R: float) -> np.ndarray:
    #area of [0, a] x [0, b] inside the disk of radius R at the origin, a, b >= 0
    a = np.minimum(a, R)
    b = np.minimum(b, R)
    xb = np.sqrt(np.clip(R * R - b * b, 0.0, None))
    xm = np.minimum(a, xb)

    def primitive(x):
        return 0.5 * (x * np.sqrt(np.clip(R * R - x * x, 0.0, None)) + R * R * np.arcsin(np.clip(x / R, -1.0, 1.0)))

    return b * xm + primitive(a) - primitive(xm)


def _signed_quadrant_disk_area(a: np.ndarray, b: np.ndarray, R: float) -> np.ndarray:
    return np.sign(a) * np.sign(b) * _quadrant_disk_area(np.abs(a), np.abs(b), R)


def disk_cell_fractions(x_edges: np.ndarray, y_edges: np.ndarray, center: tuple[float, float], radius: float) -> np.ndarray:
    """Covered-area fraction of every cell of a tensor grid by a disk.

    Cells entirely inside get exactly 1 and cells entirely outside exactly 0;
    boundary cells use signed quadrant areas at the four corners.
    """
    ax = x_edges - center[0]
    by = y_edges - center[1]
    x0, x1 = ax[:-1, None], ax[1:, None]
    y0, y1 = by[None, :-1], by[None, 1:]

    #farthest and nearest point of each cell from the disk center
    far2 = np.maximum(x0 ** 2, x1 ** 2) + np.maximum(y0 ** 2, y1 ** 2)
    near_x = np.where((x0 <= 0) & (x1 >= 0), 0.0, np.minimum(np.abs(x0), np.abs(x1)))
    near_y = np.where((y0 <= 0) & (y1 >= 0), 0.0, np.minimum(np.abs(y0), np.abs(y1)))
    near2 = near_x ** 2 + near_y ** 2

    fractions = np.zeros((len(x_edges) - 1, len(y_edges) - 1))
    inside = far2 <= radius ** 2
    fractions[inside] = 1.0

    boundary = ~inside & (near2 < radius ** 2)
    if np.any(boundary):
        corners = _signed_quadrant_disk_area(ax[:, None], by[None, :], radius)
        area = corners[1:, 1:] - corners[:-1, 1:] - corners[1:, :-1] + corners[:-1, :-1]
        cell_area = np.diff(x_edges)[:, None] * np.diff(y_edges)[None, :]
        fractions[boundary] = np.clip(area[boundary] / cell_area[boundary], 0.0, 1.0)
    return fractions


def box_cell_fractions(x_edges: np.ndarray, y_edges: np.ndarray, box: tuple[float, float, float, float]) -> np.ndarray:
    bx0, bx1, by0, by1 = box
    wx = np.clip(np.minimum(x_edges[1:], bx1) - np.maximum(x_edges[:-1], bx0), 0.0, None) / np.diff(x_edges)
    wy = np.clip(np.minimum(y_edges[1:], by1) - np.maximum(y_edges[:-1], by0), 0.0, None) / np.diff(y_edges)
    return np.outer(wx, wy)


# --- kernel corner integrals ------------------------------------------------

@lru_cache(maxsize=256)
def _riesz_angular(z: float, mu: float) -> float:
    #integral over [0, z] of (1 + t^2)^(-mu/2)
    value, _ = quad(lambda t: (1.0 + t * t) ** (-0.5 * mu), 0.0, z, epsabs=1e-14, epsrel=1e-13, limit=200)
    return value


@lru_cache(maxsize=65536)
def _riesz_corner(a: float, b: float, mu: float) -> float:
    #integral of |y|^-mu over [0, a] x [0, b], polar form split along the diagonal
    if a <= 0.0 or b <= 0.0:
        return 0.0
    p = 2.0 - mu
    return (a ** p * _riesz_angular(b / a, mu) + b ** p * _riesz_angular(a / b, mu)) / p


def _log_corner(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    #integral of log|y| over [0, a] x [0, b], a, b >= 0, closed form
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    out = np.zeros(np.broadcast(a, b).shape)
    a_b, b_b = np.broadcast_arrays(a, b)
    pos = (a_b > 0) & (b_b > 0)
    x, y = a_b[pos], b_b[pos]
    out[pos] = 0.5 * (x * y * np.log(x * x + y * y) - 3.0 * x * y
                      + x * x * np.arctan2(y, x) + y * y * np.arctan2(x, y))
    return out


def _cell_sums(corner: Callable[[np.ndarray, np.ndarray], np.ndarray], ox: np.ndarray, oy: np.ndarray) -> np.ndarray:
    """Integrals over unit cells [ox - 1/2, ox + 1/2] x [oy - 1/2, oy + 1/2].

    `corner(a, b)` is the integral over [0, a] x [0, b] for a, b >= 0 of an even kernel;
    the signed extension makes the four-corner sum valid for any cell position.
    """
    def signed(a, b):
        return np.sign(a) * np.sign(b) * corner(np.abs(a), np.abs(b))

    x0, x1 = ox - 0.5, ox + 0.5
    y0, y1 = oy - 0.5, oy + 0.5
    return signed(x1, y1) - signed(x0, y1) - signed(x1, y0) + signed(x0, y0)


def _riesz_corner_array(mu: float):
    vec = np.vectorize(lambda a, b: _riesz_corner(float(a), float(b), mu), otypes=[float])

    def corner(a, b):
        return vec(a, b)
    return corner


def riesz_cell_integrals(ox: np.ndarray, oy: np.ndarray, mu: float) -> np.ndarray:
    """Integral of |z|^-mu over unit cells centered at offsets (ox, oy)."""
    ox, oy = np.broadcast_arrays(np.asarray(ox, dtype=float), np.asarray(oy, dtype=float))
    return _cell_sums(_riesz_corner_array(mu), ox, oy)


def log_cell_integrals(ox: np.ndarray, oy: np.ndarray) -> np.ndarray:
    """Integral of log|z| over unit cells centered at offsets (ox, oy)."""
    ox, oy = np.broadcast_arrays(np.asarray(ox, dtype=float), np.asarray(oy, dtype=float))
    return _cell_sums(_log_corner, ox, oy)


@lru_cache(maxsize=64)
def riesz_unit_block(mu: float, m: int) -> np.ndarray:
    """Cell averages of |z|^-mu on the (2m+1)^2 block of unit cells around the origin."""
    k = np.arange(-m, m + 1, dtype=float)
    block = riesz_cell_integrals(k[:, None], k[None, :], mu)
    block.setflags(write=False)
    return block


@lru_cache(maxsize=16)
def log_unit_block(m: int) -> np.ndarray:
    k = np.arange(-m, m + 1, dtype=float)
    block = log_cell_integrals(k[:, None], k[None, :])
    block.setflags(write=False)
    return block


# --- radial tails outside a box --------------------------------------------

def _angular_segments(center: tuple[float, float], box: tuple[float, float, float, float]) -> list[tuple[float, float]]:
    x0, x1, y0, y1 = box
    cx, cy = center
    if not (x0 < cx < x1 and y0 < cy < y1):
        raise GeometryError(f"tail center {center} must lie strictly inside the grid box {box}")
    angles = sorted(float(np.arctan2(y - cy, x - cx)) % (2 * np.pi) for x in (x0, x1) for y in (y0, y1))
    angles.append(angles[0] + 2 * np.pi)
    return [(angles[k], angles[k + 1]) for k in range(4)]


def _gauss_nodes(n: int, lo: float, hi: float) -> tuple[np.ndarray, np.ndarray]:
    t, w = leggauss(n)
    return 0.5 * (hi - lo) * t + 0.5 * (hi + lo), 0.5 * (hi - lo) * w


def _exit_radius(theta: np.ndarray, center: tuple[float, float], box: tuple[float, float, float, float]) -> np.ndarray:
    #distance from center to the box boundary along direction theta
    x0, x1, y0, y1 = box
    c, s = np.cos(theta), np.sin(theta)
    with np.errstate(divide='ignore', invalid='ignore'):
        rx = np.where(c > 0, (x1 - center[0]) / c, np.where(c < 0, (x0 - center[0]) / c, np.inf))
        ry = np.where(s > 0, (y1 - center[1]) / s, np.where(s < 0, (y0 - center[1]) / s, np.inf))
    return np.minimum(rx, ry)


def _polar_nodes(tail: RadialTail, box, angular_nodes: int):
    thetas, weights = [], []
    for lo, hi in _angular_segments(tail.center, box):
        t, w = _gauss_nodes(angular_nodes, lo, hi)
        thetas.append(t)
        weights.append(w)
    theta = np.concatenate(thetas)
    return theta, np.concatenate(weights), _exit_radius(theta, tail.center, box)


def tail_mass_outside_box(tail: RadialTail, box: tuple[float, float, float, float], angular_nodes: int = 48) -> float:
    """Integral of the tail profile over the plane minus the box (radial part exact)."""
    if tail.s <= 1.0:
        raise GeometryError(f"tail exponent s={tail.s} is not integrable at infinity")
    _, w, rb = _polar_nodes(tail, box, angular_nodes)
    radial = tail.coeff * (tail.beta + rb ** 2) ** (1.0 - tail.s) / (2.0 * (tail.s - 1.0))
    return float(np.sum(w * radial))


def tail_potential_outside_box(
        tail: RadialTail,
        box: tuple[float, float, float, float],
        kernel: Callable[[np.ndarray], np.ndarray],
        targets: np.ndarray,
        angular_nodes: int = 48,
        radial_nodes: int = 48,
        chunk: int = 128,
) -> np.ndarray:
    """Integral of tail(y) * kernel(|x - y|) over y outside the box, for each target x.

    Polar coordinates about the tail center with t = r_exit / r in (0, 1]; the
    profile is written as coeff * t^{2s} (beta t^2 + r_exit^2)^{-s} so that the
    integrand stays bounded as t -> 0.
    """
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    theta, w_theta, rb = _polar_nodes(tail, box, angular_nodes)
    t, w_t = _gauss_nodes(radial_nodes, 0.0, 1.0)

    T = t[None, :]
    RB = rb[:, None]
    r = RB / T
    profile = tail.coeff * T ** (2 * tail.s) * (tail.beta * T ** 2 + RB ** 2) ** (-tail.s)
    jac = RB ** 2 / T ** 3
    weight = (w_theta[:, None] * w_t[None, :]) * profile * jac
    yx = tail.center[0] + r * np.cos(theta)[:, None]
    yy = tail.center[1] + r * np.sin(theta)[:, None]

    out = np.empty(len(targets))
    for start in range(0, len(targets), chunk):
        block = targets[start:start + chunk]
        dx = block[:, 0, None, None] - yx[None]
        dy = block[:, 1, None, None] - yy[None]
        out[start:start + chunk] = np.sum(kernel(np.hypot(dx, dy)) * weight[None], axis=(1, 2))
    return out
