import math
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from core.exceptions import ConfigError
from core.logger import get_logger
from schemas.report import PowerLawFit

logger = get_logger(__name__)


def fit_power_law(xs: Sequence[float], ys: Sequence[float]) -> PowerLawFit:
    """Least-squares slope of log y against log x, with R^2 as the fit quality."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape:
        raise ConfigError("power-law fit needs matching xs and ys")
    if x.size < 3:
        raise ConfigError(f"power-law fit needs at least 3 points, got {x.size}")
    if np.any(x <= 0) or np.any(y <= 0) or not np.all(np.isfinite(y)):
        raise ConfigError("power-law fit needs positive finite data")

    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    residual = float(np.sum((ly - (slope * lx + intercept)) ** 2))
    spread = float(np.sum((ly - ly.mean()) ** 2))
    #a constant series is fitted exactly
    quality = 1.0 if spread == 0.0 or residual <= 1e-28 else 1.0 - residual / spread
    if abs(slope) < 1e-13:
        slope = 0.0
    logger.debug(f"Power-law fit over {x.size} points: exponent {slope:.6g}, R^2 {quality:.6g}")
    return PowerLawFit(exponent=float(slope), quality=quality, n_points=int(x.size))


def richardson_limit(xs: Sequence[float], ys: Sequence[float]) -> tuple[float, float]:
    """Limit of y(x) ~ y_inf + C x^{-p} as x grows, from the last three samples.

    The order p is the root of the difference-ratio equation; for geometric
    spacing this is Aitken's delta-squared step. When the differences do not
    contract (noise-dominated or already converged) the last value is returned
    with order nan.
    """
    if len(xs) != len(ys) or len(xs) < 3:
        raise ConfigError("Richardson extrapolation needs at least 3 matching samples")
    x1, x2, x3 = (float(v) for v in xs[-3:])
    y1, y2, y3 = (float(v) for v in ys[-3:])
    if not (0 < x1 < x2 < x3):
        raise ConfigError("Richardson extrapolation needs increasing positive abscissae")

    d1, d2 = y2 - y1, y3 - y2
    if d1 == 0.0 or d2 == 0.0 or d2 / d1 <= 0.0 or abs(d2) >= abs(d1):
        logger.debug("Differences do not contract, keeping the last sample")
        return y3, math.nan
    ratio = d2 / d1

    def mismatch(p: float) -> float:
        return (x3 ** -p - x2 ** -p) / (x2 ** -p - x1 ** -p) - ratio

    lo, hi = 1e-3, 20.0
    if mismatch(lo) * mismatch(hi) > 0:
        return y3, math.nan
    order = brentq(mismatch, lo, hi, xtol=1e-12)
    limit = y3 + d2 * x3 ** -order / (x2 ** -order - x3 ** -order)
    return limit, order
