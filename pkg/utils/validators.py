import math
from typing import Any, Sequence

import numpy as np

from core.exceptions import NumericError


def frozen_array(value: Any, dtype=float) -> np.ndarray:
    #copy into a read-only array so frozen models stay immutable
    arr = np.array(value, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def as_point(value: Sequence[float]) -> tuple[float, float]:
    if len(value) != 2:
        raise ValueError(f"expected a point with 2 coordinates, got {len(value)}")
    x, y = float(value[0]), float(value[1])
    if not (math.isfinite(x) and math.isfinite(y)):
        raise ValueError("point coordinates must be finite")
    return (x, y)


def is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def parse_float_list(value: Any) -> Any:
    #"8,32,128" -> [8.0, 32.0, 128.0]; lists pass through
    if isinstance(value, str):
        parts = [p.strip() for p in value.split(',') if p.strip()]
        return [float(p) for p in parts]
    return value


def parse_point_list(value: Any) -> Any:
    #"0.25,0;-0.25,0" -> [(0.25, 0.0), (-0.25, 0.0)]
    if isinstance(value, str):
        points = []
        for chunk in value.split(';'):
            chunk = chunk.strip()
            if not chunk:
                continue
            points.append(as_point([float(c) for c in chunk.split(',')]))
        return points
    return value


def require_finite(value: float, label: str) -> float:
    if not math.isfinite(value):
        raise NumericError(f"{label} is not finite ({value})")
    return float(value)
