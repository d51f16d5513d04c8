from typing import Annotated, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from utils.validators import as_point, frozen_array


class Grid2D(BaseModel):
    """Uniform cell-centered square grid.

    Covers [c1 - L, c1 + L] x [c2 - L, c2 + L] with n cells per axis. Node (i, j)
    sits at center + ((i + 1/2) h - L, (j + 1/2) h - L); values are indexed [i][j]
    with i along the first coordinate.
    """
    model_config = ConfigDict(frozen=True)

    center: tuple[float, float] = (0.0, 0.0)
    half_width: float = Field(..., gt=0, description="half side length L")
    n: int = Field(..., ge=4, description="cells per axis")

    @field_validator('center', mode='before')
    def validate_center(cls, v):
        return as_point(v)

    @property
    def h(self) -> float:
        return 2.0 * self.half_width / self.n

    @property
    def axis_x(self) -> np.ndarray:
        return self.center[0] - self.half_width + (np.arange(self.n) + 0.5) * self.h

    @property
    def axis_y(self) -> np.ndarray:
        return self.center[1] - self.half_width + (np.arange(self.n) + 0.5) * self.h

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        cx, cy = self.center
        L = self.half_width
        return (cx - L, cx + L, cy - L, cy + L)

    def node(self, i: int, j: int) -> tuple[float, float]:
        if not (0 <= i < self.n and 0 <= j < self.n):
            raise IndexError(f"node ({i}, {j}) outside a {self.n}x{self.n} grid")
        return (float(self.axis_x[i]), float(self.axis_y[j]))

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.axis_x, self.axis_y, indexing='ij')

    def nearest_index(self, point: tuple[float, float]) -> tuple[int, int]:
        #clamped to the grid
        x0, _, y0, _ = self.bounds
        i = int(np.clip(np.floor((point[0] - x0) / self.h), 0, self.n - 1))
        j = int(np.clip(np.floor((point[1] - y0) / self.h), 0, self.n - 1))
        return i, j

    def contains(self, point: tuple[float, float], pad: float = 0.0) -> bool:
        x0, x1, y0, y1 = self.bounds
        return (x0 - pad <= point[0] <= x1 + pad) and (y0 - pad <= point[1] <= y1 + pad)

    def same_as(self, other: "Grid2D") -> bool:
        return self == other


class Disk(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["disk"] = "disk"
    center: tuple[float, float] = (0.0, 0.0)
    radius: float = Field(..., gt=0)

    @field_validator('center', mode='before')
    def validate_center(cls, v):
        return as_point(v)


class Annulus(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["annulus"] = "annulus"
    center: tuple[float, float] = (0.0, 0.0)
    r_in: float = Field(..., ge=0)
    r_out: float = Field(..., gt=0)

    @field_validator('center', mode='before')
    def validate_center(cls, v):
        return as_point(v)

    @model_validator(mode='after')
    def validate_radii(self):
        if self.r_in >= self.r_out:
            raise ValueError(f"annulus needs r_in < r_out, got r_in={self.r_in}, r_out={self.r_out}")
        return self


class Box(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["box"] = "box"
    x_min: float
    x_max: float
    y_min: float
    y_max: float

    @model_validator(mode='after')
    def validate_sides(self):
        if self.x_min >= self.x_max or self.y_min >= self.y_max:
            raise ValueError("box needs x_min < x_max and y_min < y_max")
        return self


class Complement(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["complement"] = "complement"
    inner: Annotated[Union[Disk, Annulus, Box], Field(discriminator="kind")]


Geometry = Annotated[Union[Disk, Annulus, Box, Complement], Field(discriminator="kind")]


class ScalarField(BaseModel):
    """Sampled values on a grid, optionally with a validity mask (False on invalid nodes)."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    grid: Grid2D
    values: np.ndarray
    valid: Optional[np.ndarray] = None

    @field_validator('values', mode='before')
    def validate_values(cls, v):
        arr = frozen_array(v, dtype=float)
        if not np.all(np.isfinite(arr)):
            raise ValueError("field values must be finite")
        return arr

    @field_validator('valid', mode='before')
    def validate_valid(cls, v):
        if v is None:
            return None
        return frozen_array(v, dtype=bool)

    @model_validator(mode='after')
    def validate_shape(self):
        shape = (self.grid.n, self.grid.n)
        if self.values.shape != shape:
            raise ValueError(f"values shape {self.values.shape} does not match grid {shape}")
        if self.valid is not None and self.valid.shape != shape:
            raise ValueError(f"valid mask shape {self.valid.shape} does not match grid {shape}")
        return self

    @property
    def valid_mask(self) -> np.ndarray:
        if self.valid is None:
            return np.ones((self.grid.n, self.grid.n), dtype=bool)
        return self.valid

    def _check_grid(self, other: "ScalarField"):
        if not self.grid.same_as(other.grid):
            from core.exceptions import GeometryError
            raise GeometryError("binary field operations require identical grids")

    def _merge_valid(self, other: "ScalarField") -> Optional[np.ndarray]:
        if self.valid is None and other.valid is None:
            return None
        return self.valid_mask & other.valid_mask

    def __add__(self, other):
        if isinstance(other, ScalarField):
            self._check_grid(other)
            return ScalarField(grid=self.grid, values=self.values + other.values, valid=self._merge_valid(other))
        return ScalarField(grid=self.grid, values=self.values + float(other), valid=self.valid)

    def __sub__(self, other):
        if isinstance(other, ScalarField):
            self._check_grid(other)
            return ScalarField(grid=self.grid, values=self.values - other.values, valid=self._merge_valid(other))
        return ScalarField(grid=self.grid, values=self.values - float(other), valid=self.valid)

    def __mul__(self, other):
        if isinstance(other, ScalarField):
            self._check_grid(other)
            return ScalarField(grid=self.grid, values=self.values * other.values, valid=self._merge_valid(other))
        return ScalarField(grid=self.grid, values=self.values * float(other), valid=self.valid)

    __rmul__ = __mul__

    def __neg__(self):
        return ScalarField(grid=self.grid, values=-self.values, valid=self.valid)


class RegionMask(BaseModel):
    """Cell subset of a grid.

    `flags` is membership at cell centers; `weights` is the covered-area fraction
    per cell (exact for disk/annulus/box geometry, 0/1 otherwise).
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    grid: Grid2D
    flags: np.ndarray
    weights: np.ndarray
    geometry: Optional[Geometry] = None
    warning: Optional[str] = None

    @field_validator('flags', mode='before')
    def validate_flags(cls, v):
        return frozen_array(v, dtype=bool)

    @field_validator('weights', mode='before')
    def validate_weights(cls, v):
        arr = frozen_array(v, dtype=float)
        if np.any(arr < -1e-12) or np.any(arr > 1 + 1e-12):
            raise ValueError("cell weights must lie in [0, 1]")
        return arr

    @model_validator(mode='after')
    def validate_shape(self):
        shape = (self.grid.n, self.grid.n)
        if self.flags.shape != shape or self.weights.shape != shape:
            raise ValueError(f"mask arrays must have shape {shape}")
        return self

    @property
    def is_empty(self) -> bool:
        return not bool(np.any(self.weights > 0))

    @property
    def area(self) -> float:
        return float(self.weights.sum() * self.grid.h ** 2)

    @property
    def cell_count(self) -> int:
        return int(self.flags.sum())
