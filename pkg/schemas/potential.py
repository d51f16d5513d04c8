import enum
import math
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from core.config import settings
from utils.validators import frozen_array


class SingularRule(str, enum.Enum):
    CELL_AVERAGE = "cell-average"   # exact average in the singular cell only
    POLAR_LOCAL = "polar-local"     # exact averages over the whole near-field block


class KernelKind(str, enum.Enum):
    RIESZ = "riesz"
    LOG = "log"


class RieszConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    mu: float = Field(..., gt=0, lt=2, description="Riesz exponent of |x - y|^-mu")
    singular_rule: SingularRule = Field(default_factory=lambda: SingularRule(settings.singular_rule))
    padding_factor: int = Field(default_factory=lambda: settings.riesz_padding_factor, ge=2,
                                description="zero padding of the FFT path, linear convolution requires >= 2")

    @property
    def lam(self) -> float:
        return (4.0 - self.mu) / 4.0


class KernelTable(BaseModel):
    """Kernel weights indexed by cell offset.

    `values[n - 1 + di, n - 1 + dj]` is the weight for offset (di, dj), |di|, |dj| < n.
    The center value is the analytic cell average of the kernel.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    kind: KernelKind
    h: float = Field(..., gt=0)
    n: int = Field(..., ge=4)
    mu: Optional[float] = Field(None, gt=0, lt=2)
    near_cells: int = Field(..., ge=0)
    rule: SingularRule
    values: np.ndarray

    @field_validator('values', mode='before')
    def validate_values(cls, v):
        return frozen_array(v, dtype=float)

    @model_validator(mode='after')
    def validate_table(self):
        size = 2 * self.n - 1
        if self.values.shape != (size, size):
            raise ValueError(f"kernel table must have shape ({size}, {size})")
        if self.kind == KernelKind.RIESZ:
            if self.mu is None:
                raise ValueError("riesz kernel table needs mu")
            if not (math.isfinite(self.center_value) and self.center_value > 0):
                raise ValueError("riesz center weight must be finite and positive")
        return self

    @property
    def center_value(self) -> float:
        return float(self.values[self.n - 1, self.n - 1])


class HLSDiagnostic(BaseModel):
    model_config = ConfigDict(frozen=True)

    ratio: float = Field(..., ge=0)
    p: float
    r: float
    mu: float
    degenerate: bool = False
