import math

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from utils.validators import as_point


class BubbleParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    mu: float = Field(..., gt=0, lt=2)
    x0: tuple[float, float] = (0.0, 0.0)
    delta: float = Field(1.0, gt=0, description="concentration scale")

    @field_validator('x0', mode='before')
    def validate_x0(cls, v):
        return as_point(v)

    @property
    def lam(self) -> float:
        return (4.0 - self.mu) / 4.0


class ExponentRelations(BaseModel):
    model_config = ConfigDict(frozen=True)

    mu: float
    lam: float
    p: float
    q: float
    p_conj: float

    def identity_defect(self) -> float:
        #|1/q + 1/(2p) - lambda|, zero up to rounding
        return abs(1.0 / self.q + 0.5 / self.p - self.lam)


class RadialTail(BaseModel):
    """Radial profile coeff * (beta + |x - center|^2)^(-s).

    Describes a density beyond the grid: exactly for bubble exponentials,
    asymptotically for anything with a |x|^(-2s) far field.
    """
    model_config = ConfigDict(frozen=True)

    center: tuple[float, float] = (0.0, 0.0)
    coeff: float = Field(..., gt=0)
    beta: float = Field(0.0, ge=0)
    s: float = Field(..., gt=0)

    @field_validator('center', mode='before')
    def validate_center(cls, v):
        return as_point(v)

    def __call__(self, x, y):
        r2 = (np.asarray(x) - self.center[0]) ** 2 + (np.asarray(y) - self.center[1]) ** 2
        return self.coeff * (self.beta + r2) ** (-self.s)

    def of_radius(self, r):
        return self.coeff * (self.beta + np.asarray(r) ** 2) ** (-self.s)

    def power(self, a: float) -> "RadialTail":
        return RadialTail(center=self.center, coeff=self.coeff ** a, beta=self.beta, s=self.s * a)

    def scaled(self, factor: float) -> "RadialTail":
        return RadialTail(center=self.center, coeff=self.coeff * factor, beta=self.beta, s=self.s)

    def rescaled(self, x0: tuple[float, float], delta: float) -> "RadialTail":
        #tail of e^{u(delta (x - x0)) + 2 log delta} given the tail of e^{u}
        cx, cy = self.center
        return RadialTail(
            center=(x0[0] + cx / delta, x0[1] + cy / delta),
            coeff=self.coeff * delta ** (2.0 - 2.0 * self.s),
            beta=self.beta / delta ** 2,
            s=self.s,
        )

    @property
    def total(self) -> float:
        #integral over the whole plane
        if self.s <= 1.0 or self.beta <= 0:
            return math.inf
        return self.coeff * math.pi * self.beta ** (1.0 - self.s) / (self.s - 1.0)
