import enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class Verdict(str, enum.Enum):
    A1 = "A1"   # locally bounded
    A2 = "A2"   # locally uniformly to -infinity
    A3 = "A3"   # finite blow-up set carrying point masses


class MassReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    label: str
    region_mass: float
    residual_sup: Optional[float] = None
    notes: str = ""


class AlternativeVerdict(BaseModel):
    model_config = ConfigDict(frozen=True)

    verdict: Optional[Verdict] = None
    inconclusive: bool = False
    blowup_points: list[tuple[float, float]] = Field(default_factory=list)
    masses: list[float] = Field(default_factory=list)
    notes: str = ""

    @model_validator(mode='after')
    def validate_verdict(self):
        if self.inconclusive:
            if self.verdict is not None:
                raise ValueError("an inconclusive verdict carries no alternative")
        elif self.verdict is None:
            raise ValueError("a conclusive verdict needs an alternative")
        if (self.verdict == Verdict.A3) != bool(self.blowup_points):
            raise ValueError("A3 holds exactly when blow-up points are present")
        if len(self.masses) != len(self.blowup_points):
            raise ValueError("one mass per blow-up point")
        return self


class ClassifierParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    mu: float = Field(..., gt=0, lt=2)
    bound_m: float = Field(10.0, gt=0, description="sup bound M of the bounded alternative")
    drop_threshold: float = Field(20.0, gt=0, description="T: last sup below -T counts as divergence")
    mass_tolerance: float = Field(0.05, ge=0, description="relative to 8*pi")
    V: float = Field(1.0, ge=0)
    p: float = Field(float("inf"))
    trend_window: int = Field(3, ge=2)
    growth: float = Field(2.0, gt=0, description="growth factor of the mass ball radius")
    local_n: int = Field(256, ge=32, description="cells per axis of the local mass grid")


class SelectionResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    x: tuple[float, float]
    r: float = Field(..., gt=0)
    center_inequality: bool
    ball_inequality: bool

    @property
    def holds(self) -> bool:
        return self.center_inequality and self.ball_inequality
