import enum
import math
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, computed_field

from schemas.analysis import MassReport


class Relation(str, enum.Enum):
    ABS = "abs"     # |value - target| <= tolerance
    REL = "rel"     # |value - target| <= tolerance * |target|
    GE = "ge"       # value >= target - tolerance
    LE = "le"       # value <= target + tolerance
    INFO = "info"   # recorded only


class ReportRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    experiment: str
    param_name: str = ""
    param_value: Optional[float] = None
    quantity: str
    value: float
    target: Optional[float] = None
    tolerance: Optional[float] = None
    relation: Relation = Relation.INFO

    @computed_field
    @property
    def passed(self) -> bool:
        if self.relation == Relation.INFO:
            return True
        if not math.isfinite(self.value) or self.target is None:
            return False
        tol = self.tolerance or 0.0
        if self.relation == Relation.ABS:
            return abs(self.value - self.target) <= tol
        if self.relation == Relation.REL:
            return abs(self.value - self.target) <= tol * abs(self.target)
        if self.relation == Relation.GE:
            return self.value >= self.target - tol
        return self.value <= self.target + tol


class PowerLawFit(BaseModel):
    model_config = ConfigDict(frozen=True)

    exponent: float
    quality: float = Field(..., description="coefficient of determination of the log-log fit")
    n_points: int = Field(..., ge=2)


class ExperimentReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    experiment: str
    param_name: str = ""
    sweep: list[float] = Field(default_factory=list)
    rows: list[ReportRow] = Field(default_factory=list)
    mass_reports: list[MassReport] = Field(default_factory=list)
    fits: dict[str, PowerLawFit] = Field(default_factory=dict)
    inconclusive: bool = False
    notes: str = ""

    @property
    def failed_rows(self) -> list[ReportRow]:
        return [row for row in self.rows if not row.passed]

    @property
    def passed(self) -> bool:
        return not self.inconclusive and not self.failed_rows
