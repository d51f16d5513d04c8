import enum
from pathlib import Path
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from utils.validators import is_power_of_two, parse_float_list, parse_point_list


class ExperimentId(str, enum.Enum):
    QUANTIZATION = "quantization"
    MULTIBUBBLE = "multibubble"
    RIGGED = "rigged"
    VERIFY_CORE = "verify-core"


class OutputFormat(str, enum.Enum):
    CSV = "csv"
    JSON = "json"


class RunConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    experiment: ExperimentId
    mu: float = Field(1.0, gt=0, lt=2)
    n: Optional[int] = Field(None, description="cells per axis, power of two in [64, 2048]")
    half_width: Optional[float] = Field(None, gt=0)
    out: Optional[Path] = None
    format: OutputFormat = OutputFormat.CSV
    seed: int = 0
    deltas: Optional[list[float]] = None
    ks: Optional[list[int]] = None
    centers: Optional[list[tuple[float, float]]] = None
    inject_kernel_fault: bool = False

    @field_validator('n')
    def validate_n(cls, v):
        if v is None:
            return v
        if not (64 <= v <= 2048) or not is_power_of_two(v):
            raise ValueError(f'n must be a power of two between 64 and 2048, got {v}')
        return v

    @field_validator('deltas', mode='before')
    def parse_deltas(cls, v):
        return parse_float_list(v)

    @field_validator('ks', mode='before')
    def parse_ks(cls, v):
        parsed = parse_float_list(v)
        if isinstance(parsed, list):
            return [int(k) for k in parsed]
        return parsed

    @field_validator('centers', mode='before')
    def parse_centers(cls, v):
        return parse_point_list(v)

    @model_validator(mode='after')
    def validate_sweeps(self):
        if self.deltas is not None and not self.deltas:
            raise ValueError('deltas must not be empty')
        if self.ks is not None and not self.ks:
            raise ValueError('ks must not be empty')
        if self.centers is not None and not self.centers:
            raise ValueError('centers must not be empty')
        return self
