from pathlib import Path
from typing import Optional
from pydantic_settings import BaseSettings
from pydantic import Field, field_validator



class Settings(BaseSettings):
    #app settings
    environment: str = Field("development", description="Runtime environment (development, staging, production)")
    log_level: str = Field("INFO", description="Logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL)")
    project_name: str = Field("Nonlocal Liouville Lab", description="Project name (shown in logs)")
    log_format: str = Field("auto", description="Console log format (auto, console, json); auto picks console in development")
    log_file: Optional[str] = Field(None, description="Optional path of a JSON-lines log file")

    # riesz potential
    riesz_padding_factor: int = Field(2, description="Zero-padding factor of the FFT convolution (linear convolution needs >= 2)", ge=2, le=8)
    singular_rule: str = Field("polar-local", description="Kernel treatment near the singularity (cell-average, polar-local)")
    near_field_cells: int = Field(3, description="Half-width in cells of the block that gets exact kernel cell averages", ge=1, le=8)

    # analytic far-field tails
    tail_angular_nodes: int = Field(48, description="Gauss-Legendre nodes per angular segment of a tail integral", ge=8, le=512)
    tail_radial_nodes: int = Field(48, description="Gauss-Legendre nodes in the radial direction of a tail integral", ge=8, le=512)
    tail_lattice_points: int = Field(33, description="Lattice size per axis for the interpolated in-box tail potential", ge=5, le=257)

    #sweeps
    max_workers: int = Field(1, description="Worker threads used for independent sweep points", ge=1, le=64)
    oracle_sample_nodes: int = Field(64, description="Interior nodes sampled when comparing the fast path to the direct sum", ge=1)

    @field_validator('environment')
    def validate_environment(cls, v):
        #Ensure environment is one of the allowed values
        allowed = ['development', 'staging', 'production']
        if v.lower() not in allowed:
            raise ValueError(f'ENVIRONMENT must be one of: {", ".join(allowed)}')
        return v.lower()

    @field_validator('log_level')
    def validate_log_level(cls, v):
        #ensure log level is valid
        allowed = ['DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL']
        v_upper = v.upper()
        if v_upper not in allowed:
            raise ValueError(f'LOG_LEVEL must be one of: {", ".join(allowed)}')
        return v_upper

    @field_validator('log_format')
    def validate_log_format(cls, v):
        allowed = ['auto', 'console', 'json']
        if v.lower() not in allowed:
            raise ValueError(f'LOG_FORMAT must be one of: {", ".join(allowed)}')
        return v.lower()

    @field_validator('singular_rule')
    def validate_singular_rule(cls, v):
        allowed = ['cell-average', 'polar-local']
        if v.lower() not in allowed:
            raise ValueError(f'SINGULAR_RULE must be one of: {", ".join(allowed)}')
        return v.lower()

    @field_validator('tail_lattice_points')
    def validate_tail_lattice(cls, v):
        #odd so the lattice has a center line
        if v % 2 == 0:
            raise ValueError('TAIL_LATTICE_POINTS must be odd')
        return v


    #helper properties
    @property
    def is_production(self) -> bool:
        return self.environment == "production"

    @property
    def is_development(self) -> bool:
        return self.environment == "development"



    class Config:
        project_root = Path(__file__).resolve().parent.parent
        env_file = project_root / ".env"
        env_file_encoding = "utf-8"
        case_sensitive = False
        extra = "ignore"


settings = Settings()
