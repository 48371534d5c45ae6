import os
from enum import Enum
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv
from pydantic import Field, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

# Load ANDRICA_LAB_* overrides from a .env file
load_dotenv()


class Config:
    """Application defaults"""

    # Sieve
    SEGMENT_SIZE = 1 << 20  # odd candidates per segment
    MAX_UNSEGMENTED_LIMIT = 2_000_000_000
    MAX_PRIME = (1 << 63) - 1

    # Verification
    DEFAULT_VERIFY_LIMIT = 100_000_000
    MIN_LIMIT = 3
    H_TOLERANCE = 1e-12
    BAND_START = 1000
    AVG_BAND = (0.9, 1.2)
    GBAR_BAND = (1.0, 1.4)

    # Generalized threshold search
    BISECTION_MAX_ITER = 200
    N0_SCAN_BELOW = 10
    N0_SCAN_ABOVE = 1000
    TANGENT_TOLERANCE = 1e-12

    # Persistence
    CHECKPOINT_SCHEMA_VERSION = 1
    OUTPUTS_DIR = "outputs"

    @classmethod
    def get_output_path(cls, command: str, fmt: str) -> str:
        """Default report path for a command, creating the outputs directory"""
        os.makedirs(cls.OUTPUTS_DIR, exist_ok=True)
        return os.path.join(cls.OUTPUTS_DIR, f"{command}.{fmt}")


class OutputFormat(str, Enum):
    CSV = "csv"
    JSON = "json"


class RunConfig(BaseSettings):
    """
    Settings for one CLI run.

    Every field can come from the environment with the ANDRICA_LAB_ prefix,
    e.g. ANDRICA_LAB_THREADS=8 when --threads is not given.
    """

    model_config = SettingsConfigDict(
        env_prefix="ANDRICA_LAB_",
        env_file=".env",
        extra="ignore",
    )

    limit: int = Config.DEFAULT_VERIFY_LIMIT
    segment_size: int = Field(default=Config.SEGMENT_SIZE, ge=1)
    threads: int = Field(default=1, ge=1)
    h_tolerance: float = Field(default=Config.H_TOLERANCE, gt=0)
    band_lo: float = Config.AVG_BAND[0]
    band_hi: float = Config.AVG_BAND[1]
    band_start: int = Field(default=Config.BAND_START, ge=2)
    output_format: OutputFormat = OutputFormat.JSON
    checkpoint_path: Optional[Path] = None
    checkpoint_every: int = Field(default=0, ge=0)  # segments; 0 writes only at the end or on interrupt
    resume_path: Optional[Path] = None
    out: Optional[Path] = None
    stride: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def validate_ranges(self) -> "RunConfig":
        if self.limit < Config.MIN_LIMIT:
            raise ValueError(f"limit must be >= {Config.MIN_LIMIT}, got {self.limit}")
        if self.limit > Config.MAX_PRIME:
            raise ValueError("limit exceeds the 63-bit prime range")
        if not self.band_lo < self.band_hi:
            raise ValueError(f"band_lo ({self.band_lo}) must be below band_hi ({self.band_hi})")
        if self.checkpoint_every and self.checkpoint_path is None:
            raise ValueError("checkpoint_every needs a checkpoint path")
        return self
