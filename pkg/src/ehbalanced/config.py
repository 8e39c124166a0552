"""Run configuration for ehbalanced."""

import json
from enum import Enum
from pathlib import Path
from typing import Optional

import numpy as np
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from .export import write_atomic
from .models import describe_validation_error

CONFIG_FILE_NAME = "run_config.json"


class ConfigError(ValueError):
    """Invalid configuration file or grid string."""

    pass


class Command(str, Enum):
    """Commands of the command-line front end."""

    NORMS = "norms"
    EPSILON = "epsilon"
    BALANCED_CHECK = "balanced-check"
    OBSTRUCTION = "obstruction"
    EXPAND = "expand"
    FIGURE1 = "figure1"
    RICCI_CHECK = "ricci-check"
    ORTHOGONALITY = "orthogonality"


class OutputFormat(str, Enum):
    """Artifact formats."""

    CSV = "csv"
    JSON = "json"


class GridAxis(BaseModel):
    """n evenly spaced values from start to stop."""

    start: float = Field(..., ge=0)
    stop: float = Field(..., ge=0)
    count: int = Field(..., ge=1)

    @model_validator(mode="after")
    def _check_order(self) -> "GridAxis":
        if self.stop < self.start:
            raise ValueError(f"axis stop {self.stop} is below start {self.start}")
        return self

    def values(self) -> list[float]:
        return np.linspace(self.start, self.stop, self.count).tolist()


def parse_axis(text: str) -> GridAxis:
    try:
        start, stop, count = text.split(":")
        return GridAxis(start=float(start), stop=float(stop), count=int(count))
    except ValidationError as e:
        raise ConfigError(
            f"config.parse_grid: bad axis {text!r}: {describe_validation_error(e, module='config')}"
        ) from e
    except ValueError as e:
        raise ConfigError(f"config.parse_grid: bad axis {text!r}, expected start:stop:count ({e})") from e


def parse_grid(grid: str) -> list[tuple[float, float]]:
    """Points (x, y) from "x0:x1:n" (y = 0) or "x0:x1:n,y0:y1:n" (product grid).

    Raises:
        ConfigError: If the text is malformed or the grid contains the origin
    """
    parts = grid.split(",")
    if len(parts) not in (1, 2):
        raise ConfigError(f"config.parse_grid: expected one or two axes, got {grid!r}")
    xs = parse_axis(parts[0]).values()
    ys = parse_axis(parts[1]).values() if len(parts) == 2 else [0.0]
    points = [(x, y) for x in xs for y in ys]
    if (0.0, 0.0) in points:
        raise ConfigError(f"config.parse_grid: grid {grid!r} contains the origin")
    return points


class RunConfig(BaseModel):
    """Parameters of one command-line run."""

    command: Command = Command.NORMS
    m: int = Field(default=1, ge=1, description="Quantization level")
    dmax: Optional[int] = Field(default=None, ge=1, description="Degree budget (default m + 200)")
    tol: float = Field(default=1e-10, gt=0, lt=1, description="Relative tail tolerance for ε")
    grid: str = Field(default="0.01:4:100", description='Grid "x0:x1:n[,y0:y1:n]"')
    x_min: float = Field(default=0.0, ge=0)
    x_max: float = Field(default=200.0, gt=0)
    step: float = Field(default=0.01, gt=0)
    out: str = Field(default="out", description="Output directory")
    format: OutputFormat = OutputFormat.CSV
    seed: int = Field(default=20240517, ge=0, description="Monte-Carlo seed")
    samples: int = Field(default=20_000, ge=2, description="Monte-Carlo sample count")
    workers: int = Field(default=1, ge=1)

    @field_validator("grid")
    @classmethod
    def _check_grid(cls, value: str) -> str:
        parse_grid(value)
        return value

    @model_validator(mode="after")
    def _check_ranges(self) -> "RunConfig":
        if self.x_min >= self.x_max:
            raise ValueError(f"x_min={self.x_min} must be below x_max={self.x_max}")
        if self.dmax is not None and self.dmax < self.m:
            raise ValueError(f"dmax={self.dmax} is below m={self.m}")
        return self

    @property
    def effective_dmax(self) -> int:
        return self.dmax if self.dmax is not None else self.m + 200

    def grid_points(self) -> list[tuple[float, float]]:
        return parse_grid(self.grid)


def build_config(**values) -> RunConfig:
    """Validate values into a RunConfig.

    Raises:
        ConfigError: Naming each offending field, prefixed "config.RunConfig:"
    """
    try:
        return RunConfig(**values)
    except ValidationError as e:
        raise ConfigError(describe_validation_error(e, module="config")) from e


def load_config(path: Path) -> RunConfig:
    """Load a RunConfig from a JSON file.

    Raises:
        ConfigError: If the file cannot be read or does not validate
    """
    try:
        with open(path, "r") as f:
            data = json.load(f)
        return build_config(**data)
    except (OSError, ValueError, TypeError) as e:
        raise ConfigError(f"config.load_config: {path}: {e}") from e


def save_config(config: RunConfig, path: Path) -> Path:
    """Write the configuration as JSON."""
    return write_atomic(Path(path), json.dumps(config.model_dump(mode="json"), indent=2) + "\n")
