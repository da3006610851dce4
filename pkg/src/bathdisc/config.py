"""Run configuration: a YAML tree validated against a fixed schema.

Unknown keys are rejected and every error names the offending key path,
e.g. ``model.epsilon0``.
"""

import math
from pathlib import Path
from typing import List, Literal, Optional, Tuple, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .exceptions import ConfigError
from .spectral import density_from_config

__all__ = ["RunConfig", "load_config", "parse_config"]

Method = Literal["trapezoid", "linear", "log", "mean", "equal_weight", "bsdo", "legendre"]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class DiscretizationOptions(_Section):
    log_lambda: float = Field(2.0, gt=1.0)
    x_accum: float = 0.0


class ModelSection(_Section):
    epsilon0: float = 0.0
    omega_s: Optional[float] = None
    U: float = 0.0
    geometry: Literal["star", "chain"] = "star"
    fermi_level: Optional[float] = None


class TimeSection(_Section):
    dt: Optional[float] = Field(None, gt=0)
    t_end: float = Field(10.0, ge=0)


class ErrorSection(_Section):
    threshold: float = Field(0.004, gt=0)
    consecutive: int = Field(3, ge=1)
    N_ref: int = Field(5000, ge=2)
    tol: float = Field(1e-6, gt=0)
    quantity: Literal["population", "greens"] = "population"
    detector: Literal["threshold", "rise"] = "threshold"
    rise_factor: float = Field(100.0, gt=1)


class MasterEqSection(_Section):
    beta: Union[float, Literal["inf"]] = "inf"
    coupling: Literal["sigma_x", "sigma_minus"] = "sigma_x"
    thermal_rule: bool = True
    history: Literal["cubic", "trapezoid"] = "cubic"
    compare_continuous: bool = True

    @property
    def beta_value(self):
        return math.inf if self.beta == "inf" else float(self.beta)

    @field_validator("beta")
    @classmethod
    def _positive(cls, v):
        if v != "inf" and not v > 0:
            raise ValueError("beta must be positive or 'inf'")
        return v


class ManyBodySection(_Section):
    kind: Literal["particle", "retarded"] = "retarded"
    sector: Optional[Tuple[int, int]] = None
    budget: int = Field(250000, ge=1)
    tol: float = Field(1e-10, gt=0)
    reference_N_b: Optional[int] = Field(None, ge=0)
    compare_tol: float = Field(1e-8, gt=0)


class CompareSection(_Section):
    a: str
    b: str
    label_a: str = "a"
    label_b: str = "b"


class RunConfig(_Section):
    density: Optional[dict] = None
    method: Union[Method, List[Method]] = "bsdo"
    N_b: Union[int, List[int]] = 10
    discretization: DiscretizationOptions = DiscretizationOptions()
    model: ModelSection = ModelSection()
    time: TimeSection = TimeSection()
    error: ErrorSection = ErrorSection()
    mastereq: MasterEqSection = MasterEqSection()
    manybody: ManyBodySection = ManyBodySection()
    compare: Optional[CompareSection] = None
    precision: Literal["auto", "double", "extended"] = "auto"
    output: str = "out"

    @field_validator("N_b")
    @classmethod
    def _nonneg(cls, v):
        vals = v if isinstance(v, list) else [v]
        if not vals or any(n < 0 for n in vals):
            raise ValueError("N_b must be a non-negative integer or a non-empty list of them")
        return v

    @property
    def methods(self):
        return list(self.method) if isinstance(self.method, list) else [self.method]

    @property
    def n_list(self):
        return list(self.N_b) if isinstance(self.N_b, list) else [self.N_b]

    def spectral_density(self, base_dir=None):
        if self.density is None:
            raise ConfigError("this command needs a density section", "density")
        return density_from_config(dict(self.density), base_dir)


def _loc(err):
    # pydantic appends the union branch name (e.g. "list[...]"); keep real keys only
    return ".".join(str(p) for p in err["loc"] if "[" not in str(p))


def parse_config(data, base_dir=None):
    """Validate a mapping; raise :class:`ConfigError` with the first key path."""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping", "")
    try:
        cfg = RunConfig.model_validate(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        raise ConfigError(first["msg"], _loc(first)) from None
    if cfg.density is not None:
        cfg.spectral_density(base_dir)
    return cfg


def load_config(path):
    """Read and validate a YAML config file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", "--config") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"YAML syntax error: {exc}", "") from None
    return parse_config(data, path.parent), data
