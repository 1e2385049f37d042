""" Reads, validates and dumps aegisnet scenario files """
import json
import logging
import os
from typing import Any, Dict, List, Optional, Union

import yaml
from pydantic import BaseModel, ValidationError, root_validator, validator

from .adversary import AttackSpec
from .aggregation import AggregationFunction
from .crypto import CURVES
from .energy import EnergyParams
from .exceptions import ConfigInvalid

LOGGER = logging.getLogger(__name__)

SEED_ENV_VAR = "AEGISNET_SEED"
SECTIONS = ["network", "energy", "protocol", "attack", "run"]


class NetworkConfig(BaseModel):
    node_count: int = 100
    area_width: float = 100.0
    area_height: float = 100.0
    # Base station position; the area center when unset
    bs_x: Optional[float] = None
    bs_y: Optional[float] = None
    radio_range: float = 40.0
    head_fraction: float = 0.05
    # Overrides head_fraction when set
    head_count: Optional[int] = None
    recluster_every: int = 20
    energy_weight: float = 0.7
    distance_weight: float = 0.3

    class Config:
        extra = "forbid"

    @validator("node_count")
    def check_node_count(cls, value: int) -> int:
        if value < 1:
            raise ValueError("must be >= 1")
        return value

    @validator("area_width", "area_height", "radio_range")
    def check_positive(cls, value: float) -> float:
        if value <= 0:
            raise ValueError("must be > 0")
        return value

    @validator("head_fraction")
    def check_fraction(cls, value: float) -> float:
        if not 0 < value <= 1:
            raise ValueError("must be in (0, 1]")
        return value

    @validator("head_count", "recluster_every")
    def check_at_least_one(cls, value: Optional[int]) -> Optional[int]:
        if value is not None and value < 1:
            raise ValueError("must be >= 1")
        return value

    @validator("energy_weight", "distance_weight")
    def check_weight(cls, value: float) -> float:
        if value < 0:
            raise ValueError("must be >= 0")
        return value

    @property
    def base_station(self) -> Optional[tuple]:
        if self.bs_x is None and self.bs_y is None:
            return None
        return (
            self.area_width / 2 if self.bs_x is None else self.bs_x,
            self.area_height / 2 if self.bs_y is None else self.bs_y,
        )


class ProtocolConfig(BaseModel):
    aggregation: AggregationFunction = AggregationFunction.SUM
    window: int = 8
    freshness_ms: int = 500
    data_bits: int = 4000
    control_bits: int = 200
    tx_latency_ms: int = 10
    processing_ms: int = 2
    # Delay between round start and reading generation, leaves room for phase 3
    setup_ms: int = 50
    round_period_ms: int = 1000
    curve: str = "toy17"
    reading_min: int = 0
    reading_max: int = 100
    max_handshake_attempts: int = 3

    class Config:
        extra = "forbid"

    @validator("window", "tx_latency_ms", "processing_ms", "setup_ms")
    def check_non_negative(cls, value: int) -> int:
        if value < 0:
            raise ValueError("must be >= 0")
        return value

    @validator("freshness_ms", "data_bits", "control_bits", "round_period_ms", "max_handshake_attempts")
    def check_positive(cls, value: int) -> int:
        if value <= 0:
            raise ValueError("must be > 0")
        return value

    @validator("curve")
    def check_curve(cls, value: str) -> str:
        if value not in CURVES:
            raise ValueError(f"unknown curve, expected one of {sorted(CURVES)}")
        return value

    @root_validator(skip_on_failure=True)
    def check_ranges(cls, values: Dict) -> Dict:
        if values["reading_min"] > values["reading_max"]:
            raise ValueError("reading_min must be <= reading_max")
        return values

    @property
    def hop_ms(self) -> int:
        return self.tx_latency_ms + self.processing_ms


class RunConfig(BaseModel):
    rounds: int = 100
    seed: Optional[int] = None
    metrics: str = "metrics.csv"
    trace: Optional[str] = None
    auth_log: Optional[str] = None
    topology: Optional[str] = None
    # Store-and-forward instead of in-network aggregation
    baseline: bool = False

    class Config:
        extra = "forbid"

    @validator("rounds")
    def check_rounds(cls, value: int) -> int:
        if value < 1:
            raise ValueError("must be >= 1")
        return value


class ScenarioConfig(BaseModel):
    network: NetworkConfig = NetworkConfig()
    energy: EnergyParams = EnergyParams()
    protocol: ProtocolConfig = ProtocolConfig()
    attack: List[AttackSpec] = []
    run: RunConfig = RunConfig()

    class Config:
        extra = "forbid"


def _field_path(location: tuple) -> str:
    return ".".join(str(part) for part in location if part != "__root__")


def _describe(error: ValidationError) -> str:
    return "; ".join(
        f"{_field_path(detail['loc']) or '<document>'}: {detail['msg']}"
        for detail in error.errors()
    )


def parse_config(text: str, source: str = "<string>") -> ScenarioConfig:
    """Validates a scenario document; an empty document yields all defaults"""
    try:
        document = yaml.safe_load(text)
    except yaml.YAMLError as err:
        mark = getattr(err, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigInvalid(f"{source}: malformed YAML{where}: {err}")
    if document is None:
        document = {}
    if not isinstance(document, dict):
        raise ConfigInvalid(f"{source}: expected a mapping of sections {SECTIONS}")
    try:
        return ScenarioConfig(**document)
    except ValidationError as err:
        raise ConfigInvalid(f"{source}: {_describe(err)}")
    except TypeError as err:
        raise ConfigInvalid(f"{source}: {err}")


def load_config(config_file: str) -> ScenarioConfig:
    if not os.path.isfile(config_file):
        raise ConfigInvalid(f"Config file {config_file} does not exist")
    with open(config_file) as handle:
        return parse_config(handle.read(), source=config_file)


def config_dict(config: ScenarioConfig) -> Dict[str, Any]:
    """Plain JSON-compatible form, enums as their values"""
    return json.loads(config.json())


def dump_config(config: ScenarioConfig) -> str:
    """Canonical fully-defaulted document; parse_config reads it back equal"""
    return yaml.safe_dump(config_dict(config), default_flow_style=False, sort_keys=True)


def resolve_seed(flag: Optional[int], config: ScenarioConfig) -> int:
    if flag is not None:
        return flag
    if config.run.seed is not None:
        return config.run.seed
    from_env: Union[str, None] = os.environ.get(SEED_ENV_VAR)
    if from_env:
        try:
            return int(from_env)
        except ValueError:
            raise ConfigInvalid(f"{SEED_ENV_VAR} must be an integer, got {from_env!r}")
    return 0
