"""First-order radio energy model and the per-run energy ledger."""
import logging
import math
from collections import defaultdict
from typing import Dict

from pydantic import BaseModel, validator

LOGGER = logging.getLogger(__name__)


class EnergyParams(BaseModel):
    # J/bit spent by transmitter or receiver electronics
    e_elec: float = 50e-9
    # J/bit/m^2, free-space amplifier
    eps_fs: float = 10e-12
    # J/bit/m^4, multipath amplifier
    eps_mp: float = 1.3e-15
    # J/bit spent folding one incoming packet into an aggregate
    e_da: float = 5e-9
    initial_energy: float = 0.5
    death_threshold: float = 0.0

    class Config:
        extra = "forbid"

    @validator("*")
    def check_non_negative(cls, value: float) -> float:
        if value < 0:
            raise ValueError("energy parameters must be >= 0")
        return value

    @property
    def d0(self) -> float:
        """Crossover distance between the free-space and multipath branches"""
        if self.eps_mp == 0:
            return math.inf
        return math.sqrt(self.eps_fs / self.eps_mp)


def tx_energy(params: EnergyParams, bits: int, distance: float) -> float:
    if distance < params.d0:
        return params.e_elec * bits + params.eps_fs * bits * distance ** 2
    return params.e_elec * bits + params.eps_mp * bits * distance ** 4


def rx_energy(params: EnergyParams, bits: int) -> float:
    return params.e_elec * bits


def aggregation_energy(params: EnergyParams, bits: int) -> float:
    return params.e_da * bits


class EnergyLedger(object):
    """Tally of every joule actually drawn, per category"""

    def __init__(self) -> None:
        self.by_category: Dict[str, float] = defaultdict(float)

    def record(self, category: str, joules: float) -> None:
        self.by_category[category] += joules

    @property
    def total(self) -> float:
        return math.fsum(self.by_category.values())
