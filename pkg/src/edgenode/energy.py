"""Calibrated power/energy constants and the power x time arithmetic.

Units throughout: milliwatts, seconds, millijoules (mW * s = mJ).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence


class EnergyDomainError(ValueError):
    """Raised for physically meaningless inputs (negative power, zero fps, ...)."""


class State(str, Enum):
    ACTIVE = "active"
    IDLE = "idle"
    OFF = "off"


COMPUTE_SOC = "compute-soc"
EXTERNAL_MEMORY = "external-memory"
CAMERA = "camera"
RADIO = "radio"
SLEEP_FLOOR = "sleep-floor"
_FIXED_COMPONENTS = {COMPUTE_SOC, EXTERNAL_MEMORY, CAMERA, RADIO, SLEEP_FLOOR}

DEFAULT_SLEEP_POWER_MW = 1.0
HEATED_SENSORS = ("scd41", "bme680", "sgp41")
HEATED_PEAK_LIMIT_MW = 160.0
UNHEATED_PEAK_LIMIT_MW = 30.0
SENSOR_READOUT_TOTAL_MJ = 490.0


def is_valid_component(component_id: str) -> bool:
    if component_id in _FIXED_COMPONENTS:
        return True
    return component_id.startswith("sensor:") and len(component_id) > len("sensor:")


@dataclass(frozen=True)
class PowerProfile:
    component_id: str
    state: State
    power_mw: float

    def __post_init__(self):
        if not is_valid_component(self.component_id):
            raise EnergyDomainError(f"unknown component {self.component_id!r}")
        object.__setattr__(self, "state", State(self.state))
        if not self.power_mw >= 0:
            raise EnergyDomainError(f"{self.component_id}: power must be >= 0, got {self.power_mw}")
        if self.state is State.OFF and self.power_mw != 0:
            raise EnergyDomainError(f"{self.component_id}: power in state 'off' must be 0")
        if self.component_id == SLEEP_FLOOR and self.state is not State.OFF and self.power_mw <= 0:
            raise EnergyDomainError("sleep-floor power must be strictly positive")


@dataclass(frozen=True)
class ModelConfig:
    """One row of the resolution/accuracy/power calibration table.

    ``energy_mj`` is the published energy-per-frame figure; it is kept for
    comparison only. :func:`energy_per_frame` always recomputes it from
    ``p_total_mw / fps``.
    """

    input_resolution: int
    map50: float
    map5095: float
    ops_m: float
    params_k: float
    p_soc_mw: float
    p_mem_mw: float
    p_cam_mw: float
    p_total_mw: float
    fps: float
    energy_mj: float | None = None

    # p_total is compared against the rounded component sum
    SUM_TOLERANCE_MW = 0.1
    ENERGY_TOLERANCE_REL = 0.015

    def __post_init__(self):
        if self.input_resolution <= 0:
            raise EnergyDomainError("input_resolution must be positive")
        for name in ("map50", "map5095"):
            v = getattr(self, name)
            if not 0.0 <= v <= 100.0:
                raise EnergyDomainError(f"{name}={v} outside [0, 100]")
        if not self.fps > 0:
            raise EnergyDomainError(f"fps must be > 0, got {self.fps}")
        for name in ("p_soc_mw", "p_mem_mw", "p_cam_mw", "p_total_mw", "ops_m", "params_k"):
            if getattr(self, name) < 0:
                raise EnergyDomainError(f"{name} must be >= 0")

    def component_sum_error(self) -> float:
        return abs(self.p_soc_mw + self.p_mem_mw + self.p_cam_mw - self.p_total_mw)

    def energy_error_rel(self) -> float | None:
        if self.energy_mj is None or self.energy_mj == 0:
            return None
        return abs(self.p_total_mw / self.fps - self.energy_mj) / self.energy_mj

    def check_consistency(self) -> list[str]:
        """Return human-readable violations of the table self-consistency rules."""
        problems = []
        # 1e-9 absorbs float noise in e.g. 49.4 + 1.1 + 8.1 - 58.5
        if self.component_sum_error() > self.SUM_TOLERANCE_MW + 1e-9:
            problems.append(
                f"p_total_mw={self.p_total_mw} differs from component sum by "
                f"{self.component_sum_error():.3f} mW (> {self.SUM_TOLERANCE_MW})"
            )
        rel = self.energy_error_rel()
        if rel is not None and rel > self.ENERGY_TOLERANCE_REL:
            problems.append(
                f"energy_mj={self.energy_mj} differs from p_total/fps by {100 * rel:.2f}%"
            )
        return problems

    @property
    def frame_time_s(self) -> float:
        return 1.0 / self.fps


@dataclass(frozen=True)
class Battery:
    capacity_mah: float
    nominal_voltage_v: float

    def __post_init__(self):
        if not (self.capacity_mah > 0 and self.nominal_voltage_v > 0):
            raise EnergyDomainError("battery capacity and voltage must be positive")

    @property
    def capacity_joules(self) -> float:
        return battery_capacity_joules(self)


DEFAULT_BATTERY = Battery(600.0, 3.7)


@dataclass(frozen=True)
class LedgerEntry:
    component_id: str
    phase_label: str
    energy_mj: float


@dataclass
class EnergyLedger:
    """Per-(component, phase) energy accumulated over ``duration_s``."""

    duration_s: float
    _totals: dict[tuple[str, str], float] = field(default_factory=dict, repr=False)

    def add(self, component_id: str, phase_label: str, energy_mj: float) -> None:
        if energy_mj < 0:
            raise EnergyDomainError(f"negative energy for {component_id}/{phase_label}")
        key = (component_id, phase_label)
        self._totals[key] = self._totals.get(key, 0.0) + energy_mj

    @property
    def entries(self) -> list[LedgerEntry]:
        return [LedgerEntry(c, p, e) for (c, p), e in sorted(self._totals.items())]

    @property
    def total_mj(self) -> float:
        return math.fsum(self._totals.values())

    @property
    def average_power_mw(self) -> float:
        if self.duration_s <= 0:
            raise EnergyDomainError("ledger duration must be positive")
        return self.total_mj / self.duration_s

    def by_component(self) -> dict[str, float]:
        out: dict[str, float] = {}
        for (c, _), e in sorted(self._totals.items()):
            out[c] = out.get(c, 0.0) + e
        return out

    def component_total(self, prefix: str) -> float:
        """Energy of every component whose id starts with ``prefix``."""
        return math.fsum(e for (c, _), e in self._totals.items() if c.startswith(prefix))


@dataclass(frozen=True)
class Sensor:
    name: str
    readout_energy_mj: float
    readout_duration_s: float
    peak_power_mw: float

    @property
    def heated(self) -> bool:
        return self.name.lower() in HEATED_SENSORS

    @property
    def average_power_mw(self) -> float:
        return self.readout_energy_mj / self.readout_duration_s


@dataclass(frozen=True)
class SensorSuite:
    sensors: tuple[Sensor, ...]

    def __post_init__(self):
        if not self.sensors:
            raise EnergyDomainError("sensor suite is empty")
        for s in self.sensors:
            if s.readout_energy_mj < 0 or s.readout_duration_s <= 0:
                raise EnergyDomainError(f"sensor {s.name}: invalid readout energy/duration")
            limit = HEATED_PEAK_LIMIT_MW if s.heated else UNHEATED_PEAK_LIMIT_MW
            if s.peak_power_mw > limit:
                raise EnergyDomainError(
                    f"sensor {s.name}: peak power {s.peak_power_mw} mW exceeds {limit} mW"
                )
            if s.average_power_mw > s.peak_power_mw + 1e-9:
                raise EnergyDomainError(f"sensor {s.name}: average readout power exceeds peak")

    @property
    def total_energy_mj(self) -> float:
        return math.fsum(s.readout_energy_mj for s in self.sensors)

    @property
    def total_duration_s(self) -> float:
        return math.fsum(s.readout_duration_s for s in self.sensors)

    def heated_fraction(self) -> float:
        return math.fsum(s.readout_energy_mj for s in self.sensors if s.heated) / self.total_energy_mj


def phase_energy(power_mw: float, duration_s: float) -> float:
    """Energy in mJ of drawing ``power_mw`` for ``duration_s``."""
    if power_mw < 0 or duration_s < 0:
        raise EnergyDomainError(f"phase_energy needs nonnegative inputs, got ({power_mw}, {duration_s})")
    return power_mw * duration_s


def energy_per_frame(config: ModelConfig) -> float:
    if config.fps <= 0:
        raise EnergyDomainError("fps must be > 0")
    return config.p_total_mw / config.fps


def efficiency_pp_per_mj(config: ModelConfig) -> float:
    """mAP50 percentage points per millijoule of frame energy."""
    e = energy_per_frame(config)
    if e <= 0:
        raise EnergyDomainError("energy per frame must be positive")
    return config.map50 / e


def battery_capacity_joules(battery: Battery) -> float:
    if battery.capacity_mah <= 0 or battery.nominal_voltage_v <= 0:
        raise EnergyDomainError("battery capacity and voltage must be positive")
    return battery.capacity_mah * 3.6 * battery.nominal_voltage_v


def lifetime_hours(avg_power_mw: float, battery: Battery) -> float:
    if avg_power_mw <= 0:
        raise EnergyDomainError("average power must be positive")
    return battery_capacity_joules(battery) / (avg_power_mw / 1000.0) / 3600.0


def best_efficiency(configs: Sequence[ModelConfig]) -> ModelConfig:
    """Config with the highest mAP50 per mJ; first one wins ties."""
    if not configs:
        raise EnergyDomainError("no configurations given")
    return max(configs, key=efficiency_pp_per_mj)


def config_for_resolution(configs: Iterable[ModelConfig], resolution: int) -> ModelConfig:
    for c in configs:
        if c.input_resolution == resolution:
            return c
    raise KeyError(f"no calibration row for resolution {resolution}")
