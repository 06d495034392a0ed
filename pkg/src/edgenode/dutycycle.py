"""Duty-cycled capture -> infer -> transmit -> sleep simulation.

The simulator runs on an integer-microsecond clock. Every active phase is an
event on one component; the sleep floor is drawn whenever no component is
active. Energies are integrated straight from the event list, so the ledger
equals the trace integral by construction.
"""

from __future__ import annotations

import bisect
import heapq
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Sequence

from .energy import (
    CAMERA,
    COMPUTE_SOC,
    DEFAULT_BATTERY,
    DEFAULT_SLEEP_POWER_MW,
    EXTERNAL_MEMORY,
    RADIO,
    SLEEP_FLOOR,
    Battery,
    EnergyDomainError,
    EnergyLedger,
    ModelConfig,
    SensorSuite,
    efficiency_pp_per_mj,
    energy_per_frame,
    lifetime_hours,
    phase_energy,
)

US = 1_000_000
EDGE_PAYLOAD_BYTES = 16  # count + timestamp + status
RAW_FRAME_BYTES = 320 * 240  # 8-bit grayscale


class SchedulingError(RuntimeError):
    def __init__(self, message: str, cycle: int | None = None, component: str | None = None):
        super().__init__(message)
        self.cycle = cycle
        self.component = component


def to_us(seconds: float) -> int:
    return int(round(seconds * US))


@dataclass(frozen=True)
class RadioModel:
    tx_power_mw: float = 10.0
    throughput_bps: float = 1.36e6
    per_event_overhead_bytes: int = 0

    def __post_init__(self):
        if self.tx_power_mw <= 0 or self.throughput_bps <= 0 or self.per_event_overhead_bytes < 0:
            raise EnergyDomainError("radio power and throughput must be positive")

    def tx_time_s(self, payload_bytes: int) -> float:
        if payload_bytes < 0:
            raise EnergyDomainError("payload must be >= 0")
        if payload_bytes == 0:
            return 0.0
        return (payload_bytes + self.per_event_overhead_bytes) * 8 / self.throughput_bps

    def tx_energy_mj(self, payload_bytes: int) -> float:
        return phase_energy(self.tx_power_mw, self.tx_time_s(payload_bytes))


@dataclass(frozen=True)
class CaptureProfile:
    """Camera-only frame grab used by the streaming baseline."""

    power_mw: float
    duration_s: float

    def __post_init__(self):
        if self.power_mw < 0 or self.duration_s < 0:
            raise EnergyDomainError("capture power and duration must be >= 0")

    @property
    def energy_mj(self) -> float:
        return phase_energy(self.power_mw, self.duration_s)


DEFAULT_RADIO = RadioModel()
# calibrated: camera power interpolated at 320x240 from the calibration table,
# duration chosen so the raw-streaming sample lands on the measured baseline
DEFAULT_CAPTURE = CaptureProfile(power_mw=7.6, duration_s=0.27)


class Mode(str, Enum):
    EDGE = "edge-inference"
    STREAMING = "raw-streaming"
    END_TO_END = "end-to-end"
    IDLE = "idle"


class Trigger(str, Enum):
    FIXED = "fixed"
    OCCUPANCY = "occupancy-driven"


@dataclass(frozen=True)
class SamplingPolicy:
    occupied_sensor_interval_s: float = 60.0
    vacant_sensor_interval_s: float = 60.0
    trigger: Trigger = Trigger.FIXED

    def __post_init__(self):
        object.__setattr__(self, "trigger", Trigger(self.trigger))
        if self.occupied_sensor_interval_s <= 0:
            raise EnergyDomainError("sensor interval must be positive")
        if self.vacant_sensor_interval_s < self.occupied_sensor_interval_s:
            raise EnergyDomainError("vacant interval must be >= occupied interval")

    def interval_s(self, occupants: int) -> float:
        if self.trigger is Trigger.OCCUPANCY and occupants == 0:
            return self.vacant_sensor_interval_s
        return self.occupied_sensor_interval_s


@dataclass(frozen=True)
class OccupancyTrace:
    """Step function of occupant count; before the first sample the first count holds."""

    timeline: tuple[tuple[float, int], ...]

    def __post_init__(self):
        tl = tuple((float(t), int(c)) for t, c in self.timeline)
        if not tl:
            raise EnergyDomainError("occupancy trace is empty")
        for (t0, _), (t1, _) in zip(tl, tl[1:]):
            if not t1 > t0:
                raise EnergyDomainError(f"trace timestamps must increase strictly ({t0} -> {t1})")
        if any(c < 0 for _, c in tl):
            raise EnergyDomainError("occupant counts must be >= 0")
        object.__setattr__(self, "timeline", tl)

    def count_at(self, t_s: float) -> int:
        times = [t for t, _ in self.timeline]
        i = bisect.bisect_right(times, t_s) - 1
        return self.timeline[max(i, 0)][1]

    @classmethod
    def constant(cls, count: int) -> "OccupancyTrace":
        return cls(((0.0, count),))


@dataclass(frozen=True)
class Workload:
    mode: Mode
    model_config: ModelConfig | None = None
    camera_interval_s: float = 2.0
    sensor_interval_s: float = 60.0
    payload_bytes_per_event: int | None = None
    radio: RadioModel = DEFAULT_RADIO
    sleep_power_mw: float = DEFAULT_SLEEP_POWER_MW
    capture: CaptureProfile = DEFAULT_CAPTURE
    sensors: SensorSuite | None = None
    sensor_split: bool = False
    transmit_sensor_values: bool = False
    sensor_payload_bytes: int = 32

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.camera_interval_s <= 0 or self.sensor_interval_s <= 0:
            raise EnergyDomainError("intervals must be positive")
        if self.sleep_power_mw <= 0:
            raise EnergyDomainError("sleep floor must be strictly positive")
        if self.mode in (Mode.EDGE, Mode.END_TO_END) and self.model_config is None:
            raise EnergyDomainError(f"{self.mode.value} workload needs a model config")
        if self.mode is Mode.END_TO_END and self.sensors is None:
            raise EnergyDomainError("end-to-end workload needs a sensor suite")

    @property
    def payload_bytes(self) -> int:
        if self.payload_bytes_per_event is not None:
            return self.payload_bytes_per_event
        return RAW_FRAME_BYTES if self.mode is Mode.STREAMING else EDGE_PAYLOAD_BYTES


# --- closed-form per-sample energies ---

def per_sample_energy_edge(
    config: ModelConfig,
    radio: RadioModel | None = DEFAULT_RADIO,
    sleep_power_mw: float = DEFAULT_SLEEP_POWER_MW,
    period_s: float = 2.0,
    payload_bytes: int = EDGE_PAYLOAD_BYTES,
) -> float:
    """Frame energy + result transmission + sleep for the rest of the period."""
    frame_s = 1.0 / config.fps
    tx_s = radio.tx_time_s(payload_bytes) if radio is not None else 0.0
    tx_mj = radio.tx_energy_mj(payload_bytes) if radio is not None else 0.0
    if period_s < frame_s or period_s < frame_s + tx_s:
        raise EnergyDomainError(f"period {period_s} s shorter than frame + transmit time {frame_s + tx_s:.6f} s")
    return energy_per_frame(config) + tx_mj + phase_energy(sleep_power_mw, max(0.0, period_s - frame_s - tx_s))


def per_sample_energy_streaming(
    radio: RadioModel = DEFAULT_RADIO,
    camera_profile: CaptureProfile = DEFAULT_CAPTURE,
    sleep_power_mw: float = DEFAULT_SLEEP_POWER_MW,
    period_s: float = 2.0,
    payload_bytes: int = RAW_FRAME_BYTES,
) -> float:
    """Raw-frame baseline: capture, ship the frame over the radio, sleep."""
    tx_s = radio.tx_time_s(payload_bytes)
    busy = camera_profile.duration_s + tx_s
    if busy > period_s:
        raise EnergyDomainError(f"capture + transmit ({busy:.4f} s) overruns the {period_s} s period")
    return camera_profile.energy_mj + radio.tx_energy_mj(payload_bytes) + phase_energy(sleep_power_mw, max(0.0, period_s - busy))


def savings_percent(edge_mj: float, streaming_mj: float) -> float:
    if streaming_mj <= 0:
        raise EnergyDomainError("baseline energy must be positive")
    return 100.0 * (streaming_mj - edge_mj) / streaming_mj


def per_sample_energy(workload: Workload) -> float:
    if workload.mode is Mode.EDGE:
        return per_sample_energy_edge(
            workload.model_config, workload.radio, workload.sleep_power_mw,
            workload.camera_interval_s, workload.payload_bytes,
        )
    if workload.mode is Mode.STREAMING:
        return per_sample_energy_streaming(
            workload.radio, workload.capture, workload.sleep_power_mw,
            workload.camera_interval_s, workload.payload_bytes,
        )
    raise EnergyDomainError(f"no per-sample model for mode {workload.mode.value}")


# --- event simulation ---

@dataclass(frozen=True, slots=True)
class Event:
    t_start_us: int
    t_end_us: int
    component: str
    phase: str
    power_mw: float

    @property
    def duration_us(self) -> int:
        return self.t_end_us - self.t_start_us

    @property
    def energy_mj(self) -> float:
        return self.power_mw * self.duration_us / US


@dataclass
class SimTrace:
    events: list[Event]
    summary: EnergyLedger

    def integral_mj(self) -> float:
        return math.fsum(e.energy_mj for e in self.events)

    def component_busy_us(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for e in self.events:
            out[e.component] = out.get(e.component, 0) + e.duration_us
        return out


@dataclass
class SimResult:
    trace: SimTrace
    duration_s: float
    cycle_s: float

    @property
    def total_mj(self) -> float:
        return self.trace.summary.total_mj

    @property
    def average_power_mw(self) -> float:
        return self.trace.summary.average_power_mw

    @property
    def cycle_energy_mj(self) -> float:
        return self.average_power_mw * self.cycle_s

    def lifetime_h(self, battery: Battery = DEFAULT_BATTERY) -> float:
        return lifetime_hours(self.average_power_mw, battery)


@dataclass(order=True)
class _Task:
    next_us: int
    order: int
    name: str = field(compare=False)
    cycle: int = field(default=0, compare=False)


def _frame_chain(cfg: ModelConfig, t0: int) -> list[Event]:
    end = t0 + to_us(1.0 / cfg.fps)
    return [
        Event(t0, end, COMPUTE_SOC, "inference", cfg.p_soc_mw),
        Event(t0, end, EXTERNAL_MEMORY, "inference", cfg.p_mem_mw),
        Event(t0, end, CAMERA, "capture", cfg.p_cam_mw),
    ]


def _camera_cycle(w: Workload, t0: int) -> list[Event]:
    if w.mode is Mode.STREAMING:
        end = t0 + to_us(w.capture.duration_s)
        events = [Event(t0, end, CAMERA, "capture", w.capture.power_mw)]
        tx = to_us(w.radio.tx_time_s(w.payload_bytes))
        if tx:
            events.append(Event(end, end + tx, RADIO, "tx-raw", w.radio.tx_power_mw))
        return events
    events = _frame_chain(w.model_config, t0)
    if w.mode is Mode.EDGE:
        end = events[0].t_end_us
        tx = to_us(w.radio.tx_time_s(w.payload_bytes))
        if tx:
            events.append(Event(end, end + tx, RADIO, "tx-occupancy", w.radio.tx_power_mw))
    return events


def _sensor_cycle(w: Workload, t0: int) -> list[Event]:
    suite = w.sensors
    events = []
    if w.sensor_split:
        t = t0
        for s in suite.sensors:
            d = to_us(s.readout_duration_s)
            events.append(Event(t, t + d, f"sensor:{s.name}", "readout", s.average_power_mw))
            t += d
    else:
        d = to_us(suite.total_duration_s)
        # power chosen so the aggregate event carries the whole suite energy
        p = suite.total_energy_mj / (d / US)
        events.append(Event(t0, t0 + d, "sensor:suite", "readout", p))
        t = t0 + d
    if w.transmit_sensor_values:
        tx = to_us(w.radio.tx_time_s(w.sensor_payload_bytes))
        events.append(Event(t, t + tx, RADIO, "tx-sensors", w.radio.tx_power_mw))
    return events


def simulate(
    workload: Workload,
    policy: SamplingPolicy | None = None,
    trace: OccupancyTrace | None = None,
    duration_s: float = 3600.0,
    battery: Battery = DEFAULT_BATTERY,
) -> SimResult:
    """Run ``workload`` for ``duration_s``; cameras fire from t=0, sensors too.

    Sensor readouts follow ``policy`` (fixed at ``workload.sensor_interval_s``
    when omitted); an occupancy-driven policy looks up ``trace`` at each
    readout to choose the next interval. Events running past the horizon are
    clipped.
    """
    horizon = to_us(duration_s)
    if horizon <= 0:
        raise EnergyDomainError("duration must be positive")
    if policy is None:
        policy = SamplingPolicy(workload.sensor_interval_s, workload.sensor_interval_s)
    if trace is None:
        trace = OccupancyTrace.constant(1)

    cam_period = to_us(workload.camera_interval_s)
    tasks: list[_Task] = []
    if workload.mode is not Mode.IDLE:
        heapq.heappush(tasks, _Task(0, 0, "camera"))
    if workload.mode is Mode.END_TO_END:
        heapq.heappush(tasks, _Task(0, 1, "sensors"))

    raw: list[Event] = []
    while tasks and tasks[0].next_us < horizon:
        task = heapq.heappop(tasks)
        t0 = task.next_us
        if task.name == "camera":
            chain = _camera_cycle(workload, t0)
            nxt = t0 + cam_period
        else:
            chain = _sensor_cycle(workload, t0)
            nxt = t0 + to_us(policy.interval_s(trace.count_at(t0 / US)))
        chain_end = max(e.t_end_us for e in chain)
        if chain_end > nxt:
            raise SchedulingError(
                f"{task.name} cycle {task.cycle} at t={t0 / US:.6f} s needs "
                f"{(chain_end - t0) / US:.6f} s but the next cycle starts after "
                f"{(nxt - t0) / US:.6f} s",
                cycle=task.cycle,
                component=task.name,
            )
        raw.extend(chain)
        task.next_us = nxt
        task.cycle += 1
        heapq.heappush(tasks, task)

    events = _clip_and_check(raw, horizon)
    events.extend(_sleep_events(events, horizon, workload.sleep_power_mw))
    events.sort(key=lambda e: (e.t_start_us, e.component, e.phase))

    ledger = EnergyLedger(duration_s=horizon / US)
    for e in events:
        ledger.add(e.component, e.phase, e.energy_mj)
    return SimResult(SimTrace(events, ledger), horizon / US, _cycle_s(workload, policy))


def _clip_and_check(raw: list[Event], horizon: int) -> list[Event]:
    out = []
    last_end: dict[str, tuple[int, Event]] = {}
    for e in sorted(raw, key=lambda e: (e.t_start_us, e.component, e.phase)):
        if e.t_start_us >= horizon or e.duration_us <= 0:
            continue
        if e.t_end_us > horizon:
            e = replace(e, t_end_us=horizon)
        prev = last_end.get(e.component)
        if prev is not None and e.t_start_us < prev[0]:
            raise SchedulingError(
                f"{e.component}: '{e.phase}' at {e.t_start_us} us overlaps "
                f"'{prev[1].phase}' ending at {prev[0]} us",
                component=e.component,
            )
        last_end[e.component] = (e.t_end_us, e)
        out.append(e)
    return out


def _sleep_events(events: Sequence[Event], horizon: int, power_mw: float) -> list[Event]:
    """Sleep-floor events covering every instant where no component is active."""
    out = []
    cursor = 0
    for e in sorted(events, key=lambda e: e.t_start_us):
        if e.t_start_us > cursor:
            out.append(Event(cursor, e.t_start_us, SLEEP_FLOOR, "sleep", power_mw))
        cursor = max(cursor, e.t_end_us)
    if cursor < horizon:
        out.append(Event(cursor, horizon, SLEEP_FLOOR, "sleep", power_mw))
    return out


def _cycle_s(workload: Workload, policy: SamplingPolicy) -> float:
    cam = to_us(workload.camera_interval_s)
    if workload.mode is Mode.END_TO_END:
        return math.lcm(cam, to_us(policy.occupied_sensor_interval_s)) / US
    return cam / US


# --- resolution sweep ---

@dataclass(frozen=True)
class LifetimeRow:
    resolution: int
    map50: float
    map5095: float
    energy_per_frame_mj: float
    efficiency_pp_per_mj: float
    per_sample_mj: float
    avg_power_mw: float
    lifetime_h: float
    best_efficiency: bool = False

    @property
    def lifetime_days(self) -> float:
        return self.lifetime_h / 24.0


def lifetime_table(
    configs: Sequence[ModelConfig],
    template: Workload,
    battery: Battery = DEFAULT_BATTERY,
) -> list[LifetimeRow]:
    """One row per calibration config under ``template``'s period, radio and sleep settings.

    In streaming mode the per-sample figure is the raw-frame baseline and is
    the same for every row. The highest mAP50-per-mJ row is flagged.
    """
    if not configs:
        raise EnergyDomainError("no configurations given")
    rows = []
    for cfg in configs:
        w = replace(template, model_config=cfg) if template.mode is not Mode.STREAMING else template
        if w.mode is Mode.EDGE or w.mode is Mode.STREAMING:
            sample = per_sample_energy(w)
        else:
            raise EnergyDomainError("lifetime tables cover edge-inference and raw-streaming modes")
        avg = sample / w.camera_interval_s
        rows.append(LifetimeRow(
            cfg.input_resolution, cfg.map50, cfg.map5095, energy_per_frame(cfg),
            efficiency_pp_per_mj(cfg), sample, avg, lifetime_hours(avg, battery),
        ))
    best = max(range(len(rows)), key=lambda i: rows[i].efficiency_pp_per_mj)
    rows[best] = replace(rows[best], best_efficiency=True)
    return rows
