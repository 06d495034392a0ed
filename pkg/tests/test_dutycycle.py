import math
from dataclasses import replace

import pytest
from hypothesis import given
from hypothesis import strategies as st

from edgenode.dutycycle import (
    DEFAULT_CAPTURE,
    DEFAULT_RADIO,
    RAW_FRAME_BYTES,
    CaptureProfile,
    Mode,
    OccupancyTrace,
    RadioModel,
    SamplingPolicy,
    SchedulingError,
    Workload,
    lifetime_table,
    per_sample_energy,
    per_sample_energy_edge,
    per_sample_energy_streaming,
    savings_percent,
    simulate,
    to_us,
)
from edgenode.energy import Battery, EnergyDomainError, config_for_resolution, energy_per_frame, lifetime_hours
from edgenode.scenario_io import DEFAULT_CALIBRATION, DEFAULT_SENSORS, dump_trace, load_calibration, load_sensor_suite
from oracles import trace_integral_mj

BATTERY = Battery(600, 3.7)
TABLE = load_calibration(DEFAULT_CALIBRATION)
SUITE = load_sensor_suite(DEFAULT_SENSORS)
C192 = config_for_resolution(TABLE, 192)
C512 = config_for_resolution(TABLE, 512)


def e2e(**kw):
    return Workload(Mode.END_TO_END, C512, 2.0, 60.0, sensors=SUITE, **kw)


# closed forms

def test_edge_per_sample():
    assert per_sample_energy_edge(C192, DEFAULT_RADIO, 1.0, 2.0) == pytest.approx(4.6, rel=0.02)


def test_edge_no_sleep_no_radio_is_frame_energy():
    assert per_sample_energy_edge(C192, None, 1e-300, 1 / C192.fps) == pytest.approx(energy_per_frame(C192))


def test_edge_period_at_frame_time():
    e = per_sample_energy_edge(C192, None, 1.0, 1 / C192.fps)
    assert e == pytest.approx(energy_per_frame(C192), rel=1e-12)
    with pytest.raises(EnergyDomainError):
        per_sample_energy_edge(C192, None, 1.0, 0.5 / C192.fps)


def test_streaming_per_sample():
    assert per_sample_energy_streaming(DEFAULT_RADIO, DEFAULT_CAPTURE, 1.0, 2.0, RAW_FRAME_BYTES) == pytest.approx(7.86, rel=0.03)


def test_streaming_zero_payload():
    e = per_sample_energy_streaming(DEFAULT_RADIO, DEFAULT_CAPTURE, 1.0, 2.0, 0)
    assert e == pytest.approx(DEFAULT_CAPTURE.energy_mj + 1.0 * (2.0 - DEFAULT_CAPTURE.duration_s))


def test_streaming_payload_linear_in_radio_term():
    # with no sleep floor the only payload-dependent term is the radio
    cap = CaptureProfile(7.6, 0.27)
    e0 = per_sample_energy_streaming(DEFAULT_RADIO, cap, 1e-300, 2.0, 0)
    e1 = per_sample_energy_streaming(DEFAULT_RADIO, cap, 1e-300, 2.0, 38_400)
    e2 = per_sample_energy_streaming(DEFAULT_RADIO, cap, 1e-300, 2.0, 76_800)
    assert e2 - e0 == pytest.approx(2 * (e1 - e0), rel=1e-12)
    assert e2 - e0 == pytest.approx(DEFAULT_RADIO.tx_energy_mj(76_800), rel=1e-12)


def test_savings():
    assert savings_percent(4.58, 7.86) == pytest.approx(41.7, abs=0.05)
    assert savings_percent(3.0, 3.0) == 0.0
    assert savings_percent(2.29, 3.93) == pytest.approx(savings_percent(4.58, 7.86), abs=0.1)


@given(st.floats(0.01, 100), st.floats(0.01, 100), st.floats(0.1, 100))
def test_savings_ratio_identity(e, s, period):
    assert savings_percent(e / period, s / period) == pytest.approx(savings_percent(e, s), rel=1e-9, abs=1e-9)


def test_radio_validation():
    with pytest.raises(EnergyDomainError):
        RadioModel(10.0, 0.0)


# simulation

def test_end_to_end_cycle():
    r = simulate(e2e(), duration_s=3600)
    assert r.cycle_s == 60.0
    assert r.cycle_energy_mj == pytest.approx(929, rel=0.03)
    assert r.average_power_mw == pytest.approx(15.5, rel=0.03)
    assert r.lifetime_h(BATTERY) == pytest.approx(143, rel=0.03)


def test_split_sensors_same_energy():
    a = simulate(e2e(), duration_s=600)
    b = simulate(e2e(sensor_split=True), duration_s=600)
    assert b.total_mj == pytest.approx(a.total_mj, rel=1e-9)
    assert {e.component for e in b.trace.events if e.component.startswith("sensor:")} == {
        f"sensor:{s.name}" for s in SUITE.sensors}


def test_transmitting_sensor_values_costs_more():
    a = simulate(e2e(), duration_s=600)
    b = simulate(e2e(transmit_sensor_values=True), duration_s=600)
    assert b.total_mj > a.total_mj
    assert b.trace.summary.component_total("radio") > 0


def test_idle_hour_is_sleep_only():
    r = simulate(Workload(Mode.IDLE), duration_s=3600)
    assert r.total_mj == pytest.approx(3600.0)
    assert {e.component for e in r.trace.events} == {"sleep-floor"}


def test_edge_and_streaming_sim_match_closed_form():
    edge = Workload(Mode.EDGE, C192)
    stream = Workload(Mode.STREAMING)
    for w in (edge, stream):
        r = simulate(w, duration_s=200)
        assert r.cycle_energy_mj == pytest.approx(per_sample_energy(w), rel=1e-5)


def test_occupancy_policy_saves_sensor_energy():
    trace = OccupancyTrace(((0.0, 2), (1800.0, 0)))
    fixed = simulate(e2e(), SamplingPolicy(60, 60), trace, 3600)
    adaptive = simulate(e2e(), SamplingPolicy(60, 300, "occupancy-driven"), trace, 3600)
    assert adaptive.trace.summary.component_total("sensor:") < fixed.trace.summary.component_total("sensor:")


@given(st.lists(st.tuples(st.integers(0, 7200), st.integers(0, 4)), min_size=1, max_size=8, unique_by=lambda x: x[0]),
       st.integers(60, 600))
def test_policy_dominance(timeline, vacant):
    trace = OccupancyTrace(tuple(sorted((float(t), c) for t, c in timeline)))
    fixed = simulate(e2e(), SamplingPolicy(60, 60), trace, 7200)
    adaptive = simulate(e2e(), SamplingPolicy(60, vacant, "occupancy-driven"), trace, 7200)
    assert adaptive.trace.summary.component_total("sensor:") <= fixed.trace.summary.component_total("sensor:")


def test_occupancy_before_first_sample_uses_first_count():
    t = OccupancyTrace(((100.0, 3), (200.0, 0)))
    assert t.count_at(0.0) == 3 and t.count_at(150.0) == 3 and t.count_at(250.0) == 0


def test_occupancy_trace_validation():
    with pytest.raises(EnergyDomainError):
        OccupancyTrace(((5.0, 1), (5.0, 2)))
    with pytest.raises(EnergyDomainError):
        OccupancyTrace(((0.0, -1),))


def test_overrun_raises_scheduling_error():
    with pytest.raises(SchedulingError) as exc:
        simulate(Workload(Mode.EDGE, C512, camera_interval_s=0.1), duration_s=10)
    assert exc.value.component == "camera"


def test_sensor_readout_longer_than_interval():
    with pytest.raises(SchedulingError):
        simulate(Workload(Mode.END_TO_END, C512, 2.0, 5.0, sensors=SUITE), duration_s=60)


def test_simulation_deterministic():
    a = dump_trace(simulate(e2e(sensor_split=True), duration_s=300).trace)
    b = dump_trace(simulate(e2e(sensor_split=True), duration_s=300).trace)
    assert a == b


def _check_conservation(r, horizon_us):
    events = r.trace.events
    assert trace_integral_mj(events) == pytest.approx(r.total_mj, rel=1e-6)
    by_comp = {}
    for e in events:
        assert 0 <= e.t_start_us < e.t_end_us <= horizon_us
        by_comp.setdefault(e.component, []).append(e)
    for comp, evs in by_comp.items():
        evs.sort(key=lambda e: e.t_start_us)
        busy = sum(e.duration_us for e in evs)
        gaps = evs[0].t_start_us + horizon_us - evs[-1].t_end_us
        gaps += sum(b.t_start_us - a.t_end_us for a, b in zip(evs, evs[1:]))
        assert all(b.t_start_us >= a.t_end_us for a, b in zip(evs, evs[1:])), comp
        assert busy + gaps == horizon_us
    # sleep fills exactly the instants with nothing else running
    active = sorted((e.t_start_us, e.t_end_us) for e in events if e.component != "sleep-floor")
    covered, cursor = 0, 0
    for s, t in active:
        covered += max(0, t - max(s, cursor))
        cursor = max(cursor, t)
    assert covered + r.trace.component_busy_us().get("sleep-floor", 0) == horizon_us


@given(
    st.sampled_from(list(Mode)),
    st.sampled_from(TABLE),
    st.floats(0.5, 10),
    st.floats(6, 120),
    st.floats(0.1, 5),
    st.floats(1, 900),
    st.booleans(),
    st.booleans(),
)
def test_conservation_random_scenarios(mode, cfg, cam, sens, sleep, duration, split, tx):
    w = Workload(mode, cfg, cam, sens, sleep_power_mw=sleep, sensors=SUITE, sensor_split=split,
                 transmit_sensor_values=tx)
    try:
        r = simulate(w, duration_s=duration)
    except SchedulingError:
        return
    _check_conservation(r, to_us(duration))


# lifetime table

def test_lifetime_table_default():
    rows = lifetime_table(TABLE, Workload(Mode.EDGE, C192), BATTERY)
    assert len(rows) == 8
    best = [r for r in rows if r.best_efficiency]
    assert [r.resolution for r in best] == [192]
    r192 = next(r for r in rows if r.resolution == 192)
    assert r192.lifetime_days > 40


def test_lifetime_table_streaming():
    rows = lifetime_table(TABLE, Workload(Mode.STREAMING), BATTERY)
    assert all(r.lifetime_days == pytest.approx(24, abs=1) for r in rows)
    assert len({r.per_sample_mj for r in rows}) == 1


def test_lifetime_table_single_row():
    rows = lifetime_table([C512], Workload(Mode.EDGE, C512), BATTERY)
    assert len(rows) == 1 and rows[0].best_efficiency


def test_lifetime_table_matches_closed_form():
    for r in lifetime_table(TABLE, Workload(Mode.EDGE, C192), BATTERY):
        cfg = config_for_resolution(TABLE, r.resolution)
        e = per_sample_energy_edge(cfg)
        assert r.per_sample_mj == pytest.approx(e)
        assert r.lifetime_h == pytest.approx(lifetime_hours(e / 2.0, BATTERY))


def test_lifetime_table_rejects_end_to_end():
    with pytest.raises(EnergyDomainError):
        lifetime_table(TABLE, e2e(), BATTERY)
    with pytest.raises(EnergyDomainError):
        lifetime_table([], Workload(Mode.EDGE, C192), BATTERY)


def test_workload_validation():
    with pytest.raises(EnergyDomainError):
        Workload(Mode.EDGE)
    with pytest.raises(EnergyDomainError):
        Workload(Mode.END_TO_END, C512)
    with pytest.raises(EnergyDomainError):
        Workload(Mode.IDLE, sleep_power_mw=0.0)
    with pytest.raises(EnergyDomainError):
        SamplingPolicy(60, 30)


def test_cycle_is_lcm_of_intervals():
    r = simulate(Workload(Mode.END_TO_END, C512, 4.0, 6.0, sensors=replace(SUITE, sensors=SUITE.sensors[3:])),
                 duration_s=60)
    assert r.cycle_s == 12.0
    assert math.isfinite(r.cycle_energy_mj)
