"""Every file format the toolkit reads or writes.

Text configs are ``key = value`` lines. ``#`` starts a comment; a trailing
``; assumption=true`` marks a value as an uncalibrated assumption, and the
flag is carried into reports.

Scenario keys (paths are relative to the config file):

    mode                      edge-inference | raw-streaming | end-to-end | idle
    calibration               calibration table CSV
    resolution                calibration row to use (pixels per side)
    camera_interval_s         capture/inference period
    sensor_interval_s         sensor readout period (fixed policy)
    payload_bytes             radio payload per camera event
    sleep_power_mw            system sleep floor
    radio_tx_power_mw, radio_throughput_bps, radio_overhead_bytes
    capture_power_mw, capture_duration_s       raw-streaming frame grab
    sensor_suite              sensor CSV
    sensor_split              per-sensor readout events instead of one aggregate
    transmit_sensor_values    send sensor values over the radio after readout
    sensor_payload_bytes
    battery_capacity_mah, battery_voltage_v
    policy_trigger            fixed | occupancy-driven
    occupied_sensor_interval_s, vacant_sensor_interval_s
    occupancy                 occupancy trace CSV (t_s,count)
    duration_s                default simulated horizon
"""

from __future__ import annotations

import csv
import io
import struct
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from .dutycycle import (
    CaptureProfile,
    Event,
    LifetimeRow,
    Mode,
    OccupancyTrace,
    RadioModel,
    SamplingPolicy,
    SimTrace,
    Workload,
)
from .energy import (
    Battery,
    EnergyDomainError,
    EnergyLedger,
    ModelConfig,
    Sensor,
    SensorSuite,
    config_for_resolution,
)
from .pipeline.image import RawBayerImage, RgbImage
from .pipeline.model import Layer, MicroModel
from .pipeline.postprocess import DetectionBox
from .pipeline.quant import Granularity, QuantizedTensor, QuantParams
from .tiler import TilePlan

PACKAGE_DIR = Path(__file__).resolve().parent
CALIBRATION_DIR = PACKAGE_DIR / "calibration"
SCENARIO_DIR = PACKAGE_DIR / "scenarios"
MODEL_DIR = PACKAGE_DIR / "models"
FIXTURE_DIR = PACKAGE_DIR / "fixtures"
DEFAULT_CALIBRATION = CALIBRATION_DIR / "table1.csv"
DEFAULT_SENSORS = CALIBRATION_DIR / "sensors.csv"
DEFAULT_DEPLOY = SCENARIO_DIR / "deploy.cfg"
DEFAULT_MODEL = MODEL_DIR / "micro_yolo_192.edgs"

FLOAT_DECIMALS = 6


class ScenarioError(ValueError):
    """Malformed input file. ``line``/``row`` point at the offending spot when known."""

    def __init__(self, message: str, path: str | Path | None = None, line: int | None = None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
        self.path = path
        self.line = line


def fmt(x: float) -> str:
    return f"{x:.{FLOAT_DECIMALS}f}"


# --- calibration table ---

CALIBRATION_COLUMNS = (
    "resolution", "map50", "map5095", "ops_m", "params_k",
    "p_soc_mw", "p_mem_mw", "p_cam_mw", "p_total_mw", "fps", "energy_mj",
)


def _data_lines(text: str) -> list[tuple[int, str]]:
    return [(i, l) for i, l in enumerate(text.splitlines(), 1) if l.strip() and not l.lstrip().startswith("#")]


def load_calibration(path: str | Path, check: bool = True) -> list[ModelConfig]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read calibration table: {exc.strerror}", path) from exc
    lines = _data_lines(text)
    if not lines:
        raise ScenarioError("empty calibration table; expected header " + ",".join(CALIBRATION_COLUMNS), path)
    header_line, header = lines[0]
    cols = [c.strip() for c in header.split(",")]
    if tuple(cols) != CALIBRATION_COLUMNS:
        raise ScenarioError(f"header {cols} does not match schema {list(CALIBRATION_COLUMNS)}", path, header_line)
    configs = []
    for line_no, line in lines[1:]:
        cells = [c.strip() for c in line.split(",")]
        if len(cells) != len(cols):
            raise ScenarioError(f"row has {len(cells)} cells, expected {len(cols)}", path, line_no)
        values: dict[str, Any] = {}
        for name, cell in zip(cols, cells):
            try:
                values[name] = int(cell) if name == "resolution" else float(cell)
            except ValueError:
                raise ScenarioError(f"column '{name}': cannot parse {cell!r}", path, line_no) from None
        try:
            cfg = ModelConfig(
                input_resolution=values["resolution"],
                **{k: values[k] for k in cols[1:]},
            )
        except EnergyDomainError as exc:
            raise ScenarioError(f"row {values['resolution']}: {exc}", path, line_no) from None
        if check:
            problems = cfg.check_consistency()
            if problems:
                column = "p_total_mw" if "p_total" in problems[0] else "energy_mj"
                raise ScenarioError(f"row {cfg.input_resolution}, column '{column}': {problems[0]}", path, line_no)
        configs.append(cfg)
    if not configs:
        raise ScenarioError("calibration table has a header but no rows", path)
    return configs


def dump_calibration(configs: Sequence[ModelConfig]) -> str:
    out = [",".join(CALIBRATION_COLUMNS)]
    for c in configs:
        out.append(",".join([
            str(c.input_resolution),
            *(repr(float(getattr(c, k))) for k in CALIBRATION_COLUMNS[1:-1]),
            repr(float(c.energy_mj)) if c.energy_mj is not None else "",
        ]))
    return "\n".join(out) + "\n"


# --- sensor suite ---

SENSOR_COLUMNS = ("name", "readout_energy_mj", "readout_duration_s", "peak_power_mw")


def load_sensor_suite(path: str | Path) -> SensorSuite:
    path = Path(path)
    try:
        lines = _data_lines(path.read_text())
    except OSError as exc:
        raise ScenarioError(f"cannot read sensor suite: {exc.strerror}", path) from exc
    if not lines or tuple(c.strip() for c in lines[0][1].split(",")) != SENSOR_COLUMNS:
        raise ScenarioError(f"expected header {','.join(SENSOR_COLUMNS)}", path, lines[0][0] if lines else None)
    sensors = []
    for line_no, line in lines[1:]:
        cells = [c.strip() for c in line.split(",")]
        if len(cells) != 4:
            raise ScenarioError("expected 4 cells", path, line_no)
        try:
            sensors.append(Sensor(cells[0], float(cells[1]), float(cells[2]), float(cells[3])))
        except ValueError:
            raise ScenarioError(f"cannot parse sensor row {cells}", path, line_no) from None
    try:
        return SensorSuite(tuple(sensors))
    except EnergyDomainError as exc:
        raise ScenarioError(str(exc), path) from None


# --- key = value configs ---

@dataclass(frozen=True)
class ConfigValue:
    raw: str
    line: int
    assumption: bool = False


def parse_kv(path: str | Path) -> dict[str, ConfigValue]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read config: {exc.strerror or exc}", path) from exc
    out: dict[str, ConfigValue] = {}
    for line_no, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        assumption = False
        if ";" in body:
            body, note = (s.strip() for s in body.split(";", 1))
            if note.replace(" ", "").lower() == "assumption=true":
                assumption = True
            elif note.replace(" ", "").lower() != "assumption=false":
                raise ScenarioError(f"unknown annotation {note!r}", path, line_no)
        if "=" not in body:
            raise ScenarioError(f"expected 'key = value', got {line.strip()!r}", path, line_no)
        key, value = (s.strip() for s in body.split("=", 1))
        if not key or not value:
            raise ScenarioError(f"expected 'key = value', got {line.strip()!r}", path, line_no)
        if key in out:
            raise ScenarioError(f"duplicate key {key!r} (first on line {out[key].line})", path, line_no)
        out[key] = ConfigValue(value, line_no, assumption)
    return out


def _bool(s: str) -> bool:
    v = s.lower()
    if v in ("true", "yes", "1", "on"):
        return True
    if v in ("false", "no", "0", "off"):
        return False
    raise ValueError(s)


class _Reader:
    def __init__(self, path: Path, kv: dict[str, ConfigValue], known: Iterable[str]):
        self.path, self.kv = path, kv
        unknown = sorted(set(kv) - set(known), key=lambda k: kv[k].line)
        if unknown:
            k = unknown[0]
            raise ScenarioError(f"unknown key {k!r}", path, kv[k].line)

    def get(self, key: str, conv: Callable[[str], Any], default: Any = None, required: bool = False):
        if key not in self.kv:
            if required:
                raise ScenarioError(f"missing required key {key!r}", self.path)
            return default
        v = self.kv[key]
        try:
            return conv(v.raw)
        except (ValueError, KeyError):
            raise ScenarioError(f"{key}: invalid value {v.raw!r}", self.path, v.line) from None

    def path_value(self, key: str, default: Path | None = None) -> Path | None:
        if key not in self.kv:
            return default
        p = Path(self.kv[key].raw)
        return p if p.is_absolute() else (self.path.parent / p).resolve()

    def line(self, key: str) -> int | None:
        return self.kv[key].line if key in self.kv else None

    @property
    def assumptions(self) -> tuple[str, ...]:
        return tuple(k for k, v in self.kv.items() if v.assumption)


SCENARIO_KEYS = (
    "mode", "calibration", "resolution", "camera_interval_s", "sensor_interval_s",
    "payload_bytes", "sleep_power_mw", "radio_tx_power_mw", "radio_throughput_bps",
    "radio_overhead_bytes", "capture_power_mw", "capture_duration_s", "sensor_suite",
    "sensor_split", "transmit_sensor_values", "sensor_payload_bytes",
    "battery_capacity_mah", "battery_voltage_v", "policy_trigger",
    "occupied_sensor_interval_s", "vacant_sensor_interval_s", "occupancy", "duration_s",
)


@dataclass
class Scenario:
    workload: Workload
    policy: SamplingPolicy
    battery: Battery
    duration_s: float = 3600.0
    occupancy: OccupancyTrace | None = None
    calibration_path: Path | None = None
    assumptions: tuple[str, ...] = ()
    configs: list[ModelConfig] = field(default_factory=list)
    source: Path | None = None


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    kv = parse_kv(path)
    r = _Reader(path, kv, SCENARIO_KEYS)
    mode = r.get("mode", Mode, required=True)
    cal_path = r.path_value("calibration", DEFAULT_CALIBRATION)
    configs: list[ModelConfig] = []
    cfg = None
    if mode in (Mode.EDGE, Mode.END_TO_END) or "resolution" in kv:
        configs = load_calibration(cal_path)
        res = r.get("resolution", int, required=mode in (Mode.EDGE, Mode.END_TO_END))
        if res is not None:
            try:
                cfg = config_for_resolution(configs, res)
            except KeyError:
                raise ScenarioError(f"resolution {res} not in {cal_path}", path, r.line("resolution")) from None
    sensors = None
    assumptions = r.assumptions
    if mode is Mode.END_TO_END or "sensor_suite" in kv:
        suite_path = r.path_value("sensor_suite", DEFAULT_SENSORS)
        sensors = load_sensor_suite(suite_path)
        # the suite file flags its own split/durations in a header comment
        if "assumption=true" in suite_path.read_text() and "sensor_suite" not in assumptions:
            assumptions += ("sensor_suite",)
    try:
        radio = RadioModel(
            r.get("radio_tx_power_mw", float, 10.0),
            r.get("radio_throughput_bps", float, 1.36e6),
            r.get("radio_overhead_bytes", int, 0),
        )
        capture = CaptureProfile(r.get("capture_power_mw", float, 7.6), r.get("capture_duration_s", float, 0.27))
        sensor_interval = r.get("sensor_interval_s", float, 60.0)
        workload = Workload(
            mode=mode,
            model_config=cfg,
            camera_interval_s=r.get("camera_interval_s", float, 2.0),
            sensor_interval_s=sensor_interval,
            payload_bytes_per_event=r.get("payload_bytes", int, None),
            radio=radio,
            sleep_power_mw=r.get("sleep_power_mw", float, 1.0),
            capture=capture,
            sensors=sensors,
            sensor_split=r.get("sensor_split", _bool, False),
            transmit_sensor_values=r.get("transmit_sensor_values", _bool, False),
            sensor_payload_bytes=r.get("sensor_payload_bytes", int, 32),
        )
        policy = SamplingPolicy(
            r.get("occupied_sensor_interval_s", float, sensor_interval),
            r.get("vacant_sensor_interval_s", float, r.get("occupied_sensor_interval_s", float, sensor_interval)),
            r.get("policy_trigger", str, "fixed"),
        )
        battery = Battery(r.get("battery_capacity_mah", float, 600.0), r.get("battery_voltage_v", float, 3.7))
    except (EnergyDomainError, ValueError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(f"inconsistent scenario: {exc}", path) from None
    occupancy = None
    occ_path = r.path_value("occupancy")
    if occ_path is not None:
        occupancy = load_occupancy(occ_path)
    return Scenario(
        workload=workload,
        policy=policy,
        battery=battery,
        duration_s=r.get("duration_s", float, 3600.0),
        occupancy=occupancy,
        calibration_path=cal_path,
        assumptions=assumptions,
        configs=configs,
        source=path,
    )


DEPLOY_KEYS = ("conf_threshold", "iou_threshold", "bayer_pattern", "l1_bytes", "l2_bytes", "l3_bytes", "buffering_depth")


@dataclass(frozen=True)
class DeployDefaults:
    conf_threshold: float = 0.4
    iou_threshold: float = 0.5
    bayer_pattern: str = "RGGB"
    l1_bytes: int = 128 * 1024
    l2_bytes: int = 1536 * 1024
    l3_bytes: int = 64 * 1024 * 1024
    buffering_depth: int = 3


def load_deploy_defaults(path: str | Path = DEFAULT_DEPLOY) -> DeployDefaults:
    path = Path(path)
    r = _Reader(path, parse_kv(path), DEPLOY_KEYS)
    base = DeployDefaults()
    kw = {f.name: r.get(f.name, type(getattr(base, f.name)), getattr(base, f.name)) for f in fields(DeployDefaults)}
    return DeployDefaults(**kw)


# --- occupancy traces ---

def load_occupancy(path: str | Path) -> OccupancyTrace:
    path = Path(path)
    try:
        lines = _data_lines(path.read_text())
    except OSError as exc:
        raise ScenarioError(f"cannot read occupancy trace: {exc.strerror}", path) from exc
    if not lines or [c.strip() for c in lines[0][1].split(",")] != ["t_s", "count"]:
        raise ScenarioError("expected header t_s,count", path, lines[0][0] if lines else None)
    timeline = []
    for line_no, line in lines[1:]:
        try:
            t, c = line.split(",")
            timeline.append((float(t), int(c)))
        except ValueError:
            raise ScenarioError(f"cannot parse {line.strip()!r}", path, line_no) from None
    try:
        return OccupancyTrace(tuple(timeline))
    except EnergyDomainError as exc:
        raise ScenarioError(str(exc), path) from None


def dump_occupancy(trace: OccupancyTrace) -> str:
    return "t_s,count\n" + "".join(f"{t!r},{c}\n" for t, c in trace.timeline)


# --- simulation traces ---

TRACE_HEADER = "t_start_us,t_end_us,component,phase,power_mw"


def dump_trace(trace: SimTrace) -> str:
    buf = io.StringIO()
    buf.write(TRACE_HEADER + "\n")
    for e in trace.events:
        buf.write(f"{e.t_start_us},{e.t_end_us},{e.component},{e.phase},{fmt(e.power_mw)}\n")
    return buf.getvalue()


def load_trace(text: str) -> SimTrace:
    lines = text.splitlines()
    if not lines or lines[0].strip() != TRACE_HEADER:
        raise ScenarioError("expected trace header " + TRACE_HEADER)
    events = []
    for i, line in enumerate(lines[1:], 2):
        try:
            a, b, comp, phase, p = line.split(",")
            events.append(Event(int(a), int(b), comp, phase, float(p)))
        except ValueError:
            raise ScenarioError(f"bad trace row {line!r}", line=i) from None
    start = min((e.t_start_us for e in events), default=0)
    end = max((e.t_end_us for e in events), default=0)
    ledger = EnergyLedger(duration_s=(end - start) / 1e6)
    for e in events:
        ledger.add(e.component, e.phase, e.energy_mj)
    return SimTrace(events, ledger)


# --- images ---

def _read_pnm(path: str | Path, magic: bytes) -> tuple[int, int, bytes]:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise ScenarioError(f"cannot read image: {exc.strerror}", path) from exc
    if data[:2] != magic:
        raise ScenarioError(f"not a binary {magic.decode()} file", path)
    tokens: list[int] = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and data[pos:pos + 1].isdigit():
            pos += 1
        if start == pos:
            raise ScenarioError("malformed header", path)
        tokens.append(int(data[start:pos]))
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise ScenarioError("malformed header", path)
    pos += 1
    w, h, maxval = tokens
    if maxval != 255:
        raise ScenarioError(f"only 8-bit images are supported (maxval {maxval})", path)
    return w, h, data[pos:]


def read_pgm(path: str | Path, pattern: str = "RGGB") -> RawBayerImage:
    w, h, body = _read_pnm(path, b"P5")
    if len(body) != w * h:
        raise ScenarioError(f"expected {w * h} samples, found {len(body)}", path)
    try:
        return RawBayerImage(np.frombuffer(body, dtype=np.uint8).reshape(h, w).copy(), pattern)
    except ValueError as exc:
        raise ScenarioError(str(exc), path) from None


def write_pgm(path: str | Path, raw: RawBayerImage) -> None:
    header = f"P5\n{raw.width} {raw.height}\n255\n".encode()
    Path(path).write_bytes(header + raw.mosaic.tobytes())


def read_ppm(path: str | Path) -> RgbImage:
    w, h, body = _read_pnm(path, b"P6")
    if len(body) != w * h * 3:
        raise ScenarioError(f"expected {w * h * 3} samples, found {len(body)}", path)
    hwc = np.frombuffer(body, dtype=np.uint8).reshape(h, w, 3)
    return RgbImage(hwc.transpose(2, 0, 1).copy())


def write_ppm(path: str | Path, img: RgbImage) -> None:
    header = f"P6\n{img.width} {img.height}\n255\n".encode()
    Path(path).write_bytes(header + img.planes.transpose(1, 2, 0).tobytes())


# --- model container ---
#
# header:  b"EDGS" | u16 version | u16 layer count | u32 input side | f64 input scale
# layer:   u8 kind | u8 relu | u8 kernel | u8 stride | u8 pad | u8 n_inputs
#          | i16 inputs[n] | u32 out_c | f64 out_scale | u8 name_len | name
#          | u8 ndim | u32 dims[ndim] | int8 weights[prod(dims)]
#          | u8 per_channel | u32 n_scales | f64 scales[n]
#          | u32 n_bias | i32 bias[n]
#          | u16 n_anchors | f64 anchors[2n]
# all little-endian

MODEL_MAGIC = b"EDGS"
MODEL_VERSION = 1
_KIND_CODES = {"conv": 0, "dwconv": 1, "maxpool": 2, "upsample": 3, "concat": 4, "head": 5}
_KIND_NAMES = {v: k for k, v in _KIND_CODES.items()}


def dump_model(model: MicroModel) -> bytes:
    out = bytearray()
    out += MODEL_MAGIC + struct.pack("<HHId", MODEL_VERSION, len(model.layers), model.input_side, model.input_scale)
    for l in model.layers:
        out += struct.pack("<6B", _KIND_CODES[l.kind], int(l.relu), l.kernel, l.stride, l.pad, len(l.inputs))
        out += struct.pack(f"<{len(l.inputs)}h", *l.inputs)
        name = l.name.encode()
        out += struct.pack("<Id B", l.out_c, l.out_scale, len(name)) + name
        if l.weights is None:
            out += struct.pack("<B", 0)
            scales, per_channel = np.zeros(0), 0
        else:
            w = l.weights.data
            out += struct.pack(f"<B{w.ndim}I", w.ndim, *w.shape) + w.astype(np.int8).tobytes()
            scales = l.weights.qparams.scales
            per_channel = int(l.weights.qparams.granularity is Granularity.PER_CHANNEL)
        out += struct.pack("<BI", per_channel, len(scales)) + scales.astype("<f8").tobytes()
        bias = np.zeros(0, np.int32) if l.bias is None else l.bias
        out += struct.pack("<I", len(bias)) + bias.astype("<i4").tobytes()
        anchors = np.zeros((0, 2)) if l.anchors is None else l.anchors
        out += struct.pack("<H", len(anchors)) + anchors.astype("<f8").tobytes()
    return bytes(out)


class _Cursor:
    def __init__(self, data: bytes, path):
        self.data, self.pos, self.path = data, 0, path

    def take(self, fmt_: str):
        size = struct.calcsize(fmt_)
        if self.pos + size > len(self.data):
            raise ScenarioError("truncated model file", self.path)
        vals = struct.unpack_from(fmt_, self.data, self.pos)
        self.pos += size
        return vals

    def array(self, dtype: str, n: int) -> np.ndarray:
        size = np.dtype(dtype).itemsize * n
        if self.pos + size > len(self.data):
            raise ScenarioError("truncated model file", self.path)
        a = np.frombuffer(self.data, dtype=dtype, count=n, offset=self.pos).copy()
        self.pos += size
        return a


def parse_model(data: bytes, path: str | Path | None = None) -> MicroModel:
    if data[:4] != MODEL_MAGIC:
        raise ScenarioError("bad magic, not an EDGS model file", path)
    cur = _Cursor(data, path)
    cur.pos = 4
    version, n_layers, side, in_scale = cur.take("<HHId")
    if version != MODEL_VERSION:
        raise ScenarioError(f"unsupported model version {version}", path)
    layers = []
    for _ in range(n_layers):
        kind, relu, k, s, pad, n_in = cur.take("<6B")
        if kind not in _KIND_NAMES:
            raise ScenarioError(f"unknown layer kind code {kind}", path)
        inputs = cur.take(f"<{n_in}h")
        out_c, out_scale, name_len = cur.take("<Id B")
        name = bytes(cur.take(f"<{name_len}s")[0]).decode()
        (ndim,) = cur.take("<B")
        weights_data = None
        if ndim:
            dims = cur.take(f"<{ndim}I")
            weights_data = cur.array("i1", int(np.prod(dims))).reshape(dims)
        per_channel, n_scales = cur.take("<BI")
        scales = cur.array("<f8", n_scales)
        (n_bias,) = cur.take("<I")
        bias = cur.array("<i4", n_bias).astype(np.int32) if n_bias else None
        (n_anchor,) = cur.take("<H")
        anchors = cur.array("<f8", 2 * n_anchor).reshape(-1, 2) if n_anchor else None
        weights = None
        if weights_data is not None:
            gran = Granularity.PER_CHANNEL if per_channel else Granularity.PER_TENSOR
            try:
                weights = QuantizedTensor(weights_data.astype(np.int8), QuantParams(gran, scales))
            except ValueError as exc:
                raise ScenarioError(f"layer {name}: {exc}", path) from None
        layers.append(Layer(
            _KIND_NAMES[kind], name, tuple(inputs), out_c, k, s, pad, bool(relu),
            weights, bias, out_scale, anchors,
        ))
    if cur.pos != len(data):
        raise ScenarioError(f"{len(data) - cur.pos} trailing bytes after last layer", path)
    try:
        return MicroModel(side, layers, in_scale)
    except ValueError as exc:
        raise ScenarioError(f"inconsistent model graph: {exc}", path) from None


def save_model(path: str | Path, model: MicroModel) -> None:
    Path(path).write_bytes(dump_model(model))


def load_model(path: str | Path) -> MicroModel:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise ScenarioError(f"cannot read model: {exc.strerror}", path) from exc
    return parse_model(data, path)


# --- detections and plans ---

DETECTION_HEADER = "frame_id,cx,cy,w,h,confidence"


def dump_detections(frames: Iterable[tuple[int, Sequence[DetectionBox]]]) -> str:
    out = [DETECTION_HEADER]
    for frame_id, boxes in frames:
        for b in boxes:
            out.append(f"{frame_id},{fmt(b.cx)},{fmt(b.cy)},{fmt(b.w)},{fmt(b.h)},{fmt(b.confidence)}")
    return "\n".join(out) + "\n"


def load_detections(text: str) -> list[tuple[int, DetectionBox]]:
    body = "\n".join(l for l in text.splitlines() if l.strip() and not l.startswith("#"))
    rows = list(csv.reader(io.StringIO(body)))
    if not rows or ",".join(rows[0]) != DETECTION_HEADER:
        raise ScenarioError("expected detections header " + DETECTION_HEADER)
    return [(int(r[0]), DetectionBox(*map(float, r[1:]))) for r in rows[1:]]


PLAN_HEADER = "layer,tile_h,tile_w,tile_oc,tiles,working_set_bytes,dma_in,dma_out"


def dump_plans(plans: Sequence[TilePlan]) -> str:
    out = [PLAN_HEADER]
    for p in plans:
        out.append(
            f"{p.layer},{p.tile_h},{p.tile_w},{p.tile_oc},{p.tiles_total},"
            f"{p.l1_working_set_bytes},{p.dma_bytes_in},{p.dma_bytes_out}"
        )
    return "\n".join(out) + "\n"


# --- reports ---

REPORT_COLUMNS = (
    "resolution", "map50", "map5095", "energy_per_frame_mj", "efficiency_pp_per_mj",
    "per_sample_mj", "avg_power_mw", "lifetime_h", "lifetime_days", "flag", "assumption",
)
BEST_FLAG = "best-efficiency"


@dataclass(frozen=True)
class ReportRow:
    resolution: int
    map50: float
    map5095: float
    energy_per_frame_mj: float
    efficiency_pp_per_mj: float
    per_sample_mj: float
    avg_power_mw: float
    lifetime_h: float
    lifetime_days: float
    flag: str = ""
    assumption: bool = False


@dataclass(frozen=True)
class Report:
    rows: tuple[ReportRow, ...]
    metadata: tuple[tuple[str, str], ...] = ()

    def meta(self, key: str) -> str | None:
        return dict(self.metadata).get(key)

    @property
    def best(self) -> ReportRow | None:
        return next((r for r in self.rows if r.flag == BEST_FLAG), None)


def make_report(rows: Sequence[LifetimeRow], metadata: dict[str, str], assumption_rows: bool = False) -> Report:
    """Report with values rounded to the emitted precision, so CSV round-trips exactly."""
    if not rows:
        raise ScenarioError("report needs at least one row")
    r6 = lambda x: round(float(x), FLOAT_DECIMALS)  # noqa: E731
    out = tuple(
        ReportRow(
            r.resolution, r6(r.map50), r6(r.map5095), r6(r.energy_per_frame_mj),
            r6(r.efficiency_pp_per_mj), r6(r.per_sample_mj), r6(r.avg_power_mw),
            r6(r.lifetime_h), r6(r.lifetime_days),
            BEST_FLAG if r.best_efficiency else "", assumption_rows,
        )
        for r in rows
    )
    return Report(out, tuple((k, str(v)) for k, v in metadata.items()))


def _row_cells(r: ReportRow) -> list[str]:
    cells = []
    for name in REPORT_COLUMNS:
        v = getattr(r, name)
        if isinstance(v, bool):
            cells.append("true" if v else "false")
        elif isinstance(v, int):
            cells.append(str(v))
        elif isinstance(v, float):
            cells.append(fmt(v))
        else:
            cells.append(v)
    return cells


def emit_report(report: Report, format: str = "csv") -> bytes:
    if not report.rows:
        raise ScenarioError("empty report")
    if format == "csv":
        lines = [f"# {k}={v}" for k, v in report.metadata]
        lines.append(",".join(REPORT_COLUMNS))
        lines += [",".join(_row_cells(r)) for r in report.rows]
        return ("\n".join(lines) + "\n").encode()
    if format == "text":
        table = [list(REPORT_COLUMNS)] + [_row_cells(r) for r in report.rows]
        widths = [max(len(row[i]) for row in table) for i in range(len(REPORT_COLUMNS))]
        lines = [f"{k}: {v}" for k, v in report.metadata]
        for row in table:
            lines.append("  ".join(c.rjust(w) for c, w in zip(row, widths)).rstrip())
        return ("\n".join(lines) + "\n").encode()
    raise ScenarioError(f"unknown report format {format!r}")


def parse_report(data: bytes | str) -> Report:
    text = data.decode() if isinstance(data, bytes) else data
    meta = []
    body = []
    for line in text.splitlines():
        if line.startswith("# "):
            k, _, v = line[2:].partition("=")
            meta.append((k, v))
        elif line.strip():
            body.append(line)
    if not body or body[0] != ",".join(REPORT_COLUMNS):
        raise ScenarioError("expected report header " + ",".join(REPORT_COLUMNS))
    rows = []
    for line in body[1:]:
        c = line.split(",")
        if len(c) != len(REPORT_COLUMNS):
            raise ScenarioError(f"bad report row {line!r}")
        rows.append(ReportRow(
            int(c[0]), *(float(x) for x in c[1:9]), c[9], c[10] == "true",
        ))
    return Report(tuple(rows), tuple(meta))
