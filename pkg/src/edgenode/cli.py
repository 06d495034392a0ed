"""Command-line entry point: ``edgenode <simulate|sweep|tile|detect|report>``.

Exit codes: 0 success, 2 bad input or config, 3 infeasible tiling.
Results go to stdout, diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from . import scenario_io as sio
from .dutycycle import (
    Mode,
    SchedulingError,
    lifetime_table,
    per_sample_energy,
    savings_percent,
    simulate,
)
from .energy import EnergyDomainError, best_efficiency, efficiency_pp_per_mj, lifetime_hours
from .pipeline import ImageError, ModelError, detect
from .pipeline.quant import QuantError
from .tiler import InfeasibleError, MemoryHierarchy, TilingError, plan_graph

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE = 0, 2, 3

INPUT_ERRORS = (
    sio.ScenarioError, ImageError, ModelError, QuantError,
    EnergyDomainError, SchedulingError, TilingError, OSError,
)


def _shown(path: Path) -> str:
    """Package-relative name for shipped files so output does not depend on the install prefix."""
    try:
        return str(Path("edgenode") / Path(path).resolve().relative_to(sio.PACKAGE_DIR))
    except ValueError:
        return str(path)


def _fmt(x: float) -> str:
    return sio.fmt(x)


def _write(text: str, output: Path | None) -> None:
    if output is None:
        sys.stdout.write(text)
    else:
        output.write_text(text)


# --- simulate ---

def cmd_simulate(args: argparse.Namespace) -> int:
    sc = sio.load_scenario(args.scenario)
    occupancy = sio.load_occupancy(args.occupancy) if args.occupancy else sc.occupancy
    duration = args.duration if args.duration is not None else sc.duration_s
    result = simulate(sc.workload, sc.policy, occupancy, duration, sc.battery)
    if args.trace:
        args.trace.write_text(sio.dump_trace(result.trace))
    ledger = result.trace.summary
    lines = [
        f"scenario: {_shown(args.scenario)}",
        f"mode: {sc.workload.mode.value}",
        f"duration_s: {_fmt(result.duration_s)}",
        f"cycle_s: {_fmt(result.cycle_s)}",
        f"cycle_energy_mj: {_fmt(result.cycle_energy_mj)}",
        f"average_power_mw: {_fmt(result.average_power_mw)}",
        f"lifetime_h: {_fmt(result.lifetime_h(sc.battery))}",
        f"lifetime_days: {_fmt(result.lifetime_h(sc.battery) / 24)}",
        f"total_mj: {_fmt(ledger.total_mj)}",
    ]
    lines += [f"energy_mj[{c}]: {_fmt(e)}" for c, e in ledger.by_component().items()]
    lines.append(f"assumptions: {','.join(sc.assumptions) or 'none'}")
    print("\n".join(lines))
    return EXIT_OK


# --- sweep ---

def sweep_report(calibration: Path, mode: str, edge_cfg: Path, streaming_cfg: Path) -> sio.Report:
    configs = sio.load_calibration(calibration)
    edge = sio.load_scenario(edge_cfg)
    streaming = sio.load_scenario(streaming_cfg)
    chosen = edge if mode == "edge" else streaming
    if chosen.workload.mode is not (Mode.EDGE if mode == "edge" else Mode.STREAMING):
        raise sio.ScenarioError(f"scenario mode is {chosen.workload.mode.value}, expected {mode}", chosen.source)
    rows = lifetime_table(configs, chosen.workload, chosen.battery)

    best = best_efficiency(configs)
    edge_mj = per_sample_energy(replace(edge.workload, model_config=best))
    stream_mj = per_sample_energy(streaming.workload)
    assumptions = sorted(set(edge.assumptions) | set(streaming.assumptions))
    meta = {
        "calibration": _shown(calibration),
        "mode": chosen.workload.mode.value,
        "scenario": _shown(chosen.source),
        "period_s": _fmt(chosen.workload.camera_interval_s),
        "battery": f"{chosen.battery.capacity_mah:g} mAh @ {chosen.battery.nominal_voltage_v:g} V",
        "savings_resolution": str(best.input_resolution),
        "edge_per_sample_mj": _fmt(edge_mj),
        "streaming_per_sample_mj": _fmt(stream_mj),
        "savings_pct": _fmt(savings_percent(edge_mj, stream_mj)),
        "assumptions": ",".join(assumptions) or "none",
    }
    return sio.make_report(rows, meta, assumption_rows=bool(chosen.assumptions))


def cmd_sweep(args: argparse.Namespace) -> int:
    report = sweep_report(args.calibration, args.mode, args.edge_scenario, args.streaming_scenario)
    out = sio.emit_report(report, args.format).decode()
    if args.format == "text":
        res = report.meta("savings_resolution")
        out += (
            f"savings at {res}x{res} vs raw streaming: {float(report.meta('savings_pct')):.1f}% "
            f"({report.meta('edge_per_sample_mj')} mJ vs {report.meta('streaming_per_sample_mj')} mJ per sample)\n"
        )
    _write(out, args.output)
    return EXIT_OK


# --- tile ---

def cmd_tile(args: argparse.Namespace) -> int:
    d = sio.load_deploy_defaults(args.defaults)
    model = sio.load_model(args.model)
    mem = MemoryHierarchy(
        args.l1 if args.l1 is not None else d.l1_bytes,
        args.l2 if args.l2 is not None else d.l2_bytes,
        args.l3 if args.l3 is not None else d.l3_bytes,
    )
    depth = args.depth if args.depth is not None else d.buffering_depth
    try:
        graph = plan_graph(model, mem, depth)
    except InfeasibleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    _write(sio.dump_plans(graph.plans), args.output)
    print(
        f"{len(graph.plans)} layers, l1={mem.l1_bytes} B, depth={depth}, "
        f"dma_in={graph.dma_bytes_in} B, dma_out={graph.dma_bytes_out} B",
        file=sys.stderr,
    )
    return EXIT_OK


# --- detect ---

def cmd_detect(args: argparse.Namespace) -> int:
    d = sio.load_deploy_defaults(args.defaults)
    conf = args.conf if args.conf is not None else d.conf_threshold
    iou = args.iou if args.iou is not None else d.iou_threshold
    raw = sio.read_pgm(args.image, args.pattern or d.bayer_pattern)
    model = sio.load_model(args.model)
    try:
        result = detect(raw, model, conf, iou)
    except ValueError as exc:
        raise sio.ScenarioError(str(exc)) from None
    csv_text = sio.dump_detections([(args.frame_id, result.boxes)])
    if args.output is None:
        sys.stdout.write(csv_text)
    else:
        args.output.write_text(csv_text)
    print(f"# occupancy_count={result.count}")
    return EXIT_OK


# --- report ---

def cmd_report(args: argparse.Namespace) -> int:
    edge = sio.load_scenario(args.edge_scenario)
    streaming = sio.load_scenario(args.streaming_scenario)
    e2e = sio.load_scenario(args.end_to_end_scenario)
    configs = e2e.configs or sio.load_calibration(sio.DEFAULT_CALIBRATION)
    best = best_efficiency(configs)

    edge_mj = per_sample_energy(edge.workload)
    stream_mj = per_sample_energy(streaming.workload)
    edge_mw = edge_mj / edge.workload.camera_interval_s
    stream_mw = stream_mj / streaming.workload.camera_interval_s
    sim = simulate(e2e.workload, e2e.policy, e2e.occupancy, args.duration or e2e.duration_s, e2e.battery)
    rows = [
        ("best_efficiency_resolution", str(best.input_resolution), ""),
        ("best_efficiency_pp_per_mj", _fmt(efficiency_pp_per_mj(best)), ""),
        ("edge_resolution", str(edge.workload.model_config.input_resolution), ""),
        ("edge_per_sample_mj", _fmt(edge_mj), ",".join(edge.assumptions)),
        ("streaming_per_sample_mj", _fmt(stream_mj), ",".join(streaming.assumptions)),
        ("savings_pct", _fmt(savings_percent(edge_mj, stream_mj)), ",".join(sorted(set(edge.assumptions) | set(streaming.assumptions)))),
        ("edge_avg_power_mw", _fmt(edge_mw), ",".join(edge.assumptions)),
        ("streaming_avg_power_mw", _fmt(stream_mw), ",".join(streaming.assumptions)),
        ("edge_lifetime_days", _fmt(lifetime_hours(edge_mw, edge.battery) / 24), ",".join(edge.assumptions)),
        ("streaming_lifetime_days", _fmt(lifetime_hours(stream_mw, streaming.battery) / 24), ",".join(streaming.assumptions)),
        ("end_to_end_cycle_mj", _fmt(sim.cycle_energy_mj), ",".join(e2e.assumptions)),
        ("end_to_end_avg_power_mw", _fmt(sim.average_power_mw), ",".join(e2e.assumptions)),
        ("end_to_end_lifetime_h", _fmt(sim.lifetime_h(e2e.battery)), ",".join(e2e.assumptions)),
    ]
    if args.format == "csv":
        out = "metric,value,assumptions\n" + "".join(f"{k},{v},{a}\n" for k, v, a in rows)
    else:
        w = max(len(k) for k, _, _ in rows)
        out = "".join(
            f"{k.ljust(w)}  {v}" + (f"  [assumption: {a}]" if a else "") + "\n" for k, v, a in rows
        )
    _write(out, args.output)
    return EXIT_OK


# --- parser ---

class _Formatter(argparse.RawDescriptionHelpFormatter):
    """Appends the default to help text unless the help already explains it."""

    def _get_help_string(self, action):
        text = action.help or ""
        if "default" in text or action.default in (None, argparse.SUPPRESS) or action.required:
            return text
        default = _shown(action.default) if isinstance(action.default, Path) else action.default
        return f"{text} (default: {default})"


def build_parser() -> argparse.ArgumentParser:
    scen = sio.SCENARIO_DIR
    try:
        dd = sio.load_deploy_defaults()
    except sio.ScenarioError:
        dd = sio.DeployDefaults()
    cfgname = _shown(sio.DEFAULT_DEPLOY)
    p = argparse.ArgumentParser(
        prog="edgenode",
        description="Energy simulator, tiling planner and INT8 detection pipeline for a battery-powered sensing node.",
        formatter_class=_Formatter,
    )
    sub = p.add_subparsers(dest="command", required=True, metavar="{simulate,sweep,tile,detect,report}")

    s = sub.add_parser("simulate", help="run a duty-cycle scenario", formatter_class=_Formatter,
                       description="Event-driven simulation of a scenario; prints cycle energy, average power and lifetime.")
    s.add_argument("--scenario", type=Path, default=scen / "end_to_end.cfg", help="scenario config file")
    s.add_argument("--duration", type=float, default=None,
                   help="simulated horizon in seconds (default: the scenario's duration_s)")
    s.add_argument("--trace", type=Path, default=None, help="write the event trace CSV here")
    s.add_argument("--occupancy", type=Path, default=None,
                   help="occupancy trace CSV (t_s,count); overrides the scenario's occupancy key")
    s.set_defaults(func=cmd_simulate)

    w = sub.add_parser("sweep", help="lifetime/efficiency table over calibration rows", formatter_class=_Formatter,
                       description="One row per calibration resolution; the best mAP50-per-mJ row is flagged, "
                                   "and the per-sample savings of that row over raw streaming is reported.")
    w.add_argument("--calibration", type=Path, default=sio.DEFAULT_CALIBRATION, help="calibration table CSV")
    w.add_argument("--mode", choices=("edge", "streaming"), default="edge", help="workload used for the table rows")
    w.add_argument("--edge-scenario", type=Path, default=scen / "edge_192.cfg",
                   help="edge-inference scenario (radio, sleep, period, battery)")
    w.add_argument("--streaming-scenario", type=Path, default=scen / "streaming.cfg",
                   help="raw-streaming baseline scenario")
    w.add_argument("--format", choices=("text", "csv"), default="text", help="report format")
    w.add_argument("--output", type=Path, default=None, help="write the report here instead of stdout")
    w.set_defaults(func=cmd_sweep)

    t = sub.add_parser("tile", help="plan L1 tiling for every layer of a model", formatter_class=_Formatter,
                       description="Emits the per-layer plan CSV. Exits 3 naming the layer if any layer cannot fit.")
    t.add_argument("--model", type=Path, default=sio.DEFAULT_MODEL, help="EDGS model file")
    t.add_argument("--l1", type=int, default=None, help=f"L1 bytes (default: l1_bytes in --defaults, {dd.l1_bytes} in {cfgname})")
    t.add_argument("--l2", type=int, default=None, help=f"L2 bytes (default: l2_bytes in --defaults, {dd.l2_bytes} in {cfgname})")
    t.add_argument("--l3", type=int, default=None, help=f"L3 bytes (default: l3_bytes in --defaults, {dd.l3_bytes} in {cfgname})")
    t.add_argument("--depth", type=int, choices=(2, 3), default=None,
                   help=f"buffering depth (default: buffering_depth in --defaults, {dd.buffering_depth} in {cfgname})")
    t.add_argument("--defaults", type=Path, default=sio.DEFAULT_DEPLOY, help="deployment settings file")
    t.add_argument("--output", type=Path, default=None, help="write the plan CSV here instead of stdout")
    t.set_defaults(func=cmd_tile)

    d = sub.add_parser("detect", help="run the detection pipeline on a Bayer PGM", formatter_class=_Formatter,
                       description="demosaic, white balance, downscale, INT8 detector, decode, NMS. "
                                   "Prints the detections CSV and the occupancy count.")
    d.add_argument("--image", type=Path, required=True, help="8-bit binary PGM Bayer mosaic")
    d.add_argument("--model", type=Path, default=sio.DEFAULT_MODEL, help="EDGS model file")
    d.add_argument("--conf", type=float, default=None, help=f"confidence threshold (default: conf_threshold in --defaults, {dd.conf_threshold} in {cfgname})")
    d.add_argument("--iou", type=float, default=None, help=f"NMS IoU threshold (default: iou_threshold in --defaults, {dd.iou_threshold} in {cfgname})")
    d.add_argument("--pattern", choices=("RGGB", "BGGR", "GRBG", "GBRG"), default=None,
                   help=f"Bayer pattern (default: bayer_pattern in --defaults, {dd.bayer_pattern} in {cfgname})")
    d.add_argument("--frame-id", type=int, default=0, help="frame_id column value")
    d.add_argument("--defaults", type=Path, default=sio.DEFAULT_DEPLOY, help="deployment settings file")
    d.add_argument("--output", type=Path, default=None, help="write the detections CSV here instead of stdout")
    d.set_defaults(func=cmd_detect)

    r = sub.add_parser("report", help="headline energy figures for the shipped scenarios", formatter_class=_Formatter,
                       description="Per-sample energies, savings, average powers and lifetimes for the edge and "
                                   "streaming scenarios plus the end-to-end cycle; assumption-dependent values are flagged.")
    r.add_argument("--edge-scenario", type=Path, default=scen / "edge_192.cfg", help="edge-inference scenario")
    r.add_argument("--streaming-scenario", type=Path, default=scen / "streaming.cfg", help="raw-streaming scenario")
    r.add_argument("--end-to-end-scenario", type=Path, default=scen / "end_to_end.cfg", help="end-to-end scenario")
    r.add_argument("--duration", type=float, default=None,
                   help="end-to-end simulated horizon in seconds (default: the scenario's duration_s)")
    r.add_argument("--format", choices=("text", "csv"), default="text", help="output format")
    r.add_argument("--output", type=Path, default=None, help="write the report here instead of stdout")
    r.set_defaults(func=cmd_report)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InfeasibleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
