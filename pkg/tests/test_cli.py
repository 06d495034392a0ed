import subprocess
import sys

import pytest

from edgenode.cli import EXIT_INFEASIBLE, EXIT_INPUT, EXIT_OK, build_parser, main
from edgenode.scenario_io import (
    DEFAULT_CALIBRATION,
    FIXTURE_DIR,
    MODEL_DIR,
    SCENARIO_DIR,
    load_detections,
    load_trace,
    parse_report,
)
from oracles import trace_integral_mj


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def kv(out):
    return dict(line.split(": ", 1) for line in out.splitlines())


# simulate

def test_simulate_default(capsys):
    code, out, _ = run(capsys, "simulate", "--duration", "600")
    assert code == EXIT_OK
    d = kv(out)
    assert float(d["cycle_energy_mj"]) == pytest.approx(929, rel=0.03)
    assert float(d["average_power_mw"]) == pytest.approx(15.5, rel=0.03)
    assert float(d["lifetime_h"]) == pytest.approx(143, rel=0.03)
    assert d["assumptions"] == "sensor_suite"


def test_simulate_trace_integral(capsys, tmp_path):
    trace = tmp_path / "t.csv"
    code, out, _ = run(capsys, "simulate", "--duration", "300", "--trace", str(trace))
    assert code == EXIT_OK
    events = load_trace(trace.read_text()).events
    assert trace_integral_mj(events) == pytest.approx(float(kv(out)["total_mj"]), rel=1e-6)


def test_simulate_occupancy_override(capsys, tmp_path):
    occ = tmp_path / "o.csv"
    occ.write_text("t_s,count\n0,0\n")
    code, out, _ = run(capsys, "simulate", "--scenario", str(SCENARIO_DIR / "adaptive_iaq.cfg"),
                       "--duration", "3600", "--occupancy", str(occ))
    assert code == EXIT_OK
    vacant = float(kv(out)["energy_mj[sensor:suite]"])
    code, out, _ = run(capsys, "simulate", "--scenario", str(SCENARIO_DIR / "end_to_end.cfg"), "--duration", "3600")
    assert vacant < float(kv(out)["energy_mj[sensor:suite]"])


def test_simulate_bad_inputs(capsys, tmp_path):
    code, _, err = run(capsys, "simulate", "--scenario", str(tmp_path / "missing.cfg"))
    assert code == EXIT_INPUT and "error:" in err
    bad = tmp_path / "bad.cfg"
    bad.write_text("mode = idle\nwat = 3\n")
    code, _, err = run(capsys, "simulate", "--scenario", str(bad))
    assert code == EXIT_INPUT and "bad.cfg:2" in err


def test_simulate_overrun_is_input_error(capsys, tmp_path):
    cfg = tmp_path / "fast.cfg"
    cfg.write_text("mode = edge-inference\nresolution = 512\ncamera_interval_s = 0.1\n")
    code, _, err = run(capsys, "simulate", "--scenario", str(cfg), "--duration", "5")
    assert code == EXIT_INPUT and "camera" in err


# sweep

def test_sweep_csv(capsys):
    code, out, _ = run(capsys, "sweep", "--format", "csv")
    assert code == EXIT_OK
    rep = parse_report(out)
    assert len(rep.rows) == 8
    assert rep.best.resolution == 192
    assert 13.0 <= rep.best.efficiency_pp_per_mj <= 13.8
    assert float(rep.meta("savings_pct")) == pytest.approx(42, abs=1)
    assert next(r for r in rep.rows if r.resolution == 192).lifetime_days > 40


def test_sweep_text_savings_line(capsys):
    code, out, _ = run(capsys, "sweep")
    assert code == EXIT_OK
    line = out.splitlines()[-1]
    assert line.startswith("savings at 192x192 vs raw streaming:")
    pct = float(line.split(":")[1].split("%")[0])
    assert pct == pytest.approx(42, abs=1)


def test_sweep_streaming(capsys):
    code, out, _ = run(capsys, "sweep", "--mode", "streaming", "--format", "csv")
    assert code == EXIT_OK
    rows = parse_report(out).rows
    assert all(r.lifetime_days == pytest.approx(24, abs=1) for r in rows)
    assert all(r.assumption for r in rows)


def test_sweep_single_row(capsys, tmp_path):
    lines = DEFAULT_CALIBRATION.read_text().splitlines()
    one = tmp_path / "one.csv"
    one.write_text("\n".join([lines[0], lines[-1]]) + "\n")
    code, out, _ = run(capsys, "sweep", "--calibration", str(one), "--format", "csv")
    assert code == EXIT_OK
    rep = parse_report(out)
    assert len(rep.rows) == 1 and rep.best is rep.rows[0]


def test_sweep_output_file(capsys, tmp_path):
    dest = tmp_path / "r.csv"
    code, out, _ = run(capsys, "sweep", "--format", "csv", "--output", str(dest))
    assert code == EXIT_OK and out == ""
    assert parse_report(dest.read_bytes()).best.resolution == 192


def test_sweep_corrupt_table(capsys, tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("")
    code, _, err = run(capsys, "sweep", "--calibration", str(bad))
    assert code == EXIT_INPUT and "bad.csv" in err


# tile

def _plan(out):
    lines = out.splitlines()
    header = lines[0].split(",")
    return [dict(zip(header, l.split(","))) for l in lines[1:]]


def test_tile_default(capsys):
    code, out, err = run(capsys, "tile")
    assert code == EXIT_OK
    rows = _plan(out)
    assert len(rows) == 10
    assert all(int(r["working_set_bytes"]) <= 131072 for r in rows)
    assert "depth=3" in err


def test_tile_depth_two_same_traffic(capsys):
    _, out3, _ = run(capsys, "tile", "--depth", "3")
    _, out2, _ = run(capsys, "tile", "--depth", "2")
    cols = lambda out: [(r["layer"], r["dma_in"], r["dma_out"]) for r in _plan(out)]  # noqa: E731
    assert cols(out2) == cols(out3)


def test_tile_infeasible(capsys):
    code, out, err = run(capsys, "tile", "--l1", "4096")
    assert code == EXIT_INFEASIBLE
    assert "infeasible" in err and "04_down4" in err


def test_tile_bad_model(capsys, tmp_path):
    bad = tmp_path / "m.edgs"
    bad.write_bytes(b"nope")
    code, _, err = run(capsys, "tile", "--model", str(bad))
    assert code == EXIT_INPUT and "magic" in err


# detect

def test_detect_planted(capsys):
    code, out, _ = run(capsys, "detect", "--image", str(FIXTURE_DIR / "planted.pgm"),
                       "--model", str(MODEL_DIR / "planted_64.edgs"))
    assert code == EXIT_OK
    assert out.splitlines()[-1] == "# occupancy_count=3"
    assert len(load_detections(out)) == 3


def test_detect_black(capsys):
    code, out, _ = run(capsys, "detect", "--image", str(FIXTURE_DIR / "black.pgm"))
    assert code == EXIT_OK
    assert load_detections(out) == []
    assert out.splitlines()[-1] == "# occupancy_count=0"


def test_detect_errors(capsys, tmp_path):
    code, _, _ = run(capsys, "detect", "--image", str(tmp_path / "none.pgm"))
    assert code == EXIT_INPUT
    odd = tmp_path / "odd.pgm"
    odd.write_bytes(b"P5\n3 3\n255\n" + bytes(9))
    code, _, _ = run(capsys, "detect", "--image", str(odd))
    assert code == EXIT_INPUT
    code, _, _ = run(capsys, "detect", "--image", str(FIXTURE_DIR / "black.pgm"), "--conf", "1.5")
    assert code == EXIT_INPUT


def test_detect_frame_id(capsys):
    _, out, _ = run(capsys, "detect", "--image", str(FIXTURE_DIR / "planted.pgm"),
                    "--model", str(MODEL_DIR / "planted_64.edgs"), "--frame-id", "7")
    assert {fid for fid, _ in load_detections(out)} == {7}


# report

def test_report(capsys):
    code, out, _ = run(capsys, "report", "--format", "csv", "--duration", "600")
    assert code == EXIT_OK
    lines = out.splitlines()
    assert lines[0] == "metric,value,assumptions"
    vals = {l.split(",")[0]: float(l.split(",")[1]) for l in lines[1:]}
    assert vals["best_efficiency_resolution"] == 192
    assert vals["savings_pct"] == pytest.approx(42, abs=1)
    assert vals["edge_avg_power_mw"] == pytest.approx(2.29, rel=0.03)
    assert vals["streaming_avg_power_mw"] == pytest.approx(3.93, rel=0.03)


# cross-cutting

DETERMINISTIC = [
    ["sweep", "--format", "csv"],
    ["sweep"],
    ["tile"],
    ["simulate", "--duration", "300"],
    ["report", "--duration", "300"],
    ["detect", "--image", str(FIXTURE_DIR / "scene_640x480.pgm")],
]


@pytest.mark.parametrize("argv", DETERMINISTIC, ids=lambda a: a[0])
def test_byte_identical_reruns(argv):
    cmd = [sys.executable, "-m", "edgenode", *argv]
    a = subprocess.run(cmd, capture_output=True, check=True)
    b = subprocess.run(cmd, capture_output=True, check=True)
    assert a.stdout == b.stdout and a.stdout


def test_help_documents_every_flag():
    parser = build_parser()
    sub = next(a for a in parser._actions if a.__class__.__name__ == "_SubParsersAction")
    assert set(sub.choices) == {"simulate", "sweep", "tile", "detect", "report"}
    for name, p in sub.choices.items():
        text = p.format_help()
        for action in p._actions:
            for flag in action.option_strings:
                assert flag in text, (name, flag)
            if action.option_strings and action.dest != "help":
                assert action.help, (name, action.dest)
                shown = p.formatter_class(prog=name)._get_help_string(action)
                if action.default is not None and not action.required:
                    assert "default" in shown, (name, action.dest)


def test_no_subcommand(capsys):
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code != 0
