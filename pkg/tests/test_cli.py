from __future__ import annotations

import json

import numpy as np
import pytest

from fbqkd.cli import main, synthetic_jsi
from fbqkd.spectrum import allocate_channels, load_jsi
from fbqkd.timetag import TimetagStream, write_timetags

SMALL_SWEEP = """
[sweep]
power_min_mw = 3.0
power_max_mw = 4.0
power_step_mw = 0.5
window_min_ps = 200.0
window_max_ps = 300.0
window_step_ps = 50.0
"""


def test_simulate_default_run(tmp_path, capsys):
    rc = main(["simulate", "--output", str(tmp_path), "--no-figures"])
    out = capsys.readouterr().out
    assert rc == 0
    assert "secure           : yes" in out
    for name in (
        "simulate_report.csv",
        "simulate_matrix_z.csv",
        "simulate_matrix_x.csv",
        "simulate_config.ini",
    ):
        assert (tmp_path / name).exists()
    body = (tmp_path / "simulate_report.csv").read_text()
    assert body.splitlines()[0].startswith("dimension,")


def test_simulate_echo_reproduces_run(tmp_path, capsys):
    first = tmp_path / "a"
    second = tmp_path / "b"
    assert main(["simulate", "--output", str(first)]) == 0
    echo = first / "simulate_config.ini"
    assert main(["simulate", "-c", str(echo), "--output", str(second)]) == 0
    capsys.readouterr()
    assert (second / "simulate_report.csv").read_bytes() == (
        first / "simulate_report.csv"
    ).read_bytes()
    # the second echo differs only in its output directory line
    diff = [
        (a, b)
        for a, b in zip(
            echo.read_text().splitlines(),
            (second / "simulate_config.ini").read_text().splitlines(),
        )
        if a != b
    ]
    assert all(a.startswith("directory") for a, _ in diff)


def test_simulate_json_output(tmp_path, capsys):
    rc = main(
        ["simulate", "--output", str(tmp_path), "--format", "json",
         "--no-figures"]
    )
    capsys.readouterr()
    assert rc == 0
    payload = json.loads((tmp_path / "simulate.json").read_text())
    assert payload["schema_version"] == 1
    assert payload["report"]["secure"] is True
    assert len(payload["matrix_z_counts"]) == 3


def test_simulate_insecure_returns_domain_error(tmp_path, capsys):
    cfg = tmp_path / "noisy.ini"
    cfg.write_text("[apparatus]\ndark_count_rate_hz = 1e9\n")
    rc = main(
        ["simulate", "-c", str(cfg), "--output", str(tmp_path / "out")]
    )
    out = capsys.readouterr().out
    assert rc == 1
    assert "secure           : no" in out


def test_config_errors_are_usage_errors(tmp_path, capsys):
    rc = main(["simulate", "-c", "/does/not/exist.ini"])
    assert rc == 2
    bad = tmp_path / "bad.ini"
    bad.write_text("[link]\nwavelength = 1550\n")
    assert main(["simulate", "-c", str(bad)]) == 2
    assert "config error" in capsys.readouterr().err


def test_sweep_csv_outputs_are_deterministic(tmp_path, capsys):
    cfg = tmp_path / "run.ini"
    cfg.write_text(SMALL_SWEEP)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["sweep", "-c", str(cfg), "--output", str(a),
                 "--no-figures"]) == 0
    assert main(["sweep", "-c", str(cfg), "--output", str(b),
                 "--no-figures"]) == 0
    out = capsys.readouterr().out
    assert "optimum" in out
    assert (a / "sweep_grid.csv").read_bytes() == (b / "sweep_grid.csv").read_bytes()
    assert (a / "sweep_optimum.csv").exists()
    assert not (a / "sweep_map.png").exists()


def test_sweep_renders_figure_by_default(tmp_path, capsys):
    cfg = tmp_path / "run.ini"
    cfg.write_text(SMALL_SWEEP)
    assert main(["sweep", "-c", str(cfg), "--output", str(tmp_path)]) == 0
    capsys.readouterr()
    assert (tmp_path / "sweep_map.png").stat().st_size > 0


def test_range_scan_command(tmp_path, capsys):
    cfg = tmp_path / "run.ini"
    cfg.write_text(
        SMALL_SWEEP
        + """
[range]
alpha_min_db = 0.0
alpha_max_db = 20.0
alpha_step_db = 5.0
dimensions = 2, 3
"""
    )
    rc = main(["range", "-c", str(cfg), "--output", str(tmp_path),
               "--no-figures"])
    out = capsys.readouterr().out
    assert rc == 0
    assert "extinction" in out
    curves = (tmp_path / "range_curves.csv").read_text().splitlines()
    assert curves[0] == (
        "dimension,attenuation_db,power_mw,window_ps,skr_bits_per_s,"
        "qber_z_fraction,qber_x_fraction"
    )
    assert len(curves) == 1 + 2 * 5  # two dimensions, five attenuation points
    assert (tmp_path / "range_landmarks.csv").exists()


def test_plan_uses_packaged_fixture(tmp_path, capsys):
    rc = main(["plan", "--output", str(tmp_path), "--no-figures"])
    out = capsys.readouterr().out
    assert rc == 0
    assert "21 channels of width 3 above 1000 Hz" in out
    channels = (tmp_path / "plan_channels.csv").read_text().splitlines()
    assert len(channels) == 22
    assert channels[0].startswith("channel_index,center_mode,")


def test_plan_width_two(tmp_path, capsys):
    rc = main(
        ["plan", "--width", "2", "--floor", "500", "--output", str(tmp_path),
         "--no-figures"]
    )
    out = capsys.readouterr().out
    assert rc == 0
    assert "38 channels of width 2 above 500 Hz" in out


def test_plan_missing_table_is_usage_error(tmp_path, capsys):
    rc = main(["plan", str(tmp_path / "missing.tsv"), "--no-figures"])
    assert rc == 2
    assert "error" in capsys.readouterr().err


def test_plan_floor_above_everything_is_domain_error(tmp_path, capsys):
    rc = main(
        ["plan", "--floor", "1e9", "--output", str(tmp_path), "--no-figures"]
    )
    out = capsys.readouterr().out
    assert rc == 1
    assert "0 channels" in out


def test_gen_jsi_then_plan_chain(tmp_path, capsys):
    rc = main(["gen-jsi", "--jitter", "0.03", "--output", str(tmp_path)])
    assert rc == 0
    capsys.readouterr()
    table = tmp_path / "jsi.tsv"
    records = load_jsi(table)
    assert len(records) == 80
    # jitter must not move any mode across the plan tiers
    assert len(allocate_channels(records, 3, 1000.0)) == 21
    assert len(allocate_channels(records, 2, 500.0)) == 38
    rc = main(["plan", str(table), "--output", str(tmp_path), "--no-figures"])
    assert rc == 0
    assert "21 channels" in capsys.readouterr().out


def test_gen_jsi_jitter_bounds(capsys):
    assert main(["gen-jsi", "--jitter", "0.2", "--output", "/tmp/unused"]) == 2
    assert "error" in capsys.readouterr().err


def test_synthetic_jsi_determinism():
    a = synthetic_jsi(jitter=0.05, seed=3)
    b = synthetic_jsi(jitter=0.05, seed=3)
    assert a == b
    c = synthetic_jsi(jitter=0.05, seed=4)
    assert a != c
    flat = synthetic_jsi()
    assert len(flat) == 80
    with pytest.raises(ValueError):
        synthetic_jsi(jitter=-0.01)


def test_mubs_prints_amplitude_table(capsys):
    assert main(["mubs", "-d", "3"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 7  # header + 2 bases x 3 outcomes
    assert lines[0].split()[:2] == ["basis", "outcome"]
    # X rows carry the 1/sqrt(3) amplitude magnitude
    assert "0.577350" in lines[4]


def test_mubs_writes_csv_when_asked(tmp_path, capsys):
    assert main(["mubs", "-d", "2", "--output", str(tmp_path)]) == 0
    capsys.readouterr()
    body = (tmp_path / "mubs.csv").read_text().splitlines()
    assert body[0] == "basis,outcome,amplitude_0,amplitude_1"
    assert len(body) == 5
    assert (tmp_path / "mubs_config.ini").exists()


def test_gen_timetags_then_ingest(tmp_path, capsys):
    gen_dir = tmp_path / "gen"
    cfg = tmp_path / "run.ini"
    cfg.write_text("[link]\nintegration_time_s = 0.5\n")
    rc = main(
        ["gen-timetags", "-c", str(cfg), "--output", str(gen_dir),
         "--seed", "12345"]
    )
    assert rc == 0
    out = capsys.readouterr().out
    assert "events over 0.5 s" in out
    tags = gen_dir / "timetags.bin"
    ingest_dir = tmp_path / "ingest"
    rc = main(
        ["ingest", str(tags), "--output", str(ingest_dir), "--no-figures"]
    )
    out = capsys.readouterr().out
    assert rc == 0
    assert "secure           : yes" in out
    report = (ingest_dir / "ingest_report.csv").read_text().splitlines()
    header = report[0].split(",")
    values = report[1].split(",")
    row = dict(zip(header, values))
    assert row["dimension"] == "3"
    assert 0.0 < float(row["qber_z_fraction"]) < 0.15
    assert float(row["skr_bits_per_s"]) > 0.0
    assert (ingest_dir / "ingest_matrix_z.csv").exists()


def test_ingest_with_histogram_fit(tmp_path, capsys):
    gen_dir = tmp_path / "gen"
    assert main(
        ["gen-timetags", "--duration", "0.3", "--output", str(gen_dir),
         "--seed", "777"]
    ) == 0
    capsys.readouterr()
    out_dir = tmp_path / "out"
    rc = main(
        ["ingest", str(gen_dir / "timetags.bin"), "--fit-histogram",
         "--output", str(out_dir), "--no-figures"]
    )
    capsys.readouterr()
    assert rc == 0
    hist = (out_dir / "ingest_histogram.csv").read_text().splitlines()
    assert hist[0].startswith("delay_ps,")
    assert len(hist) == 301  # 2*1500/10 bins


def test_ingest_no_coincidences_is_domain_error(tmp_path, capsys):
    lonely = TimetagStream(
        np.zeros(1, np.uint8), np.zeros(1, np.int64), 2, 1.0
    )
    path = tmp_path / "lonely.bin"
    write_timetags(lonely, path)
    rc = main(["ingest", str(path), "--output", str(tmp_path), "--no-figures"])
    err = capsys.readouterr().err
    assert rc == 1
    assert "no coincidences" in err


def test_ingest_missing_file_is_usage_error(tmp_path, capsys):
    rc = main(
        ["ingest", str(tmp_path / "absent.bin"), "--output", str(tmp_path)]
    )
    assert rc == 2
    assert "error" in capsys.readouterr().err


def test_text_timetag_format(tmp_path, capsys):
    gen_dir = tmp_path / "gen"
    rc = main(
        ["gen-timetags", "--duration", "0.05", "--timetag-format", "text",
         "--output", str(gen_dir), "--seed", "31"]
    )
    capsys.readouterr()
    assert rc == 0
    tags = gen_dir / "timetags.txt"
    assert tags.exists()
    first = tags.read_text().splitlines()[0]
    assert first.startswith("# fbqkd-timetags")
