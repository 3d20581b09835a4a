"""TOML scenario configs and the command-line entry point."""
import json
import math

import numpy as np
import pytest

from timebin import cli
from timebin.config import (
    ConfigError,
    ScenarioConfig,
    load_config,
    parse_config,
    resolved_toml,
)

PAIR_TOML = """
[source]
type = "wavepacket"
amplitudes = [[0.7071067811865476, 0.0], [0.0, 0.0], [0.0, 0.0], [0.7071067811865476, 0.0]]

[grid]
quad_points_per_bin = 80

[phases]
phi_b = {start = 0.0, stop = 6.283185307179586, count = 8}
phi_x = {start = 0.0, stop = 6.283185307179586, count = 8}
"""

SINGLE_TOML = """
[source]
type = "wavepacket"
amplitudes = [[0.7071067811865476, 0.0], [0.7071067811865476, 0.0]]
"""


# ---------------------------------------------------------------------------
# parsing and round trips


def test_parse_defaults():
    cfg = parse_config("")
    assert cfg.source_type == "lindblad"
    assert cfg.bin_separation == 10.0
    assert len(cfg.phi_scan) == 12
    assert cfg.seed == 0


def test_parse_pair_config():
    cfg = parse_config(PAIR_TOML)
    assert cfg.source_type == "wavepacket"
    assert cfg.amplitudes[0] == pytest.approx(1 / math.sqrt(2))
    assert len(cfg.phi_b_scan) == 8
    assert cfg.quad_points_per_bin == 80
    state = cfg.build_pair_source()
    assert state.amplitudes[3] == pytest.approx(1 / math.sqrt(2))


def test_resolved_round_trip():
    cfg = parse_config(PAIR_TOML)
    assert parse_config(resolved_toml(cfg)) == cfg
    # also for a pulsed emitter scenario
    pulsed = parse_config("""
[source]
type = "lindblad"
initial_state = "G"
[[source.pulses]]
center = 0.3
area = 1.5707963267948966
width = 0.05
envelope = "gaussian"
target = "GB"
""")
    assert len(pulsed.pulses) == 1
    assert parse_config(resolved_toml(pulsed)) == pulsed


def test_amplitude_renormalization_warns():
    with pytest.warns(UserWarning, match="renormalized"):
        cfg = parse_config("""
[source]
type = "wavepacket"
amplitudes = [[2.0, 0.0], [0.0, 0.0], [0.0, 0.0], [2.0, 0.0]]
""")
    assert sum(abs(a) ** 2 for a in cfg.amplitudes) == pytest.approx(1.0)


def test_config_errors_name_the_field():
    cases = [
        ("[source]\ntype = 'laser'", "source.type"),
        ("[source]\ngamma_b = -1.0", "gamma_b"),
        ("[grid]\ngrid_density = 0", "grid_density"),
        ("[grid]\nresolution = -2.0", "resolution"),
        ("[outputs]\nseed = 'abc'", "seed"),
        ("[phases]\nphi = 3.0", "phi"),
        ("[source]\nunknown_knob = 1", "unknown_knob"),
        ("[source]\ntype = 'wavepacket'", "amplitudes"),
        ("[source]\ntype = 'wavepacket'\namplitudes = [[0.0,0.0],[0.0,0.0]]", "amplitudes"),
    ]
    for text, field in cases:
        with pytest.raises(ConfigError, match=field):
            parse_config(text)


def test_invalid_toml_reports_line():
    with pytest.raises(ConfigError, match="line"):
        parse_config("[source\ntype = 3")


def test_scenario_validation_direct():
    with pytest.raises(ConfigError):
        ScenarioConfig(source_type="other")
    with pytest.raises(ConfigError):
        ScenarioConfig(bin_separation=-1.0)
    with pytest.raises(ConfigError):
        ScenarioConfig(threads=0)
    with pytest.raises(ConfigError):
        ScenarioConfig(outputs=("rho2q.json", "bogus.csv"))


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="read"):
        load_config(tmp_path / "absent.toml")


# ---------------------------------------------------------------------------
# CLI runs


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_cli_pair_run_and_determinism(tmp_path):
    cfg = _write(tmp_path, "pair.toml", PAIR_TOML)
    out1, out2 = tmp_path / "run1", tmp_path / "run2"
    assert cli.main(["pair", "--config", str(cfg), "--out", str(out1)]) == 0
    assert cli.main(["pair", "--config", str(cfg), "--out", str(out2)]) == 0
    names = [
        "rho2q.json", "stokes.csv", "peaks3x3.csv", "center_scan.csv",
        "concurrence.json", "histogram.csv", "projection.csv",
        "resolved_config.toml", "report.txt",
    ]
    for name in names:
        a, b = out1 / name, out2 / name
        assert a.is_file(), name
        assert a.read_bytes() == b.read_bytes(), name

    conc = json.loads((out1 / "concurrence.json").read_text())
    assert conc["concurrence"] == pytest.approx(1.0, abs=1e-2)
    assert conc["center_visibility"] == pytest.approx(1.0, abs=1e-2)
    rho = json.loads((out1 / "rho2q.json").read_text())
    ee = rho["entries"][0][0]
    assert ee[0] == pytest.approx(0.5, abs=5e-3) and ee[1] == 0.0


def test_cli_single_run(tmp_path):
    cfg = _write(tmp_path, "single.toml", SINGLE_TOML)
    out = tmp_path / "single_out"
    assert cli.main(["single", "--config", str(cfg), "--out", str(out)]) == 0
    vis = json.loads((out / "visibility.json").read_text())
    assert vis["visibility"] == pytest.approx(1.0, abs=1e-3)
    peaks = (out / "peaks.csv").read_text().splitlines()
    assert peaks[0] == "phase,early,middle,late"
    assert len(peaks) == 1 + 12  # default scan
    rho = json.loads((out / "rho1q.json").read_text())
    assert abs(complex(*rho["entries"][0][1])) == pytest.approx(0.5, abs=1e-3)


def test_cli_single_emitter_two_pulse(tmp_path):
    cfg = _write(tmp_path, "emitter.toml", """
[source]
type = "lindblad"
initial_state = "G"

[grid]
grid_density = 300
quad_points_per_bin = 40

[[source.pulses]]
center = 0.3
area = 0.7853981633974483
width = 0.05
envelope = "gaussian"
target = "GX"

[[source.pulses]]
center = 10.3
area = 0.7853981633974483
width = 0.05
envelope = "gaussian"
target = "GX"
""")
    out = tmp_path / "emitter_out"
    assert cli.main(["single", "--config", str(cfg), "--out", str(out)]) == 0
    vis = json.loads((out / "visibility.json").read_text())
    assert 0.0 < vis["visibility"] <= 1.0


def test_cli_config_error_exit_2(tmp_path, capsys):
    cfg = _write(tmp_path, "bad.toml", "[source]\ngamma_x = -2.0\n")
    code = cli.main(["pair", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert code == 2
    assert "gamma_x" in capsys.readouterr().err


def test_cli_missing_config_exit_2(tmp_path, capsys):
    assert cli.main(["pair", "--out", str(tmp_path)]) == 2
    assert "--config" in capsys.readouterr().err


def test_cli_verify(tmp_path, capsys):
    out = tmp_path / "verify_out"
    assert cli.main(["verify", "--out", str(out)]) == 0
    stdout = capsys.readouterr().out
    assert "PASS" in stdout and "FAIL" not in stdout
    report = json.loads((out / "verify.json").read_text())
    assert all(c["passed"] for c in report["checks"])
    assert len(report["checks"]) >= 8


def test_cli_resolution_override(tmp_path):
    cfg = _write(tmp_path, "pair.toml", PAIR_TOML)
    out = tmp_path / "res_out"
    code = cli.main(["pair", "--config", str(cfg), "--out", str(out),
                     "--resolution", "0.5"])
    assert code == 0
    resolved = (out / "resolved_config.toml").read_text()
    assert "resolution = 0.5" in resolved
    # histogram grid now has 3T/0.5 = 60 columns
    hist = (out / "histogram.csv").read_text().splitlines()
    assert len(hist[0].split(",")) == 1 + 60
    with pytest.raises(SystemExit):  # argparse rejects non-numeric
        cli.main(["pair", "--config", str(cfg), "--resolution", "abc"])
    assert cli.main(["pair", "--config", str(cfg), "--out", str(out),
                     "--resolution", "-1"]) == 2


def test_cli_bad_env_threads(tmp_path, monkeypatch, capsys):
    cfg = _write(tmp_path, "single.toml", SINGLE_TOML)
    monkeypatch.setenv("TIMEBIN_THREADS", "many")
    code = cli.main(["single", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert code == 2
    assert "TIMEBIN_THREADS" in capsys.readouterr().err


def test_cli_output_filtering(tmp_path):
    cfg = _write(tmp_path, "filtered.toml", PAIR_TOML + """
[outputs]
files = ["rho2q.json", "concurrence.json"]
""")
    out = tmp_path / "filtered_out"
    assert cli.main(["pair", "--config", str(cfg), "--out", str(out)]) == 0
    assert (out / "rho2q.json").is_file()
    assert (out / "concurrence.json").is_file()
    assert not (out / "histogram.csv").exists()
    assert not (out / "stokes.csv").exists()
