import json

import pytest

from harvestsim import __version__
from harvestsim.cli import main, preset_path
from harvestsim.io import file_sha256, read_csv


def test_table1(capsys):
    assert main(["table1"]) == 0
    out = capsys.readouterr().out
    assert len(out.splitlines()) == 5 and "kW/kg" in out


def test_validate_presets(capsys):
    assert main(["validate", "fig7", "fig8", "mems_resonant"]) == 0
    assert capsys.readouterr().out.count(": ok") == 3


def test_run_writes_traces_summary_and_manifest(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["run", "fig8", "--duration", "0.05", "--out", str(out)]) == 0
    traces = read_csv(out / "traces.csv")
    # the preset's outputs list picks the columns
    assert list(traces) == ["time_s", "position_m", "emf_v", "doubler_voltage_v",
                            "stored_energy_j"]
    assert len(traces["time_s"]) == 5001
    summary = (out / "summary.txt").read_text()
    assert "audit residual" in summary and summary == capsys.readouterr().out
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["scenario_sha256"] == file_sha256(preset_path("fig8"))
    assert manifest["solver"]["duration_s"] == 0.05
    assert manifest["artifact_version"] == __version__


def test_run_from_a_file_path(tmp_path):
    src = tmp_path / "mine.scenario"
    src.write_text(preset_path("mems_resonant").read_text())
    assert main(["run", str(src), "--duration", "0.002", "--out", str(tmp_path / "o"),
                 "--seed", "5"]) == 0
    manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert manifest["seed"] == 5 and manifest["scenario"] == str(src)


def test_oversized_step_is_rejected_before_solving(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["run", "mems_resonant", "--dt", "1e-3", "--out", str(out)]) == 1
    err = capsys.readouterr().err
    assert err.startswith("error: dt=0.001") and len(err.strip().splitlines()) == 1
    assert not (out / "traces.csv").exists()


@pytest.mark.parametrize("argv, fragment", [
    (["run", "no_such_preset"], "no preset named"),
    (["run", "missing/dir/x.scenario"], "not found"),
    (["sweep", "table1_vibration_200hz", "--param", "load.resistence_ohm", "--values", "1"],
     "cannot resolve"),
    (["analyze", "fig8"], "spring-mass"),
])
def test_errors_exit_nonzero_with_one_line(argv, fragment, capsys, tmp_path):
    assert main(argv + (["--out", str(tmp_path)] if argv[0] in ("run", "sweep") else [])) == 1
    err = capsys.readouterr().err
    assert err.startswith("error: ") and fragment in err
    assert len(err.strip().splitlines()) == 1


def test_invalid_scenario_file(tmp_path, capsys):
    bad = tmp_path / "bad.scenario"
    bad.write_text("version: 1\nname: x\n")
    assert main(["validate", str(bad)]) == 1
    err = capsys.readouterr().err
    assert "invalid scenario" in err and "mechanical" in err and "solver" in err


def test_sweep_writes_a_table(tmp_path, capsys):
    out = tmp_path / "s"
    assert main(["sweep", "table1_vibration_200hz", "--param", "load.resistance_ohm",
                 "--range", "50", "500", "3", "--log", "--out", str(out)]) == 0
    table = read_csv(out / "sweep.csv")
    assert list(table) == ["load.resistance_ohm", "average_power_w", "peak_displacement_m",
                           "stored_energy_j"]
    assert table["load.resistance_ohm"] == pytest.approx([50.0, 158.113883, 500.0])
    assert len(capsys.readouterr().out.splitlines()) == 3


def test_analyze(capsys):
    assert main(["analyze", "table1_vibration_1khz", "--z-max", "1e-9"]) == 0
    out = capsys.readouterr().out
    assert "displacement_limited" in out and "displacement bound" in out
    assert main(["analyze", "mems_resonant", "--paper-literal"]) == 0
    assert "paper literal" in capsys.readouterr().out


def test_version(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--version"])
    assert info.value.code == 0 and __version__ in capsys.readouterr().out
