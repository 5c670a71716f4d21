import csv
import dataclasses
import json
import math

import numpy as np
import pytest

from wassbeam import cli, designs
from wassbeam.experiment import (
    CSV_HEADER,
    ConfigError,
    config_from_dict,
    load_config,
    run_design,
    run_sweep,
)

BASE = {
    "seed": 11,
    "snapshots": 20,
    "trials": 6,
    "scenario": {
        "n_sensors": 4,
        "mismatch_deg": 3.0,
        "desired": {"doa_deg": 0.0, "snr_db": 10.0},
        "interferers": [{"doa_deg": 40.0, "inr_db": 20.0}],
    },
    "methods": [
        {"name": "mvdr_smi", "label": "MVDR"},
        {"name": "wdro_norm", "label": "WDRO", "epsilon": "mismatch_bound"},
        {"name": "wdro_mahalanobis", "label": "WDRO-Q", "epsilon": 0.05},
        {"name": "diag_load", "label": "LSMI", "rho": 5.0},
        {"name": "wdro_joint", "label": "JOINT", "epsilon": 0.5, "rho": 5.0},
    ],
    "sweep": {"variable": "snr_db", "values": [0.0, 10.0]},
}

TOML = """
seed = 11
snapshots = 20
trials = 6

[scenario]
n_sensors = 4
mismatch_deg = 3.0

[scenario.desired]
doa_deg = 0.0
snr_db = 10.0

[[scenario.interferers]]
doa_deg = 40.0
inr_db = 20.0

[[methods]]
name = "mvdr_smi"
label = "MVDR"

[[methods]]
name = "wdro_norm"
label = "WDRO"
epsilon = "mismatch_bound"

[[methods]]
name = "wdro_norm"
label = "TOO-BIG"
epsilon = 5.0

[sweep]
variable = "snapshots"
values = [10, 40]
"""


@pytest.fixture
def config_path(tmp_path):
    path = tmp_path / "exp.toml"
    path.write_text(TOML)
    return path


def test_config_round_trip(config_path):
    cfg = load_config(config_path)
    assert cfg.seed == 11 and cfg.trials == 6
    assert cfg.scenario.presumed_doa == 3.0
    assert cfg.scenario.desired.power == pytest.approx(10.0)
    assert [m.label for m in cfg.methods] == ["MVDR", "WDRO", "TOO-BIG"]


@pytest.mark.parametrize(
    "patch",
    [
        {"methods": [{"name": "capon"}]},
        {"methods": [{"name": "wdro_norm"}]},
        {"methods": [{"name": "diag_load"}]},
        {"methods": []},
        {"methods": [{"name": "mvdr_smi"}, {"name": "mvdr_smi"}]},
        {"trials": 0},
        {"seed": -1},
        {"sweep": {"variable": "temperature", "values": [1]}},
        {"sweep": {"variable": "snr_db", "values": []}},
        {"scenario": {"desired": {"doa_deg": 95.0, "snr_db": 0.0}}},
        {"methods": [{"name": "wdro_norm", "epsilon": "huge"}]},
    ],
)
def test_bad_configs_raise_config_error(patch):
    with pytest.raises(ConfigError):
        config_from_dict({**BASE, **patch})


def test_design_statuses_and_fields():
    cfg = config_from_dict({**BASE, "methods": BASE["methods"] + [{"name": "wdro_norm", "label": "BIG", "epsilon": 9.0}]})
    doc = run_design(cfg)
    status = {m["label"]: m["status"] for m in doc["methods"]}
    assert status["BIG"] == "infeasible_radius"
    assert all(s == "optimal" for k, s in status.items() if k != "BIG")
    for m in doc["methods"]:
        if m["status"] == "optimal":
            assert m["distortionless"] >= 1 - 1e-8
            assert m["sinr_db"] <= doc["optimal_sinr_db"] + 1e-9


def test_sweep_is_independent_of_workers_and_trial_order():
    cfg = config_from_dict(BASE)
    serial = run_sweep(cfg)
    shuffled = run_sweep(cfg, trial_order=[5, 3, 0, 1, 4, 2])
    parallel = run_sweep(cfg, workers=2)
    assert serial == shuffled == parallel
    assert len(serial) == 2 * len(BASE["methods"])


def test_sweep_counts_infeasible_trials(config_path):
    rows = run_sweep(load_config(config_path))
    big = [r for r in rows if r[1] == "TOO-BIG"]
    assert all(r[5] == 6 and math.isnan(r[2]) for r in big)


def test_sweep_rejects_bad_trial_order():
    with pytest.raises(ValueError):
        run_sweep(config_from_dict(BASE), trial_order=[0, 0, 1, 2, 3, 4])


def test_cli_design_is_byte_identical(config_path, tmp_path, capsys):
    for name in ("a", "b"):
        assert cli.main(["design", "--config", str(config_path), "--out", str(tmp_path / name)]) == 0
    a = (tmp_path / "a" / "design.json").read_bytes()
    assert a == (tmp_path / "b" / "design.json").read_bytes()
    assert cli.main(["design", "--config", str(config_path), "--out", str(tmp_path / "c"), "--seed", "12"]) == 0
    assert a != (tmp_path / "c" / "design.json").read_bytes()


def test_cli_sweep_writes_csv_and_svg(config_path, tmp_path):
    out = tmp_path / "s"
    assert cli.main(["sweep", "--config", str(config_path), "--out", str(out), "--svg"]) == 0
    with open(out / "sweep.csv") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == CSV_HEADER
    assert len(rows) == 1 + 2 * 3
    assert (out / "sweep.svg").read_text().startswith("<svg")


def test_cli_beampattern(config_path, tmp_path):
    out = tmp_path / "d"
    cli.main(["design", "--config", str(config_path), "--out", str(out)])
    code = cli.main(["beampattern", "--design", str(out / "design.json"), "--grid=-60:60:1", "--method", "WDRO", "--svg"])
    assert code == 0
    with open(out / "beampattern_WDRO.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["angle_deg", "power_db"]
    power = np.array([float(r[1]) for r in rows[1:]])
    assert len(power) == 121 and power.max() == 0.0
    assert not (out / "beampattern_MVDR.csv").exists()
    assert (out / "beampattern.svg").exists()


@pytest.mark.parametrize(
    "argv",
    [
        ["beampattern", "--design", "/nonexistent/design.json"],
        ["design", "--config", "/nonexistent/exp.toml"],
    ],
)
def test_cli_missing_files_exit_2(argv):
    assert cli.main(argv) == 2


def test_cli_empty_grid_and_malformed_config_exit_2(config_path, tmp_path):
    out = tmp_path / "d"
    cli.main(["design", "--config", str(config_path), "--out", str(out)])
    assert cli.main(["beampattern", "--design", str(out / "design.json"), "--grid", "5:1:1"]) == 2
    bad = tmp_path / "bad.toml"
    bad.write_text("seed = [")
    assert cli.main(["design", "--config", str(bad)]) == 2


def test_cli_usage_errors_exit_2(config_path):
    with pytest.raises(SystemExit) as exc:
        cli.main(["frobnicate"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        cli.main(["design", "--config", str(config_path), "--seed", "-3"])
    assert exc.value.code == 2


def test_sweep_without_sweep_table_exits_2(tmp_path):
    path = tmp_path / "x.toml"
    path.write_text('[[methods]]\nname = "mvdr_smi"\n')
    assert cli.main(["sweep", "--config", str(path), "--out", str(tmp_path)]) == 2


def test_parse_grid():
    np.testing.assert_allclose(cli.parse_grid("-1:1:0.5"), [-1, -0.5, 0, 0.5, 1])
    np.testing.assert_allclose(cli.parse_grid("3, 7"), [3, 7])
    with pytest.raises(ConfigError):
        cli.parse_grid("0:90:1")


def test_verify_passes(capsys):
    assert cli.main(["verify", "--level", "fast"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines and all(json.loads(l)["passed"] for l in lines)


def test_verify_detects_corrupted_solver(monkeypatch, capsys):
    real = designs.solve_cone

    def corrupted(problem, tol=designs.DEFAULT_TOL):
        report = real(problem, tol)
        return dataclasses.replace(report, x_opt=1.01 * report.x_opt)

    monkeypatch.setattr(designs, "solve_cone", corrupted)
    assert cli.main(["verify", "--level", "fast"]) == 1
    failed = [json.loads(l) for l in capsys.readouterr().out.splitlines() if '"passed": false' in l]
    assert any("constraint activity" in f["description"] for f in failed)
