import json
import subprocess
import sys

import pytest

from iidcast import cli, harness


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_bounds_csv(capsys):
    code, out, _ = run(capsys, "bounds", "--n", "10", "--alpha", "1")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == ",".join(harness.CSV_COLUMNS)
    assert {line.split(",")[3] for line in lines[1:]} == {"capacity_bound", "delay_bound"}


def test_flood_json_has_oracle(capsys):
    code, out, _ = run(capsys, "flood", "--n", "2", "--alpha", "1", "--trials", "4000", "--json",
                       "--seed", "3")
    assert code == 0
    rec = json.loads(out)[0]
    assert list(rec) == list(harness.CSV_COLUMNS)
    assert rec["oracle"] == pytest.approx(2.0) and abs(rec["zscore"]) < 4 and rec["seed"] == 3


def test_out_file_and_determinism(capsys, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (a, b):
        assert run(capsys, "flood", "--n", "12", "--alpha", "1.2", "--trials", "300",
                   "--out", str(path))[0] == 0
    assert a.read_text() == b.read_text()
    assert a.read_text().startswith("n,alpha,c,metric")


def test_config_file_supplies_network(capsys, tmp_path):
    ini = tmp_path / "run.ini"
    ini.write_text("[network]\nn = 8\nalpha = 1.0\n")
    code, out, _ = run(capsys, "flood", "--config", str(ini), "--trials", "100")
    assert code == 0 and out.splitlines()[1].startswith("8,1.0,")
    # flags override the file
    code, out, _ = run(capsys, "flood", "--config", str(ini), "--n", "9", "--trials", "100")
    assert out.splitlines()[1].startswith("9,1.0,")


@pytest.mark.parametrize("argv", [
    ["flood", "--n", "10", "--alpha", "1", "--bogus"],
    ["nosuch"],
    [],
    ["sweep", "--metric", "flood_time"],
    ["flood", "--alpha", "1"],
    ["flood", "--n", "1", "--alpha", "1"],
    ["flood", "--n", "10", "--alpha", "1", "--seed", "-1"],
    ["sweep", "--alphas", "1", "--n-values", "10", "--metric", "nope"],
    ["calibrate", "--n", "10", "--alpha", "1", "--trials", "10"],
])
def test_parameter_errors_exit_1(capsys, argv):
    code, out, err = run(capsys, *argv)
    assert code == 1 and out == "" and err


def test_bad_config_file_exit_1(capsys, tmp_path):
    ini = tmp_path / "bad.ini"
    ini.write_text("[network]\nspeed = 3\n")
    assert run(capsys, "bounds", "--config", str(ini))[0] == 1


def test_runtime_failure_exit_2(capsys, tmp_path):
    code, _, err = run(capsys, "bounds", "--n", "10", "--alpha", "1",
                       "--out", str(tmp_path / "missing" / "x.csv"))
    assert code == 2 and "runtime failure" in err
    code, _, err = run(capsys, "fit", "--table", str(tmp_path / "nope.csv"), "--model", "power")
    assert code == 2


def test_short_horizon_runs(capsys):
    code, out, _ = run(capsys, "fcfs", "--n", "8", "--alpha", "1", "--service-slots", "10",
                       "--horizon", "5", "--warmup", "0")
    assert code == 0 and "fcfs_delay" in out


def test_sweep_then_fit(capsys, tmp_path):
    table = tmp_path / "sweep.csv"
    code, _, _ = run(capsys, "sweep", "--alphas", "2", "--n-values", "16,32,64,128",
                     "--trials", "300", "--seed", "1", "--out", str(table))
    assert code == 0
    rows = harness.read_table(table)
    assert [r.n for r in rows] == [16, 32, 64, 128]
    code, out, _ = run(capsys, "fit", "--table", str(table), "--model", "power_log", "--json")
    assert code == 0
    fit = json.loads(out)
    assert fit["model"] == "power_log" and fit["r_squared"] >= 0.98 and fit["points"] == 4
    code, out, _ = run(capsys, "fit", "--table", str(table), "--model", "power", "--alpha", "0.5")
    assert code == 1


def test_sweep_grid_from_config(capsys, tmp_path):
    ini = tmp_path / "s.ini"
    ini.write_text("[sweep]\nalphas = 1.0\nn_values = 6, 8\nmetric = capacity_bound\nseed = 5\n")
    code, out, _ = run(capsys, "sweep", "--config", str(ini))
    assert code == 0
    lines = out.splitlines()[1:]
    assert len(lines) == 2 and all(line.endswith(",5") for line in lines)


def test_calibrate_rows(capsys):
    code, out, _ = run(capsys, "calibrate", "--n", "10", "--alpha", "1", "--trials", "2000", "--json")
    assert code == 0
    recs = json.loads(out)
    assert [r["metric"] for r in recs] == ["u_n", "u_n_achieved_prob"]
    assert abs(recs[0]["mean"] - recs[0]["oracle"]) <= 2
    assert recs[1]["mean"] >= 0.9


def test_queue_subcommands(capsys):
    code, out, _ = run(capsys, "fcfs", "--n", "8", "--alpha", "1", "--service-slots", "20",
                       "--rho", "0.5", "--horizon", "50000", "--json")
    assert code == 0
    metrics = {r["metric"] for r in json.loads(out)}
    assert {"fcfs_delay", "fcfs_sojourn", "fcfs_drop_rate"} <= metrics
    code, out, _ = run(capsys, "single-hop", "--n", "6", "--alpha", "1", "--horizon", "100000")
    assert code == 0 and "single_hop_wait" in out
    # an overloaded run is a valid experiment; the wait has no oracle
    code, out, _ = run(capsys, "single-hop", "--n", "6", "--alpha", "1", "--load", "1.5",
                       "--horizon", "50000")
    assert code == 0 and out.splitlines()[1].split(",")[7] == ""
    code, _, err = run(capsys, "single-hop", "--n", "6", "--alpha", "1", "--load", "0")
    assert code == 1 and "parameter error" in err


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "iidcast.cli", "bounds", "--n", "5", "--alpha", "1"],
                         capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.startswith("n,alpha")
    out = subprocess.run([sys.executable, "-m", "iidcast.cli", "bounds", "--zzz"],
                         capture_output=True, text=True)
    assert out.returncode == 1
