import math

import numpy as np
import pytest

from iidcast import harness as hs
from iidcast.meg import ConfigurationError
from iidcast.mobility import NetworkConfig, exact_flooding_time_quantile, flood_times, make_config


# --- calibration ----------------------------------------------------------------------------

def test_single_cell_calibrates_to_one():
    rec = hs.calibrate_un(NetworkConfig(10, 0.1, 10, 1, 1.0), 0.999, trials=1000)
    assert rec.u_n == 1 and rec.achieved_prob == 1.0


def test_calibration_is_empirical_quantile():
    cfg = make_config(30, 1.3)
    rec = hs.calibrate_un(cfg, 0.5, trials=2000, seed=4, point=2)
    t = flood_times(cfg, 2000, seed=4, point=2)
    assert rec.u_n == int(np.sort(t)[999])
    assert np.mean(t <= rec.u_n) >= 0.5 > np.mean(t <= rec.u_n - 1)
    assert rec.achieved_prob >= rec.target_prob
    assert 0 < rec.lower_confidence <= rec.achieved_prob
    assert "lower bound" in rec.note


def test_calibration_matches_exact_quantile():
    # N = 100, alpha = 1.5, target 0.99
    cfg = make_config(100, 1.5)
    rec = hs.calibrate_un(cfg, 0.99, trials=100_000, seed=0)
    assert abs(rec.u_n - exact_flooding_time_quantile(cfg, 0.99)) <= 1


def test_calibration_errors():
    cfg = make_config(40, 2)
    with pytest.raises(ConfigurationError):
        hs.calibrate_un(cfg, 0.9, trials=999)
    with pytest.raises(ConfigurationError):
        hs.calibrate_un(cfg, 1.0, trials=1000)
    with pytest.raises(hs.CalibrationError, match="step cap"):
        hs.calibrate_un(cfg, 0.9, trials=1000, max_steps=5)


# --- sweeps -----------------------------------------------------------------------------------

def test_spec_validation():
    with pytest.raises(ConfigurationError):
        hs.SweepSpec([], [10])
    with pytest.raises(ConfigurationError):
        hs.SweepSpec([1.0], [10], metric="nope")
    with pytest.raises(ConfigurationError):
        hs.SweepSpec([1.0], [10], trials_per_point=0)


def test_flood_sweep_has_oracle_column():
    spec = hs.SweepSpec([0.5, 1.0, 1.6], [10, 40, 250], trials_per_point=3000, seed=7)
    rows = hs.run_sweep(spec)
    assert [(r.alpha, r.n) for r in rows] == spec.points()
    with_oracle = [r for r in rows if r.oracle is not None]
    assert {r.n for r in with_oracle} == {10, 40}
    assert all(abs(r.zscore) <= 3 for r in with_oracle)
    assert all(r.oracle is None and r.zscore is None for r in rows if r.n == 250)


def test_sweep_is_byte_identical_under_seed():
    spec = hs.SweepSpec([1.0, 1.5], [8, 16], trials_per_point=200, seed=123)
    assert hs.rows_to_csv(hs.run_sweep(spec)) == hs.rows_to_csv(hs.run_sweep(spec))
    other = hs.SweepSpec([1.0, 1.5], [8, 16], trials_per_point=200, seed=124)
    assert hs.rows_to_csv(hs.run_sweep(spec)) != hs.rows_to_csv(hs.run_sweep(other))


def test_bound_sweep_is_pure():
    rows = hs.run_sweep(hs.SweepSpec([1.0], [10, 100], metric="capacity_bound"))
    assert all(r.stderr == 0 for r in rows)
    assert rows[0].mean == pytest.approx((1 - 0.9 ** 9) / 18)
    rows = hs.run_sweep(hs.SweepSpec([1.0], [100], metric="delay_bound"))
    assert rows[0].mean == pytest.approx(2.76358, abs=1e-5)


def test_queue_metric_sweeps():
    rows = hs.run_sweep(hs.SweepSpec([1.0], [8], metric="fcfs_delay", horizon=100_000,
                                     warmup=10_000, calib_trials=1000))
    assert rows[0].metric == "fcfs_delay" and rows[0].oracle > 0 and rows[0].mean > 0
    rows = hs.run_sweep(hs.SweepSpec([1.0], [6], metric="single_hop_wait", horizon=200_000,
                                     warmup=10_000))
    assert rows[0].metric == "single_hop_wait" and abs(rows[0].zscore) < 4


def test_failed_point_is_recorded_and_sweep_continues():
    spec = hs.SweepSpec([1.0], [2, 6], metric="fcfs_delay", load=0.5, horizon=1000, warmup=2000)
    rows = hs.run_sweep(spec)
    assert len(rows) == 2 and all(r.error for r in rows)
    assert all(math.isnan(r.mean) for r in rows)
    spec = hs.SweepSpec([1.0], [1, 6], trials_per_point=50)
    rows = hs.run_sweep(spec)
    assert rows[0].error and rows[1].error is None


def test_csv_schema_and_round_trip(tmp_path):
    rows = hs.run_sweep(hs.SweepSpec([1.0, 2.0], [10, 20], trials_per_point=100, seed=3))
    text = hs.rows_to_csv(rows)
    assert text.splitlines()[0] == "n,alpha,c,metric,mean,stderr,trials,oracle,zscore,seed"
    path = tmp_path / "t.csv"
    path.write_text(text)
    back = hs.read_table(path)
    assert [(r.n, r.alpha, r.mean, r.oracle) for r in back] == [(r.n, r.alpha, r.mean, r.oracle) for r in rows]
    assert hs.rows_to_csv(back) == text


def test_json_mirrors_rows():
    import json
    rows = hs.run_sweep(hs.SweepSpec([1.0], [10], trials_per_point=100))
    rec = json.loads(hs.rows_to_json(rows))
    assert list(rec[0]) == list(hs.CSV_COLUMNS)
    assert rec[0]["mean"] == rows[0].mean


# --- fits ---------------------------------------------------------------------------------------

N = np.array([16, 32, 64, 128, 256, 512, 1024])


def test_power_log_recovers_synthetic():
    fit = hs.fit_scaling((N, 2 * N * np.log(N)), "power_log")
    assert fit.exponent == pytest.approx(1.0, abs=0.01)
    assert fit.constant == pytest.approx(2.0, rel=0.02)
    assert fit.r_squared == pytest.approx(1.0)


def test_power_of_constant():
    fit = hs.fit_scaling((N, np.full(N.size, 7.0)), "power")
    assert fit.exponent == pytest.approx(0.0, abs=0.01) and fit.constant == pytest.approx(7)


def test_loglog_fit():
    y = 3 + 1.5 * np.log(np.log(N))
    fit = hs.fit_scaling((N, y), "loglog")
    assert fit.constant == pytest.approx(1.5) and fit.intercept == pytest.approx(3)
    assert math.isnan(fit.exponent)


def test_fit_on_simulated_sparse_rows():
    rows = hs.run_sweep(hs.SweepSpec([2.0], [16, 32, 64, 128], trials_per_point=300, seed=1))
    fit = hs.fit_scaling(rows, "power_log", metric="flood_time")
    assert fit.r_squared >= 0.98 and fit.points == 4


def test_fit_errors():
    with pytest.raises(hs.FitError):
        hs.fit_scaling((N[:2], N[:2] * 1.0), "power")
    with pytest.raises(hs.FitError):
        hs.fit_scaling((np.full(4, 10), np.arange(1.0, 5.0)), "power")
    with pytest.raises(hs.FitError):
        hs.fit_scaling((N, -np.ones(N.size)), "power")
    with pytest.raises(hs.FitError):
        hs.fit_scaling((N, N * 1.0), "cubic")


# --- config ------------------------------------------------------------------------------------

def test_read_config(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text("[network]\nn = 50\nalpha = 1.5\n\n[fcfs]\nrho = 0.5\nhorizon = 1000\n\n"
                 "[sweep]\nalphas = 0.5, 1\nn_values = 10 20\nmetric = flood_time\n")
    cfg = hs.read_config(p)
    assert cfg["network"] == {"n": 50, "alpha": 1.5}
    assert cfg["fcfs"] == {"rho": 0.5, "horizon": 1000}
    assert cfg["sweep"]["alphas"] == [0.5, 1.0] and cfg["sweep"]["n_values"] == [10, 20]


@pytest.mark.parametrize("text", ["[network]\nbogus = 1\n", "[other]\nx = 1\n", "[network]\nn = ten\n",
                                  "no section\n"])
def test_read_config_rejects(tmp_path, text):
    p = tmp_path / "c.ini"
    p.write_text(text)
    with pytest.raises(ConfigurationError):
        hs.read_config(p)
