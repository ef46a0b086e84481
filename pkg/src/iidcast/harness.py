"""Experiment plumbing: U calibration, sweeps, scaling fits, config files, CSV.

Every table row follows ``CSV_COLUMNS``. Rows of a sweep are emitted in grid
order (alpha-major, then N) and point ``i`` of the grid draws its trial
streams from key ``(i, trial)`` under the master seed, so a sweep is a pure
function of its spec.
"""
import configparser
import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from . import analytics, schemes
from .meg import ConfigurationError
from .mobility import (ORACLE_MAX_NODES, NetworkConfig, exact_expected_flooding_time,
                       exact_flooding_time_quantile, flood_times, make_config)

CSV_COLUMNS = ("n", "alpha", "c", "metric", "mean", "stderr", "trials", "oracle", "zscore", "seed")
METRICS = ("flood_time", "fcfs_delay", "single_hop_wait", "capacity_bound", "delay_bound")
ORACLE_COLUMN_MAX_N = 200


class CalibrationError(RuntimeError):
    pass


class FitError(ValueError):
    pass


# --- U_N calibration -----------------------------------------------------------

@dataclass(frozen=True)
class CalibrationRecord:
    config: NetworkConfig
    target_prob: float
    u_n: int
    achieved_prob: float
    trials: int
    timeouts: int
    lower_confidence: float
    confidence: float = 0.95

    @property
    def note(self):
        return (f"P(T <= {self.u_n}) = {self.achieved_prob:.5f} over {self.trials} trials; "
                f"one-sided {self.confidence:.0%} lower bound {self.lower_confidence:.5f}")


def calibrate_un(config: NetworkConfig, target_prob, trials=10_000, seed=0, point=0,
                 max_steps=None, confidence=0.95) -> CalibrationRecord:
    """Smallest integer U with empirical P(T_N <= U) >= target_prob."""
    if not 0 < target_prob < 1:
        raise ConfigurationError("target_prob must lie in (0, 1)")
    if trials < 1000:
        raise ConfigurationError("calibration needs at least 1000 trials")
    times = flood_times(config, trials, seed=seed, point=point, max_steps=max_steps)
    timeouts = int((times < 0).sum())
    # timed-out trials sit above every finite U
    finite = np.sort(times[times >= 0])
    need = math.ceil(target_prob * trials - 1e-9)
    if need > finite.size:
        raise CalibrationError(
            f"{timeouts}/{trials} trials hit the step cap; the {target_prob} quantile "
            "is beyond it (raise max_steps)")
    u_n = int(finite[need - 1])
    hits = int(np.searchsorted(finite, u_n, side="right"))
    lower = float(stats.beta.ppf(1 - confidence, hits, trials - hits + 1)) if hits else 0.0
    return CalibrationRecord(config, float(target_prob), u_n, hits / trials, trials,
                             timeouts, lower, confidence)


# --- sweeps ----------------------------------------------------------------------

@dataclass(frozen=True)
class SweepSpec:
    """Grid of (alpha, N) points for one metric.

    ``load`` is the utilization N lam U for ``fcfs_delay`` and the ratio lam/r
    for ``single_hop_wait``; ``horizon``/``warmup`` are slot counts for those
    two metrics. ``calib_trials`` flooding runs calibrate U at ``target_prob``
    (default 1 - 1/N).
    """

    alphas: Sequence[float]
    n_values: Sequence[int]
    c: float = 1.0
    trials_per_point: int = 1000
    seed: int = 0
    metric: str = "flood_time"
    load: float = 0.5
    horizon: int = 200_000
    warmup: int = 20_000
    calib_trials: int = 2000
    target_prob: Optional[float] = None

    def __post_init__(self):
        if not self.alphas or not self.n_values:
            raise ConfigurationError("sweep grid is empty: give alphas and n_values")
        if self.trials_per_point < 1:
            raise ConfigurationError("trials_per_point must be >= 1")
        if self.metric not in METRICS:
            raise ConfigurationError(f"unknown metric {self.metric!r}; choose from {METRICS}")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigurationError("seed must be a 64-bit unsigned integer")

    def points(self):
        return [(float(a), int(n)) for a in self.alphas for n in self.n_values]


@dataclass
class Row:
    n: int
    alpha: float
    c: float
    metric: str
    mean: float
    stderr: float
    trials: int
    oracle: Optional[float] = None
    zscore: Optional[float] = None
    seed: int = 0
    error: Optional[str] = field(default=None, compare=False)

    def record(self):
        rec = {k: getattr(self, k) for k in CSV_COLUMNS}
        if self.error is not None:
            rec["error"] = self.error
        return {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in rec.items()}


def _z(mean, se, oracle):
    if oracle is None:
        return None
    if se > 0:
        return (mean - oracle) / se
    return 0.0 if math.isclose(mean, oracle, rel_tol=1e-12, abs_tol=1e-12) else math.copysign(math.inf, mean - oracle)


def flood_row(config, trials, seed, point, max_steps=None) -> Row:
    times = flood_times(config, trials, seed=seed, point=point, max_steps=max_steps)
    if (times < 0).any():
        raise CalibrationError(f"{int((times < 0).sum())} of {trials} flooding runs timed out")
    mean = float(times.mean())
    se = float(times.std(ddof=1) / math.sqrt(trials)) if trials > 1 else math.nan
    oracle = exact_expected_flooding_time(config) if config.n_nodes <= ORACLE_COLUMN_MAX_N else None
    return Row(config.n_nodes, config.alpha, config.c, "flood_time", mean, se, trials,
               oracle, _z(mean, se, oracle), seed)


def fcfs_rows(config, spec: SweepSpec, point, horizon=None, warmup=None, u_n=None):
    """FCFS run at utilization ``spec.load``; U calibrated unless given."""
    horizon = spec.horizon if horizon is None else horizon
    warmup = spec.warmup if warmup is None else warmup
    if u_n is None:
        target = spec.target_prob or 1 - 1 / config.n_nodes
        u_n = calibrate_un(config, target, spec.calib_trials, seed=spec.seed, point=point).u_n
    lam = spec.load / (config.n_nodes * u_n)
    st = schemes.simulate_fcfs(schemes.FcfsConfig(config, lam, u_n, horizon, warmup),
                               seed=spec.seed, key=(point,))
    oracle = schemes.md1_wait(config.n_nodes, lam, u_n) if spec.load < 1 else None
    base = dict(n=config.n_nodes, alpha=config.alpha, c=config.c, seed=spec.seed)
    return [
        Row(metric="fcfs_delay", mean=st.mean_delay, stderr=st.delay_se, trials=st.delivered,
            oracle=oracle, zscore=_z(st.mean_delay, st.delay_se, oracle), **base),
        Row(metric="fcfs_sojourn", mean=st.mean_sojourn, stderr=st.sojourn_se,
            trials=st.delivered + st.dropped, oracle=oracle,
            zscore=_z(st.mean_sojourn, st.sojourn_se, oracle), **base),
        Row(metric="fcfs_drop_rate", mean=st.drop_rate, stderr=math.nan,
            trials=st.delivered + st.dropped, oracle=1 / config.n_nodes, **base),
        Row(metric="fcfs_queue_len", mean=st.mean_queue_len, stderr=math.nan, trials=0, **base),
        Row(metric="fcfs_service_slots", mean=float(u_n), stderr=0.0, trials=spec.calib_trials, **base),
    ]


def single_hop_rows(config, spec: SweepSpec, point, horizon=None, warmup=None):
    horizon = spec.horizon if horizon is None else horizon
    warmup = spec.warmup if warmup is None else warmup
    r = schemes.single_hop_rate(config)
    lam = spec.load * r
    st = schemes.simulate_single_hop(config, lam, horizon, warmup, seed=spec.seed, key=(point,))
    oracle = schemes.single_hop_wait(lam, r) if spec.load < 1 else None
    base = dict(n=config.n_nodes, alpha=config.alpha, c=config.c, seed=spec.seed)
    return [
        Row(metric="single_hop_wait", mean=st.tagged_wait, stderr=st.tagged_wait_se,
            trials=st.tagged_served, oracle=oracle,
            zscore=_z(st.tagged_wait, st.tagged_wait_se, oracle), **base),
        Row(metric="single_hop_rate", mean=st.tagged_rate, stderr=st.tagged_rate_se,
            trials=horizon - warmup, oracle=r, zscore=_z(st.tagged_rate, st.tagged_rate_se, r), **base),
        Row(metric="single_hop_broadcast_delay", mean=st.broadcast_delay, stderr=math.nan,
            trials=st.broadcast_completed, **base),
    ]


def bound_rows(config, seed=0, metrics=("capacity_bound", "delay_bound")):
    out = []
    base = dict(n=config.n_nodes, alpha=config.alpha, c=config.c, stderr=0.0, trials=0, seed=seed)
    if "capacity_bound" in metrics:
        out.append(Row(metric="capacity_bound", mean=analytics.capacity_upper_bound(config).value, **base))
    if "delay_bound" in metrics:
        out.append(Row(metric="delay_bound", mean=analytics.delay_lower_bound_best(config).value, **base))
    return out


def _point_rows(spec: SweepSpec, point, alpha, n):
    config = make_config(n, alpha, spec.c)
    if spec.metric == "flood_time":
        return [flood_row(config, spec.trials_per_point, spec.seed, point)]
    if spec.metric == "fcfs_delay":
        return fcfs_rows(config, spec, point)[:1]
    if spec.metric == "single_hop_wait":
        return single_hop_rows(config, spec, point)[:1]
    return bound_rows(config, spec.seed, (spec.metric,))


def run_sweep(spec: SweepSpec):
    """One row per grid point, in grid order. A failing point yields a row with
    NaN mean and the message in ``Row.error``; the sweep carries on."""
    rows = []
    for point, (alpha, n) in enumerate(spec.points()):
        try:
            rows.extend(_point_rows(spec, point, alpha, n))
        except (ValueError, RuntimeError) as exc:
            rows.append(Row(n, alpha, spec.c, spec.metric, math.nan, math.nan, 0,
                            seed=spec.seed, error=f"{type(exc).__name__}: {exc}"))
    return rows


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return repr(v)
    return str(v)


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([_fmt(getattr(r, k)) for k in CSV_COLUMNS])
    return buf.getvalue()


def rows_to_json(rows) -> str:
    return json.dumps([r.record() for r in rows], indent=2, allow_nan=True) + "\n"


def read_table(path):
    """Read rows back from a CSV written by :func:`rows_to_csv`."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ConfigurationError(f"{path}: header does not match {','.join(CSV_COLUMNS)}")
        rows = []
        for rec in reader:
            num = lambda s: float(s) if s not in ("", None) else None
            rows.append(Row(int(rec["n"]), float(rec["alpha"]), float(rec["c"]), rec["metric"],
                            float(rec["mean"]), float(rec["stderr"]), int(rec["trials"]),
                            num(rec["oracle"]), num(rec["zscore"]), int(rec["seed"])))
        return rows


# --- scaling fits ----------------------------------------------------------------

FIT_MODELS = ("power", "power_log", "loglog")


@dataclass(frozen=True)
class FitResult:
    """``power``: y = K N^e. ``power_log``: y = K N^e log N. ``loglog``:
    y = intercept + K log log N (``exponent`` is NaN). For the power models
    ``r_squared`` is computed on log y."""

    model: str
    exponent: float
    constant: float
    r_squared: float
    intercept: float = 0.0
    points: int = 0


def fit_scaling(table, model, metric=None) -> FitResult:
    """Least-squares fit of one of the three shapes.

    ``table`` is a sequence of :class:`Row` (optionally filtered by ``metric``)
    or a pair of arrays ``(n_values, y)``.
    """
    if model not in FIT_MODELS:
        raise FitError(f"unknown model {model!r}; choose from {FIT_MODELS}")
    if isinstance(table, tuple) and len(table) == 2 and not isinstance(table[0], Row):
        n, y = (np.asarray(v, dtype=float) for v in table)
    else:
        rows = [r for r in table if metric is None or r.metric == metric]
        n = np.array([r.n for r in rows], dtype=float)
        y = np.array([r.mean for r in rows], dtype=float)
    if n.size < 3:
        raise FitError("need at least 3 rows")
    if not np.all(np.isfinite(y)) or np.any(y <= 0):
        raise FitError("metric values must be finite and positive")
    if np.unique(n).size < 2:
        raise FitError("singular design: all rows share one N")
    if np.any(n < 3):
        raise FitError("fits need N >= 3 (log log N must be positive)")

    if model == "loglog":
        x = np.log(np.log(n))
        slope, icept = np.polyfit(x, y, 1)
        resid = y - (icept + slope * x)
        ss_tot = float(((y - y.mean()) ** 2).sum())
        r2 = 1 - float((resid ** 2).sum()) / ss_tot if ss_tot > 0 else 1.0
        return FitResult(model, math.nan, float(slope), _clip01(r2), float(icept), int(n.size))

    ly = np.log(y)
    target = ly - np.log(np.log(n)) if model == "power_log" else ly
    x = np.log(n)
    e, logk = np.polyfit(x, target, 1)
    resid = target - (logk + e * x)
    ss_tot = float(((ly - ly.mean()) ** 2).sum())
    r2 = 1 - float((resid ** 2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return FitResult(model, float(e), float(math.exp(logk)), _clip01(r2), 0.0, int(n.size))


def _clip01(v):
    return min(1.0, max(0.0, v))


# --- config files ----------------------------------------------------------------

_SCHEMA = {
    "network": {"n": int, "alpha": float, "c": float},
    "fcfs": {"lam": float, "rho": float, "service_slots": int, "horizon": int,
             "warmup": int, "target": float, "calib_trials": int},
    "sweep": {"alphas": "floats", "n_values": "ints", "c": float, "trials": int,
              "seed": int, "metric": str, "load": float, "horizon": int, "warmup": int,
              "calib_trials": int},
}


def _convert(kind, raw, where):
    try:
        if kind == "floats":
            return [float(v) for v in raw.replace(",", " ").split()]
        if kind == "ints":
            return [int(v) for v in raw.replace(",", " ").split()]
        return kind(raw)
    except ValueError:
        raise ConfigurationError(f"{where}: cannot parse {raw!r}") from None


def read_config(path) -> dict:
    """Parse an INI file with sections [network], [fcfs], [sweep].

    Returns ``{section: {key: typed value}}``; unknown sections or keys are
    rejected so typos do not pass silently.
    """
    parser = configparser.ConfigParser()
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigurationError(f"config {path}: {exc}") from None
    out = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigurationError(f"config {path}: unknown section [{section}]")
        out[section] = {}
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigurationError(f"config {path}: unknown key {key!r} in [{section}]")
            out[section][key] = _convert(_SCHEMA[section][key], raw, f"[{section}] {key}")
    return out
