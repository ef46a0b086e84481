"""Command line entry point: ``iidcast <subcommand> [options]``.

Every subcommand prints table rows (CSV by default, JSON records with
``--json``) to stdout or to ``--out``. Exit status: 0 success, 1 bad
parameters or usage, 2 runtime failure.
"""
import argparse
import json
import math
import sys

from . import harness, schemes
from .harness import Row, SweepSpec
from .meg import ConfigurationError
from .mobility import exact_flooding_time_quantile, make_config

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _common(p):
    p.add_argument("--seed", type=int, default=None, help="master seed (default 0)")
    p.add_argument("--out", default=None, help="write output here instead of stdout")
    p.add_argument("--config", default=None, help="INI file with [network], [fcfs], [sweep]")
    p.add_argument("--json", action="store_true", help="emit JSON records instead of CSV")


def _network(p):
    p.add_argument("--n", type=int, default=None, help="number of nodes N")
    p.add_argument("--alpha", type=float, default=None, help="cell-area exponent")
    p.add_argument("--c", type=float, default=None, help="cell-area constant")


def build_parser():
    parser = _Parser(prog="iidcast", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("bounds", help="capacity upper bound and delay lower bound")
    _network(p)
    _common(p)

    p = sub.add_parser("flood", help="Monte Carlo single-packet flooding time")
    _network(p)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--max-steps", type=int, default=None)
    _common(p)

    p = sub.add_parser("fcfs", help="FCFS flooding queue simulation")
    _network(p)
    p.add_argument("--lam", type=float, default=None, help="per-node arrival rate")
    p.add_argument("--rho", type=float, default=None, help="utilization N lam U (default 0.5)")
    p.add_argument("--service-slots", type=int, default=None, help="U; calibrated if omitted")
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--warmup", type=int, default=None)
    p.add_argument("--target", type=float, default=None, help="calibration target (default 1-1/N)")
    p.add_argument("--calib-trials", type=int, default=None)
    _common(p)

    p = sub.add_parser("single-hop", help="single-hop scheme simulation")
    _network(p)
    p.add_argument("--lam", type=float, default=None, help="per-node arrival rate")
    p.add_argument("--load", type=float, default=None, help="lam as a fraction of r (default 0.5)")
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--warmup", type=int, default=None)
    _common(p)

    p = sub.add_parser("calibrate", help="calibrate the FCFS service time U")
    _network(p)
    p.add_argument("--target", type=float, default=None, help="default 1-1/N")
    p.add_argument("--trials", type=int, default=10_000)
    _common(p)

    p = sub.add_parser("sweep", help="run a grid of points for one metric")
    p.add_argument("--alphas", default=None, help="comma-separated alphas")
    p.add_argument("--n-values", default=None, help="comma-separated N values")
    p.add_argument("--c", type=float, default=None)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--metric", choices=harness.METRICS, default=None)
    p.add_argument("--load", type=float, default=None)
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--warmup", type=int, default=None)
    _common(p)

    p = sub.add_parser("fit", help="fit a scaling shape to a sweep table")
    p.add_argument("--table", required=True, help="CSV written by sweep")
    p.add_argument("--model", choices=harness.FIT_MODELS, required=True)
    p.add_argument("--metric", default=None, help="only rows with this metric")
    p.add_argument("--alpha", type=float, default=None, help="only rows with this alpha")
    _common(p)
    return parser


def _pick(flag, cfg, section, key, default=None):
    if flag is not None:
        return flag
    return cfg.get(section, {}).get(key, default)


def _net(args, cfg):
    n = _pick(args.n, cfg, "network", "n")
    alpha = _pick(args.alpha, cfg, "network", "alpha")
    c = _pick(args.c, cfg, "network", "c", 1.0)
    if n is None or alpha is None:
        raise ConfigurationError("--n and --alpha are required (flags or [network] section)")
    return make_config(n, alpha, c)


def _ints(text):
    return [int(v) for v in text.split(",") if v.strip()]


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def cmd_bounds(args, cfg, seed):
    return harness.bound_rows(_net(args, cfg), seed)


def cmd_flood(args, cfg, seed):
    if args.trials < 2:
        raise ConfigurationError("--trials must be >= 2")
    return [harness.flood_row(_net(args, cfg), args.trials, seed, 0, args.max_steps)]


def cmd_fcfs(args, cfg, seed):
    net = _net(args, cfg)
    pick = lambda flag, key, default=None: _pick(flag, cfg, "fcfs", key, default)
    horizon = pick(args.horizon, "horizon", 200_000)
    warmup = pick(args.warmup, "warmup", horizon // 10)
    lam, rho = pick(args.lam, "lam"), pick(args.rho, "rho")
    if lam is not None and rho is not None:
        raise ConfigurationError("give either lam or rho, not both")
    calib_trials = pick(args.calib_trials, "calib_trials", 2000)
    u_n = pick(args.service_slots, "service_slots")
    if u_n is None:
        target = pick(args.target, "target", 1 - 1 / net.n_nodes)
        u_n = harness.calibrate_un(net, target, calib_trials, seed=seed).u_n
    load = net.n_nodes * lam * u_n if lam is not None else (0.5 if rho is None else rho)
    if not load > 0:
        raise ConfigurationError("utilization must be positive")
    spec = SweepSpec([net.alpha], [net.n_nodes], net.c, 1, seed, "fcfs_delay",
                     load=load, calib_trials=calib_trials)
    return harness.fcfs_rows(net, spec, 0, horizon, warmup, u_n=u_n)


def cmd_single_hop(args, cfg, seed):
    net = _net(args, cfg)
    horizon = args.horizon if args.horizon is not None else 1_000_000
    warmup = args.warmup if args.warmup is not None else horizon // 10
    r = schemes.single_hop_rate(net)
    if args.lam is not None and args.load is not None:
        raise ConfigurationError("give either --lam or --load, not both")
    load = args.lam / r if args.lam is not None else (args.load if args.load is not None else 0.5)
    if not load > 0:
        raise ConfigurationError("arrival rate must be positive")
    spec = SweepSpec([net.alpha], [net.n_nodes], net.c, 1, seed, "single_hop_wait", load=load)
    return harness.single_hop_rows(net, spec, 0, horizon, warmup)


def cmd_calibrate(args, cfg, seed):
    net = _net(args, cfg)
    target = _pick(args.target, cfg, "fcfs", "target", 1 - 1 / net.n_nodes)
    rec = harness.calibrate_un(net, target, args.trials, seed=seed)
    oracle = None
    if net.n_nodes <= harness.ORACLE_COLUMN_MAX_N:
        oracle = float(exact_flooding_time_quantile(net, target))
    return [Row(net.n_nodes, net.alpha, net.c, "u_n", float(rec.u_n), math.nan, rec.trials,
                oracle, None, seed),
            Row(net.n_nodes, net.alpha, net.c, "u_n_achieved_prob", rec.achieved_prob,
                math.sqrt(rec.achieved_prob * (1 - rec.achieved_prob) / rec.trials),
                rec.trials, target, None, seed)]


def cmd_sweep(args, cfg, seed):
    s = cfg.get("sweep", {})
    alphas = _floats(args.alphas) if args.alphas else s.get("alphas")
    n_values = _ints(args.n_values) if args.n_values else s.get("n_values")
    if not alphas or not n_values:
        raise ConfigurationError("sweep needs a grid: --alphas and --n-values (or [sweep] keys)")
    opt = lambda flag, key, default: flag if flag is not None else s.get(key, default)
    spec = SweepSpec(alphas, n_values, c=opt(args.c, "c", 1.0),
                     trials_per_point=opt(args.trials, "trials", 1000), seed=seed,
                     metric=opt(args.metric, "metric", "flood_time"),
                     load=opt(args.load, "load", 0.5), horizon=opt(args.horizon, "horizon", 200_000),
                     warmup=opt(args.warmup, "warmup", 20_000),
                     calib_trials=s.get("calib_trials", 2000))
    return harness.run_sweep(spec)


def cmd_fit(args, cfg, seed):
    rows = harness.read_table(args.table)
    if args.alpha is not None:
        rows = [r for r in rows if math.isclose(r.alpha, args.alpha)]
    return harness.fit_scaling(rows, args.model, metric=args.metric)


COMMANDS = {
    "bounds": cmd_bounds, "flood": cmd_flood, "fcfs": cmd_fcfs, "single-hop": cmd_single_hop,
    "calibrate": cmd_calibrate, "sweep": cmd_sweep, "fit": cmd_fit,
}


def _render(result, as_json):
    if isinstance(result, harness.FitResult):
        rec = {k: getattr(result, k) for k in result.__dataclass_fields__}
        rec = {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in rec.items()}
        if as_json:
            return json.dumps(rec, indent=2) + "\n"
        return "".join(f"{k}={'' if v is None else v}\n" for k, v in rec.items())
    return harness.rows_to_json(result) if as_json else harness.rows_to_csv(result)


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = harness.read_config(args.config) if args.config else {}
        seed = args.seed if args.seed is not None else cfg.get("sweep", {}).get("seed", 0)
        if not 0 <= seed < 2 ** 64:
            raise ConfigurationError("--seed must be a 64-bit unsigned integer")
        result = COMMANDS[args.command](args, cfg, seed)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (ConfigurationError, harness.FitError, schemes.InstabilityError) as exc:
        print(f"iidcast: parameter error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - any other failure is a runtime failure
        print(f"iidcast: runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for row in result if isinstance(result, list) else ():
        if row.error:
            print(f"iidcast: point n={row.n} alpha={row.alpha}: {row.error}", file=sys.stderr)
    text = _render(result, args.json)
    try:
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    except OSError as exc:
        print(f"iidcast: runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
