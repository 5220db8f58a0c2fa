"""Command-line front end.

    thermored reduce   --building B [--strategy separate] [--eps E] [--out report.json]
    thermored simulate --building B --weather W [--strategy S] [--out run.csv]
    thermored compare  --building B --weather W --strategy reduce-lti,separate [--runs N]
    thermored bench    --building B --weather W [--eps 0.05,0.1,0.2,0.4,0.8]
    thermored bench    --orders 5,10,20,40 --weather W

``--building`` and ``--weather`` accept a path or the name of a bundled
file (``dwelling_closed``, ``dwelling_open``, ``two_zone``,
``weather_tropical``). Exit codes: 0 success, 2 configuration error,
3 numerical non-convergence, 4 I/O error.
"""
import argparse
import csv
import json
import sys
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import balred
from .airflow import FlowSchedule, Opening
from .building import (Layer, Site, Wall, WeatherSeries, ZoneDescription, assemble_building,
                       load_building)
from .errors import (ConfigError, ConvergenceError, RangeError, ReductionError, SplitError,
                     StabilityError, StepError)
from .simulation import (STRATEGIES, RunOptions, deviation, fit_timing_model,
                         simulate_building)
from .statespace import DEFAULT_DT
from .tvreduction import DEFAULT_ITERATION_EPS, separate_reduce

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CONVERGENCE = 3
EXIT_IO = 4

DEFAULT_EPS_SWEEP = (0.05, 0.1, 0.2, 0.4, 0.8)
MIN_BENCH_RUNS = 3


def data_file(name):
    """Path of a bundled data file (``.json``/``.csv`` suffix optional)."""
    root = resources.files("thermored") / "data"
    for cand in (name, f"{name}.json", f"{name}.csv"):
        path = root / cand
        if path.is_file():
            return Path(str(path))
    raise FileNotFoundError(f"no bundled data file {name!r}")


def _resolve(path):
    p = Path(path)
    if p.exists():
        return p
    try:
        return data_file(str(path))
    except FileNotFoundError:
        return p   # let the reader raise the I/O error


@dataclass
class RunConfig:
    """Everything one command needs; built from parsed arguments."""

    building: str = None
    weather: str = None
    strategy: str = "full"
    eps: float = 0.2
    flow_tolerance: float = None
    iteration_eps: float = DEFAULT_ITERATION_EPS
    dt: float = DEFAULT_DT
    start: str = None
    end: str = None
    out: str = None
    runs: int = 1
    schedule: str = None

    def options(self, strategy=None, eps=None):
        strategy = strategy or self.strategy
        return RunOptions(strategy, self.eps if eps is None else eps,
                          self.flow_tolerance if strategy == "conditional" else None,
                          self.iteration_eps, dt=self.dt)

    def load(self):
        """Building, weather, start, end and flow schedule."""
        if self.building is None:
            raise ConfigError("--building is required")
        building = load_building(_resolve(self.building))
        if self.weather is None:
            raise ConfigError("--weather is required")
        weather = WeatherSeries.from_csv(_resolve(self.weather))
        start = np.datetime64(self.start, "s") if self.start else weather.start
        end = np.datetime64(self.end, "s") if self.end else weather.end
        schedule = FlowSchedule.from_csv(_resolve(self.schedule)) if self.schedule else None
        return building, weather, start, end, schedule


# --- reduce --------------------------------------------------------------------

def cmd_reduce(config):
    """Per-zone Hankel singular values, selected orders and error bounds."""
    if config.building is None:
        raise ConfigError("--building is required")
    building = load_building(_resolve(config.building))
    zones = []
    for zone in building.zones:
        try:
            if config.strategy == "separate":
                red = separate_reduce(zone, config.eps, input_scale=zone.input_scale).envelope
            else:
                red = balred.reduce(zone.model_for(), config.eps, zone.input_scale)
        except (ReductionError, SplitError, StabilityError) as exc:
            raise type(exc)(f"zone {zone.name}: {exc}") from exc
        zones.append({"name": zone.name, "full_order": int(red.full_order),
                      "order": int(red.nr), "bound": float(red.bound),
                      "hsv": [float(s) for s in red.hsv]})
    return {"building": building.name, "strategy": config.strategy, "eps": config.eps,
            "subsystem": "envelope" if config.strategy == "separate" else "zone",
            "zones": zones}


# --- simulate ------------------------------------------------------------------

def run(config, strategy=None, eps=None, loaded=None):
    building, weather, start, end, schedule = loaded or config.load()
    return simulate_building(building, weather, start, end, config.options(strategy, eps),
                             schedule)


def trajectory_rows(result):
    """Header and rows of the trajectory CSV (temperatures/flows at 6 decimals)."""
    header = (["timestamp"] + [f"T_air:{z}" for z in result.zone_names]
              + [f"flow:{lid}" for lid in result.link_ids]
              + ["sweeps", "airflow_passes"] + [f"iterations:{z}" for z in result.zone_names])
    rows = []
    for j, t in enumerate(result.times):
        rows.append([str(t)] + [f"{v:.6f}" for v in result.t_air[j]]
                    + [f"{v:.6f}" for v in result.flows[j]]
                    + [int(result.sweeps[j]), int(result.airflow_iterations[j])]
                    + [int(v) for v in result.iterations[j]])
    return header, rows


def write_trajectory(result, path):
    header, rows = trajectory_rows(result)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def read_trajectory(path):
    """Times and air temperatures (zones as columns) of a trajectory CSV."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        cols = [i for i, h in enumerate(header) if h.startswith("T_air:")]
        times, temps = [], []
        for row in reader:
            times.append(np.datetime64(row[0], "s"))
            temps.append([float(row[i]) for i in cols])
    return np.array(times), np.array(temps)


def cmd_simulate(config):
    result = run(config)
    if config.out:
        write_trajectory(result, config.out)
    else:
        header, rows = trajectory_rows(result)
        w = csv.writer(sys.stdout)
        w.writerow(header)
        w.writerows(rows)
    return result


# --- compare -------------------------------------------------------------------

@dataclass
class StrategyReport:
    strategy: str
    eps: float
    orders: list
    bounds: list
    max_deviation: list
    std_deviation: list
    run_time: float
    setup_time: float
    speedup: float


@dataclass
class ComparisonReport:
    """Deviations of each strategy from the full-model baseline."""

    building: str
    zone_names: list
    full_orders: list
    baseline_run_time: float
    baseline_setup_time: float
    runs: int
    strategies: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)


def _timed(config, strategy, loaded, runs):
    # median run time over repeated identical runs; results are deterministic
    results = [run(config, strategy, loaded=loaded) for _ in range(max(runs, 1))]
    med = float(np.median([r.run_time for r in results]))
    setup = float(np.median([r.setup_time for r in results]))
    return results[0], med, setup


def cmd_compare(config, strategies, trajectories=None):
    """Run ``full`` plus each strategy and report deviations and timings."""
    strategies = [s for s in strategies if s != "full"] or ["full"]
    for s in strategies:
        if s not in STRATEGIES:
            raise ConfigError(f"unknown strategy {s!r}")
    loaded = config.load()
    base, t_base, s_base = _timed(config, "full", loaded, config.runs)
    report = ComparisonReport(loaded[0].name, list(base.zone_names), list(base.full_orders),
                              t_base, s_base, config.runs)
    if trajectories:
        Path(trajectories).mkdir(parents=True, exist_ok=True)
        write_trajectory(base, Path(trajectories) / "full.csv")
    for s in strategies:
        res, t, setup = _timed(config, s, loaded, config.runs)
        mx, sd = deviation(res, base)
        report.strategies.append(StrategyReport(
            s, config.eps, [int(n) for n in res.orders], [float(b) for b in res.bounds],
            [float(v) for v in mx], [float(v) for v in sd], t, setup,
            t_base / t if t > 0 else float("inf")))
        if trajectories:
            write_trajectory(res, Path(trajectories) / f"{s}.csv")
    return report


# --- bench ---------------------------------------------------------------------

def timing_zone(order):
    """Single zone of the given nodal order with one ventilation link.

    One concrete facade discretized into ``order - 1`` nodes plus the air
    node. Used to measure the cost of refactoring the step matrix.
    """
    if order < 2:
        raise ConfigError("timing zone needs order >= 2")
    wall = Wall("facade", 20.0, (Layer(1.75, 2300.0, 920.0, 0.2, nodes=order - 1),))
    zone = ZoneDescription("zone", (wall,), 50.0)
    return assemble_building([zone], [Opening("vent", "exterior", "zone", 0.6, 0.1)],
                             Site(), name=f"timing-{order}")


def order_sweep(orders, weather, start, end, dt=DEFAULT_DT, runs=MIN_BENCH_RUNS):
    """Median full-model run time of single zones of each order.

    The ventilation flow changes at every step, so the step matrix is
    refactored every step and the cost grows like ``n**3``.
    """
    times = np.arange(start, end + np.timedelta64(int(dt), "s"), np.timedelta64(int(dt), "s"))
    flows = (0.02 + 0.01 * np.sin(np.arange(times.size)))[:, None]
    schedule = FlowSchedule(times, ("vent",), flows)
    out = []
    for n in orders:
        b = timing_zone(int(n))
        ts = [simulate_building(b, weather, start, end, RunOptions("full", dt=dt),
                                schedule).run_time for _ in range(runs)]
        out.append(float(np.median(ts)))
    return out


def cmd_bench(config, eps_values=DEFAULT_EPS_SWEEP, orders=None):
    """Trade-off table over ``eps`` (or over single-zone orders) plus timing fit.

    Returns ``(header, rows, fit)``.
    """
    if config.runs < MIN_BENCH_RUNS:
        raise ConfigError(f"bench needs --runs >= {MIN_BENCH_RUNS} (median timing)")
    if orders:
        if config.weather is None:
            raise ConfigError("--weather is required")
        weather = WeatherSeries.from_csv(_resolve(config.weather))
        start = np.datetime64(config.start, "s") if config.start else weather.start
        end = np.datetime64(config.end, "s") if config.end else weather.end
        times = order_sweep(orders, weather, start, end, config.dt, config.runs)
        fit = fit_timing_model(orders, times)
        return ["order", "time_s"], [[int(n), t] for n, t in zip(orders, times)], fit
    if len(eps_values) < 4:
        raise ConfigError("bench needs at least 4 eps values")
    strategy = "reduce-lti" if config.strategy == "full" else config.strategy
    loaded = config.load()
    base, _, _ = _timed(config, "full", loaded, config.runs)
    header = ["eps", "orders", "total_order", "sum_cubed", "time_s", "setup_s",
              "std_error", "max_error"]
    rows, sizes, times = [], [], []
    for eps in eps_values:
        results = [run(config, strategy, eps, loaded) for _ in range(config.runs)]
        res = results[0]
        t = float(np.median([r.run_time for r in results]))
        setup = float(np.median([r.setup_time for r in results]))
        mx, sd = deviation(res, base)
        n = np.asarray(res.orders)
        rows.append([eps, " ".join(str(int(v)) for v in n), int(n.sum()),
                     int(np.sum(n.astype(float) ** 3)), t, setup,
                     float(np.sqrt(np.mean(sd ** 2))), float(mx.max())])
        sizes.append(n)
        times.append(t)
    return header, rows, fit_timing_model(sizes, times)


# --- entry point ---------------------------------------------------------------

def _floats(text):
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--building", help="building JSON (path or bundled name)")
    common.add_argument("--weather", help="weather CSV (path or bundled name)")
    common.add_argument("--strategy", default="full",
                        help=f"one of {', '.join(STRATEGIES)} (comma list for compare)")
    common.add_argument("--eps", type=_floats, default=None,
                        help="reduction tolerance (comma list for bench)")
    common.add_argument("--flow-tol", type=float, default=None,
                        help="re-reduction flow tolerance, kg/s (conditional only)")
    common.add_argument("--iter-eps", type=float, default=DEFAULT_ITERATION_EPS,
                        help="coupling iteration tolerance, degC (separate)")
    common.add_argument("--dt", type=float, default=DEFAULT_DT, help="time step, s")
    common.add_argument("--from", dest="start", help="start timestamp (ISO)")
    common.add_argument("--to", dest="end", help="end timestamp (ISO)")
    common.add_argument("--out", help="output file (stdout if omitted)")
    common.add_argument("--runs", type=int, default=None, help="timing repetitions")
    common.add_argument("--schedule", help="airflow schedule CSV (replaces the network)")

    parser = argparse.ArgumentParser(prog="thermored", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("reduce", parents=[common], help="reduce every zone, report spectra")
    sub.add_parser("simulate", parents=[common], help="simulate, write trajectory CSV")
    p = sub.add_parser("compare", parents=[common], help="compare strategies with full")
    p.add_argument("--trajectories", help="directory for per-strategy trajectory CSVs")
    p = sub.add_parser("bench", parents=[common], help="eps trade-off and timing fit")
    p.add_argument("--orders", type=_floats, default=None,
                   help="single-zone order sweep instead of the eps sweep")
    return parser


def _config(ns, strategy):
    eps = ns.eps or [0.2]
    if ns.command != "bench" and len(eps) != 1:
        raise ConfigError("--eps takes a single value here")
    runs = ns.runs if ns.runs is not None else (
        MIN_BENCH_RUNS if ns.command in ("bench", "compare") else 1)
    cfg = RunConfig(ns.building, ns.weather, strategy, eps[0], ns.flow_tol, ns.iter_eps, ns.dt,
                    ns.start, ns.end, ns.out, runs, ns.schedule)
    if ns.flow_tol is not None and "conditional" not in ns.strategy.split(","):
        raise ConfigError("--flow-tol only applies to the conditional strategy")
    if ns.command in ("simulate", "reduce"):
        cfg.options()   # validate strategy-specific fields early
    return cfg


def _emit(text, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _table(header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(f"{v:.6g}" if isinstance(v, float) else str(v) for v in row))
    return "\n".join(lines) + "\n"


def main(argv=None):
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        strategies = [s.strip() for s in ns.strategy.split(",") if s.strip()]
        if ns.command == "compare":
            cfg = _config(ns, "full")
            report = cmd_compare(cfg, strategies, ns.trajectories)
            _emit(json.dumps(report.to_dict(), indent=2) + "\n", cfg.out)
            return EXIT_OK
        if len(strategies) != 1:
            raise ConfigError("--strategy takes a single value here")
        cfg = _config(ns, strategies[0])
        if ns.command == "reduce":
            _emit(json.dumps(cmd_reduce(cfg), indent=2) + "\n", cfg.out)
        elif ns.command == "simulate":
            cmd_simulate(cfg)
        else:
            eps = ns.eps or list(DEFAULT_EPS_SWEEP)
            orders = [int(n) for n in ns.orders] if ns.orders else None
            header, rows, fit = cmd_bench(cfg, eps, orders)
            _emit(_table(header, rows), cfg.out)
            print(f"timing fit: t_f={fit.t_f:.6g} s  c={fit.c:.6g} s  R2={fit.r2:.4f}",
                  file=sys.stderr)
        return EXIT_OK
    except (ConvergenceError, StepError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (ReductionError, SplitError, StabilityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (ConfigError, RangeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
