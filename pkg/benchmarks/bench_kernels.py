"""Compiled vs pure-Python kernels on the bundled dwelling.

    python benchmarks/bench_kernels.py [--runs 5] [--days 3]

Runs every strategy with each backend (closed building, then the open
building for the network-coupled path) and prints the median stepping
time, the ratio and the largest temperature difference between backends.
"""
import argparse
import time

import numpy as np

from thermored import kernels as active
from thermored import airflow, simulation
from thermored.building import WeatherSeries, load_building
from thermored.cli import data_file


def _run(backend, building, weather, start, end, strategy, runs):
    saved = simulation.kernels, airflow.kernels
    simulation.kernels = airflow.kernels = backend
    try:
        res = [simulation.simulate_building(building, weather, start, end,
                                            simulation.RunOptions(strategy, eps=0.2))
               for _ in range(runs)]
    finally:
        simulation.kernels, airflow.kernels = saved
    return res[0], float(np.median([r.run_time for r in res]))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--runs", type=int, default=5)
    ap.add_argument("--days", type=int, default=3)
    args = ap.parse_args(argv)

    backends = {"python": active.load_backend("python")}
    try:
        backends["cython"] = active.load_backend("cython")
    except ImportError:
        print("compiled kernels not built; timing the fallback only")
    weather = WeatherSeries.from_csv(data_file("weather_tropical.csv"))
    start = weather.start
    end = start + np.timedelta64(args.days, "D")

    print(f"{'building':<16}{'strategy':<13}" + "".join(f"{b:>12}" for b in backends)
          + f"{'ratio':>9}{'max |dT|':>11}")
    t0 = time.perf_counter()
    for name in ("dwelling_closed", "dwelling_open"):
        building = load_building(data_file(name))
        for strategy in simulation.STRATEGIES:
            out = {b: _run(mod, building, weather, start, end, strategy, args.runs)
                   for b, mod in backends.items()}
            times = [out[b][1] for b in backends]
            line = f"{name:<16}{strategy:<13}" + "".join(f"{t * 1e3:>10.2f}ms" for t in times)
            if "cython" in out:
                diff = np.max(np.abs(out["cython"][0].t_air - out["python"][0].t_air))
                line += f"{out['python'][1] / out['cython'][1]:>8.1f}x{diff:>11.2e}"
            print(line)
    print(f"total {time.perf_counter() - t0:.1f} s")


if __name__ == "__main__":
    main()
