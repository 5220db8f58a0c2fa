"""Acceptance criteria 1-10.

Each test records one PASS/FAIL line (printed in the terminal summary by
``conftest.py``) and then asserts. Tolerances are the contract values.
"""
import time
import warnings

import numpy as np
import pytest

from thermored import balred
from thermored.airflow import FlowSchedule, Network, Opening
from thermored.cli import data_file, order_sweep
from thermored.errors import MinimalityWarning
from thermored.simulation import RunOptions, deviation, fit_timing_model, simulate_building
from thermored.statespace import dc_gain, freqresp, is_stable, simulate
from thermored.tvreduction import separate_reduce

from conftest import random_systems
from oracles import reduce_every_step

RESULTS = {}
GRID = np.logspace(-4, 4, 200)
EPS_SWEEP = (0.05, 0.1, 0.2, 0.4, 0.8)
TIMING_RUNS = 5


def record(n, title, ok, detail):
    RESULTS[n] = (bool(ok), title, detail)
    assert ok, f"criterion {n} ({title}): {detail}"


def span(weather, days):
    return weather.start, weather.start + np.timedelta64(days * 86400, "s")


def median_run(building, weather, start, end, options, runs=TIMING_RUNS):
    results = [simulate_building(building, weather, start, end, options) for _ in range(runs)]
    return results[0], float(np.median([r.run_time for r in results]))


@pytest.fixture(scope="module")
def suite_systems():
    # 100 random stable systems, n <= 30, SISO and MIMO, some with feedthrough
    return random_systems(100, seed=2024, n_max=30)


@pytest.fixture(scope="module")
def reductions(suite_systems):
    """Balance every system and truncate at every admissible order."""
    out = []
    t0 = time.perf_counter()
    for m in suite_systems:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", MinimalityWarning)
            bal = balred.balance(m)
        out.append((m, bal, [balred.truncate(bal, m, nr) for nr in range(1, bal.rank + 1)]))
    return out, time.perf_counter() - t0


def test_criterion_01_gramians(suite_systems):
    t0 = time.perf_counter()
    worst_res, worst_bal = 0.0, 0.0
    for m in suite_systems:
        Wc, Wo = balred.gramians(m)
        for A, W, Q in ((m.A, Wc, m.B @ m.B.T), (m.A.T, Wo, m.C.T @ m.C)):
            r = np.linalg.norm(A @ W + W @ A.T + Q) / (
                np.linalg.norm(A) * np.linalg.norm(W) + np.linalg.norm(Q))
            worst_res = max(worst_res, r)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", MinimalityWarning)
            bal = balred.balance(m)
        Wcb, Wob = balred.gramians(bal.balanced)
        S = np.diag(bal.hsv[:bal.rank])
        for Wb in (Wcb, Wob):
            worst_bal = max(worst_bal, np.abs(Wb - S).max() / bal.hsv[0])
    elapsed = time.perf_counter() - t0
    record(1, "Lyapunov/Gramian suite", worst_res <= 1e-8 and worst_bal <= 1e-8 and elapsed < 30,
           f"max scaled residual {worst_res:.2e}, balanced-Gramian error {worst_bal:.2e} "
           f"(rel. sigma_1), {elapsed:.1f} s")


def test_criterion_02_error_bound(reductions):
    data, setup = reductions
    t0 = time.perf_counter()
    worst, count = -np.inf, 0
    for m, bal, reds in data:
        g = freqresp(m, GRID)
        for red in reds:
            diff = g - freqresp(red.model, GRID)
            err = max(np.linalg.svd(d, compute_uv=False)[0] for d in diff)
            worst = max(worst, err - (2 * bal.hsv[red.nr:].sum() + 1e-6))
            count += 1
    elapsed = setup + time.perf_counter() - t0
    record(2, "H-inf error bound", worst <= 0 and elapsed < 60,
           f"{count} reductions, max (sweep error - bound) {worst:.2e}, {elapsed:.1f} s")


def test_criterion_03_dc_gain(reductions):
    data, _ = reductions
    worst = 0.0
    for m, _, reds in data:
        g0 = dc_gain(m)
        for red in reds:
            worst = max(worst, np.linalg.norm(dc_gain(red.model) - g0) / np.linalg.norm(g0))
    record(3, "DC-gain preservation", worst <= 1e-8, f"max relative DC-gain error {worst:.2e}")


def test_criterion_04_conditional_oracle(two_zone, weather):
    t0 = time.perf_counter()
    sched = FlowSchedule.from_csv(data_file("two_zone_schedule.csv"))
    start, end = span(weather, 2)
    zero = simulate_building(two_zone, weather, start, end,
                             RunOptions("conditional", flow_tolerance=0.0, coupling_tol=1e-13),
                             sched)
    ref = reduce_every_step(two_zone, weather, start, 48, sched, 0.2)
    err = float(np.max(np.abs(zero.t_air - ref)))
    lti = simulate_building(two_zone, weather, start, end, RunOptions("reduce-lti"), sched)
    inf = simulate_building(two_zone, weather, start, end,
                            RunOptions("conditional", flow_tolerance=np.inf), sched)
    bitwise = np.array_equal(lti.t_air, inf.t_air)
    elapsed = time.perf_counter() - t0
    record(4, "conditional-strategy oracle", err <= 1e-8 and bitwise and elapsed < 10,
           f"tol=0 vs re-reduce-every-step {err:.2e} C ({sum(zero.reductions)} reductions), "
           f"tol=inf bitwise {'equal' if bitwise else 'DIFFERENT'}, {elapsed:.1f} s")


def test_criterion_05_separate_fixed_point(open_building, weather):
    t0 = time.perf_counter()
    eps_it = 1e-3
    res = simulate_building(open_building, weather, *span(weather, 7),
                            RunOptions("separate", eps=0.4, iteration_eps=eps_it, trace=True))
    dt = 3600.0
    worst1 = worst4 = 0.0
    for z, zone in enumerate(open_building.zones):
        crm = separate_reduce(zone, 0.4, eps_it, 50, zone.input_scale)
        env = crm.envelope
        M = np.eye(env.nr) - dt * env.Ar
        a21 = zone.A0[zone.air, :zone.air]
        for step in res.trace:
            r = step[z]
            ext_in = np.append(r["u"], r["s_in"])
            ext = np.append(r["u"], r["x2"])
            x1_hat = env.Cr @ r["x"] + env.Dr @ ext_in
            # envelope update with the converged air temperature
            x_sub = np.linalg.solve(M, r["x_prev"] + dt * env.Br @ ext)
            x1_sub = env.Cr @ x_sub + env.Dr @ ext
            worst1 = max(worst1, np.max(np.abs(x1_sub - x1_hat)))
            # air update with the converged envelope temperatures
            A, B = zone.matrices(r["inflows"])
            x2_sub = (r["x2_prev"] + dt * (B[zone.air] @ r["u"] + a21 @ x1_sub)) / \
                (1 - dt * A[zone.air, zone.air])
            worst4 = max(worst4, abs(x2_sub - r["x2"]))
    its = int(res.iterations.max())
    elapsed = time.perf_counter() - t0
    ok = its <= 50 and res.iterations.min() >= 1 and worst1 <= eps_it and worst4 <= eps_it \
        and elapsed < 120
    record(5, "separate-strategy fixed point", ok,
           f"max iterations {its}, envelope re-substitution {worst1:.2e} C, air "
           f"re-substitution {worst4:.2e} C, {len(res.trace)} steps, {elapsed:.1f} s")


def test_criterion_06_closed_accuracy(closed_building, weather):
    full = simulate_building(closed_building, weather, *span(weather, 3), RunOptions("full"))
    red = simulate_building(closed_building, weather, *span(weather, 3),
                            RunOptions("reduce-lti", eps=0.2))
    mx, _ = deviation(red, full)
    band = all(27 <= n <= 69 for n in full.full_orders)
    record(6, "closed-building accuracy", band and np.all(mx < 0.2),
           f"orders {full.full_orders} -> {red.orders}, per-zone max |dT| "
           f"{np.array2string(mx, precision=3)} C")


def test_criterion_07_speedup(closed_building, open_building, weather):
    start, end = span(weather, 3)
    _, t_full = median_run(closed_building, weather, start, end, RunOptions("full"))
    _, t_red = median_run(closed_building, weather, start, end, RunOptions("reduce-lti", eps=0.2))
    start, end = span(weather, 7)
    _, t_ofull = median_run(open_building, weather, start, end, RunOptions("full"))
    _, t_sep = median_run(open_building, weather, start, end, RunOptions("separate", eps=0.4))
    closed, opened = t_full / t_red, t_ofull / t_sep
    record(7, "speedup ratios", closed >= 2.0 and opened >= 1.5,
           f"closed reduce-lti eps 0.2: {closed:.2f}x ({t_full * 1e3:.1f} -> "
           f"{t_red * 1e3:.1f} ms); open separate eps 0.4: {opened:.2f}x "
           f"({t_ofull * 1e3:.1f} -> {t_sep * 1e3:.1f} ms); median of {TIMING_RUNS}")


def test_criterion_08_timing_model(weather):
    orders = [5, 10, 20, 40]
    times = order_sweep(orders, weather, weather.start, weather.end, runs=3)
    fit = fit_timing_model(orders, times)
    record(8, "cubic timing model", fit.r2 >= 0.9,
           f"R^2 {fit.r2:.3f}, t_f {fit.t_f * 1e3:.2f} ms, c {fit.c:.3g} s; times (ms) "
           + ", ".join(f"{t * 1e3:.1f}" for t in times))


def test_criterion_09_tradeoff(closed_building, weather):
    start, end = span(weather, 3)
    full = simulate_building(closed_building, weather, start, end, RunOptions("full"))
    stds, totals = [], []
    for eps in EPS_SWEEP:
        res = simulate_building(closed_building, weather, start, end,
                                RunOptions("reduce-lti", eps=eps))
        _, sd = deviation(res, full)
        stds.append(float(np.sqrt(np.mean(sd ** 2))))
        totals.append(int(sum(res.orders)))
    ok = all(a <= b for a, b in zip(stds, stds[1:])) and \
        all(a >= b for a, b in zip(totals, totals[1:]))
    record(9, "trade-off monotonicity", ok,
           "eps " + "/".join(f"{e:g}" for e in EPS_SWEEP) + ": std "
           + ", ".join(f"{s:.4f}" for s in stds) + f"; total order {totals}")


def test_criterion_10_physical_sanity(two_zone, closed_building, open_building, weather):
    worst_eq = worst_row = 0.0
    stable = True
    for building in (two_zone, closed_building, open_building):
        for zone in building.zones:
            K, Kb = zone.conductance_network()
            worst_row = max(worst_row, np.max(np.abs(K.sum(1) + Kb.sum(1)) / np.abs(np.diag(K))))
            stable &= is_stable(zone.A0) and is_stable(
                zone.matrices(np.full(len(zone.flow_terms), 0.5))[0])
            model = zone.model_for(None)
            u = np.where(zone.temperature_inputs, 24.0, 0.0)
            tau = 1.0 / np.min(np.abs(np.linalg.eigvals(model.A).real))
            x = simulate(model, np.tile(u, (100, 1)), np.full(zone.order, 10.0), dt=tau).states[-1]
            worst_eq = max(worst_eq, np.max(np.abs(x - 24.0)))
    # every network solve of a 7-day open-building run, plus randomized networks
    res = simulate_building(open_building, weather, *span(weather, 7), RunOptions("full"))
    worst_mass = res.mass_residual
    rng = np.random.default_rng(10)
    for _ in range(50):
        nz = int(rng.integers(1, 7))
        names = [f"z{i}" for i in range(nz)]
        ops = [Opening(f"e{i}", "exterior", names[i], 0.6, rng.uniform(0.05, 1.0),
                       rng.uniform(0.2, 3.0), rng.uniform(-0.5, 0.8), rng.uniform(0, 360))
               for i in range(nz)]
        ops += [Opening(f"i{i}", names[i], names[i + 1], 0.6, rng.uniform(0.1, 2.0),
                        rng.uniform(0.5, 2.0)) for i in range(nz - 1)]
        net = Network(ops, names)
        st = net.solve(rng.uniform(18, 36, nz), rng.uniform(18, 34), rng.uniform(0, 8),
                       rng.uniform(0, 360))
        worst_mass = max(worst_mass, np.max(np.abs(net.incidence @ st.flows)))
    ok = worst_eq <= 1e-6 and worst_row <= 1e-12 and stable and worst_mass <= 1e-9
    record(10, "physical sanity", ok,
           f"equilibrium {worst_eq:.1e} C, row sums {worst_row:.1e} (rel.), "
           f"{'all' if stable else 'NOT all'} A stable, mass balance {worst_mass:.1e} kg/s")
