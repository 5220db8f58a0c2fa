"""Whole-building simulation under the four strategies.

``full``
    Full nodal model of every zone, refactored whenever its inflows change.
``reduce-lti``
    Each zone reduced once, at the airflows of the first step.
``conditional``
    Each zone re-reduced when one of its airflows drifts by more than
    ``flow_tolerance`` from the value at the last reduction.
``separate``
    Envelope of each zone reduced once; the air node stays full order and
    both are coupled by fixed-point iteration.

Zones are advanced sequentially within a step, each using the latest air
temperatures of its neighbours, and swept until no coupling input moves
by ``coupling_tol`` or more.
"""
import time
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import kernels
from .airflow import FlowSchedule, Network, schedule_flows
from .building import WEATHER_FIELDS, input_series
from .errors import ConfigError, ConvergenceError, RangeError, RankWarning, StepError
from .statespace import DEFAULT_DT
from .tvreduction import (DEFAULT_ITERATION_EPS, DEFAULT_MAX_ITERATIONS, ConditionalReducer,
                          CoupledState, separate_reduce)

STRATEGIES = ("full", "reduce-lti", "conditional", "separate")


@dataclass
class RunOptions:
    """Strategy and numerical settings of one simulation run."""

    strategy: str = "full"
    eps: float = 0.2
    flow_tolerance: float = None
    iteration_eps: float = DEFAULT_ITERATION_EPS
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    dt: float = DEFAULT_DT
    coupling_tol: float = 1e-6
    max_sweeps: int = 200
    airflow_iterations: int = 3
    airflow_rtol: float = 0.01
    trace: bool = False

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}; choose from {STRATEGIES}")
        if not self.eps >= 0:
            raise ConfigError("eps must be non-negative")
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if self.flow_tolerance is not None and self.strategy != "conditional":
            raise ConfigError("flow_tolerance only applies to the conditional strategy")
        if self.flow_tolerance is not None and not self.flow_tolerance >= 0:
            raise ConfigError("flow_tolerance must be non-negative")
        if not self.iteration_eps > 0:
            raise ConfigError("iteration_eps must be positive")
        if self.max_iterations < 1 or self.airflow_iterations < 1 or self.max_sweeps < 1:
            raise ConfigError("iteration limits must be at least 1")


@dataclass
class SimulationResult:
    """Air temperatures, flows and solver statistics of one run.

    Row ``j`` belongs to ``times[j]`` (the end of step ``j``).
    ``iterations[j, z]`` is the largest inner iteration count of zone ``z``
    during step ``j`` (1 for strategies without an inner loop).
    """

    strategy: str
    times: np.ndarray
    zone_names: tuple
    link_ids: tuple
    t_air: np.ndarray
    flows: np.ndarray
    sweeps: np.ndarray
    iterations: np.ndarray
    airflow_iterations: np.ndarray
    full_orders: tuple
    orders: tuple
    bounds: tuple
    setup_time: float = 0.0
    run_time: float = 0.0
    reductions: tuple = ()
    mass_residual: float = 0.0
    initial_t_air: np.ndarray = None
    trace: list = field(default_factory=list, repr=False)


def _flow_matrices(zone):
    links = np.array([t.link for t in zone.flow_terms], dtype=int)
    signs = np.array([t.sign for t in zone.flow_terms], dtype=float)
    return links, signs


def _zone_inflows(zone, flows):
    # flows: (..., L) signed link flows -> (..., nf) inflows into the zone
    links, signs = _flow_matrices(zone)
    if links.size == 0:
        return np.zeros(np.shape(flows)[:-1] + (0,))
    return np.maximum(np.asarray(flows)[..., links] * signs, 0.0)


def _zone_link_flows(zone, flows):
    links, signs = _flow_matrices(zone)
    return np.asarray(flows, dtype=float)[links] * signs if links.size else np.zeros(0)


def steady_state(building, inputs, flows, tol=1e-11, max_sweeps=1000):
    """Coupled steady state of all zones for one input row per zone.

    Gauss-Seidel over zones; returns the list of nodal state vectors.
    """
    coupling = building.coupling
    matrices = [z.matrices(_zone_inflows(z, flows)) for z in building.zones]
    t_air = np.array([u[0] for u in inputs], dtype=float)   # start from T_out
    states = [None] * len(building.zones)
    for _ in range(max_sweeps):
        delta = 0.0
        for z, (A, B) in enumerate(matrices):
            u = np.array(inputs[z], dtype=float)
            for col, src in coupling[z]:
                u[col] = t_air[src]
            x = -np.linalg.solve(A, B @ u)
            states[z] = x
            delta = max(delta, abs(x[-1] - t_air[z]))
            t_air[z] = x[-1]
        if delta < tol:
            return states
    raise ConvergenceError("steady-state initialisation did not converge", residual=delta)


class _Run:
    # mutable state of one simulation run
    def __init__(self, building, weather, start, end, options, schedule):
        self.b = building
        self.opt = options
        start = np.datetime64(start, "s")
        end = np.datetime64(end, "s")
        span = (end - start).astype(float)
        steps = span / options.dt
        if span <= 0 or abs(steps - round(steps)) > 1e-9:
            raise ConfigError(f"horizon {start}..{end} is not a positive multiple of dt")
        self.K = int(round(steps))
        offsets = (np.arange(self.K + 1) * options.dt).astype("timedelta64[s]")
        self.times = start + offsets
        if start < weather.start or end > weather.end:
            raise RangeError(f"simulation horizon {start}..{end} outside weather range "
                             f"{weather.start}..{weather.end}")
        self.weather = weather.sample(self.times)
        self.inputs = input_series(weather, building, self.times)
        L = len(building.links)
        self.network = None
        if schedule is not None:
            sched = schedule.for_links(building.link_ids) if isinstance(schedule, FlowSchedule) \
                else schedule
            self.flows = schedule_flows(sched, self.times).reshape(self.K + 1, L)
        elif any(not link.closed for link in building.links):
            self.network = Network(building.links, building.zone_names)
            self.flows = np.zeros((self.K + 1, L))
        else:
            self.flows = np.zeros((self.K + 1, L))
        self.mass_residual = 0.0
        self.pressures = None
        self.flow_passes = np.zeros(self.K + 1, dtype=np.intc)
        self.coupling = building.coupling

    def _weather(self, k, name):
        return self.weather[k, WEATHER_FIELDS.index(name)]

    def solve_flows(self, k, t_air):
        st = self.network.solve(t_air, self._weather(k, "t_out"), self._weather(k, "wind_speed"),
                                self._weather(k, "wind_dir"), self.pressures)
        self.pressures = st.pressures
        self.mass_residual = max(self.mass_residual, st.residual)
        return st.flows

    def initial_state(self):
        u0 = [U[0] for U in self.inputs]
        if self.network is None:
            return steady_state(self.b, u0, self.flows[0])
        t_air = np.array([u[0] for u in u0])
        for _ in range(50):
            flows = self.solve_flows(0, t_air)
            states = steady_state(self.b, u0, flows)
            new = np.array([x[-1] for x in states])
            done = np.max(np.abs(new - t_air)) < 1e-9
            t_air = new
            if done:
                break
        self.flows[0] = flows
        return states


def _air_row(red, air):
    return red.Cr[air], red.Dr[air]


def _lti_kernel(red, zone, x_r, dt):
    c, d = _air_row(red, zone.air)
    return kernels.LTIZone(red.Ar, red.Br, c, d, dt, x_r)


def simulate_building(building, weather, start, end, options=None, schedule=None):
    """Simulate ``building`` from ``start`` to ``end`` (datetime64 or ISO strings).

    Airflows come from ``schedule`` when given, otherwise from the pressure
    network if the building has open links, otherwise they are zero. The
    initial state is the coupled steady state of the inputs at ``start``.
    """
    opt = options or RunOptions()
    run = _Run(building, weather, start, end, opt, schedule)
    zones = building.zones
    nz, K = len(zones), run.K

    t0 = time.perf_counter()
    x0 = run.initial_state()
    u0 = [U[0].copy() for U in run.inputs]
    for z, pairs in enumerate(run.coupling):
        for col, src in pairs:
            u0[z][col] = x0[src][-1]
    kern, orders, bounds, extra = [], [], [], []
    for z, zone in enumerate(zones):
        if opt.strategy == "full":
            cols = [t.source_col for t in zone.flow_terms]
            kern.append(kernels.TVZone(zone.A0, zone.B0, zone.air, cols, zone.coef, opt.dt, x0[z]))
            orders.append(zone.order)
            bounds.append(0.0)
        elif opt.strategy in ("reduce-lti", "conditional"):
            tol = np.inf if opt.strategy == "reduce-lti" else (
                np.inf if opt.flow_tolerance is None else opt.flow_tolerance)
            reducer = ConditionalReducer(opt.eps, tol, input_scale=zone.input_scale)
            reducer.rereduce(zone.model_for(run.flows[0]), _zone_link_flows(zone, run.flows[0]),
                             x0[z], u0[z])
            kern.append(_lti_kernel(reducer.current, zone, reducer.x_r, opt.dt))
            orders.append(reducer.current.nr)
            bounds.append(reducer.current.bound)
            extra.append(reducer)
        else:
            crm = separate_reduce(zone, opt.eps, opt.iteration_eps, opt.max_iterations,
                                  zone.input_scale)
            env = crm.envelope
            a21 = zone.A0[zone.air, :zone.air]
            st = CoupledState.from_temperatures(crm, x0[z][:-1], x0[z][-1:], u0[z])
            cols = [t.source_col for t in zone.flow_terms]
            kern.append(kernels.SeparateZone(env.Ar, env.Br, a21 @ env.Cr, a21 @ env.Dr,
                                             zone.A0[zone.air, zone.air], zone.B0[zone.air],
                                             cols, zone.coef, opt.dt, st.x_r, x0[z][-1],
                                             opt.iteration_eps, opt.max_iterations))
            orders.append(env.nr + 1)
            bounds.append(env.bound)
            extra.append(crm)
    Q = [np.ascontiguousarray(_zone_inflows(zone, run.flows)) for zone in zones]
    for z, zone in enumerate(zones):
        cols = [c for c, _ in run.coupling[z]]
        srcs = [s for _, s in run.coupling[z]]
        kern[z].bind(run.inputs[z], Q[z], cols, srcs)
    setup = time.perf_counter() - t0

    t_air = np.array([x[-1] for x in x0], dtype=float)
    initial = t_air.copy()
    out_t = np.zeros((K, nz))
    out_sweeps = np.zeros(K, dtype=np.intc)
    out_iters = np.zeros((K, nz), dtype=np.intc)
    traces = []
    u_prev = [u.copy() for u in u0]
    T_prev = [x.copy() for x in x0]

    stepwise = opt.trace or run.network is not None or opt.strategy == "conditional"
    fm = [_flow_matrices(zone) for zone in zones]
    t0 = time.perf_counter()
    if not stepwise:
        status, k = kernels.run_building(kern, t_air, 1, K + 1, opt.coupling_tol, opt.max_sweeps,
                                         out_t, out_sweeps, out_iters, True)
        _check(status, k, run, kern)
        run.flow_passes[1:] = 1
    else:
        for k in range(1, K + 1):
            row = k - 1
            if run.network is not None:
                flows = run.solve_flows(k, t_air)
            else:
                flows = run.flows[k]
            for p in range(opt.airflow_iterations):
                if run.network is not None:
                    for z, (links, signs) in enumerate(fm):
                        if links.size:
                            np.maximum(flows[links] * signs, 0.0, out=Q[z][k])
                if opt.strategy == "conditional":
                    _maybe_rereduce(run, kern, extra, zones, flows, T_prev, u_prev, Q, opt)
                status, kk = kernels.run_building(kern, t_air, k, k + 1, opt.coupling_tol,
                                                  opt.max_sweeps, out_t[row:row + 1],
                                                  out_sweeps[row:row + 1],
                                                  out_iters[row:row + 1], False)
                _check(status, kk, run, kern)
                run.flow_passes[k] = p + 1
                if run.network is None:
                    break
                new = run.solve_flows(k, t_air)
                scale = max(np.max(np.abs(flows)), 1e-12)
                change = np.max(np.abs(new - flows)) / scale
                if change < opt.airflow_rtol or p == opt.airflow_iterations - 1:
                    break
                flows = new
            run.flows[k] = flows
            if opt.trace:
                traces.append(_snapshot(kern, zones, k, flows))
            for z, zk in enumerate(kern):
                if opt.strategy == "conditional":
                    u = np.array(zk.U[k])
                    if len(zk.cpl_cols):
                        u[zk.cpl_cols] = zk.used
                    u_prev[z] = u
                zk.commit()
            if opt.strategy == "conditional":
                # rebuilt lazily from the reduced model when a zone is re-reduced
                T_prev = [None] * nz
    elapsed = time.perf_counter() - t0

    if opt.strategy == "conditional":
        reductions = tuple(r.reductions for r in extra)
    elif opt.strategy == "reduce-lti":
        reductions = tuple(1 for _ in zones)
    else:
        reductions = tuple(0 for _ in zones)
    return SimulationResult(opt.strategy, run.times[1:], building.zone_names, building.link_ids,
                            out_t, run.flows[1:].copy(), out_sweeps, out_iters,
                            run.flow_passes[1:].copy(), building.orders, tuple(orders),
                            tuple(bounds), setup, elapsed, reductions, run.mass_residual,
                            initial, traces)


def _maybe_rereduce(run, kern, reducers, zones, flows, T_prev, u_prev, Q, opt):
    for z, zone in enumerate(zones):
        reducer = reducers[z]
        zf = _zone_link_flows(zone, flows)
        if not reducer.needs_update(zf):
            continue
        old = kern[z]
        if T_prev[z] is None:
            red = reducer.current
            T_prev[z] = red.Cr @ np.asarray(old.x_prev) + red.Dr @ u_prev[z]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RankWarning)
            reducer.rereduce(zone.model_for(flows), zf, T_prev[z], u_prev[z])
        new = _lti_kernel(reducer.current, zone, reducer.x_r, opt.dt)
        new.bind(old.U, Q[z], old.cpl_cols, old.cpl_srcs)
        if len(old.cpl_cols):
            new.used[:] = old.used
        kern[z] = new
        T_prev[z] = None


def _snapshot(kern, zones, k, flows):
    snap = []
    for z, zk in enumerate(kern):
        u = np.array(zk.U[k])
        if len(zk.cpl_cols):
            u[zk.cpl_cols] = zk.used
        rec = {"x_prev": np.array(zk.x_prev), "x": np.array(zk.x), "u": u,
               "inflows": _zone_inflows(zones[z], flows), "iterations": zk.iterations}
        if hasattr(zk, "x2"):
            rec.update(x2_prev=zk.x2_prev, x2=zk.x2, s_in=zk.s_in)
        snap.append(rec)
    return snap


def _check(status, k, run, kern):
    if status == kernels.STATUS_OK:
        return
    when = str(run.times[k]) if 0 <= k < len(run.times) else str(k)
    if status == kernels.STATUS_INNER:
        worst = max((getattr(zk, "residual", 0.0) for zk in kern), default=0.0)
        raise ConvergenceError(f"coupled air/envelope iteration did not converge at {when}",
                               residual=worst, where=when)
    if status == kernels.STATUS_SWEEPS:
        raise ConvergenceError(f"inter-zone sweeps did not converge at {when}", where=when)
    raise StepError(f"singular iteration matrix at {when}")


def deviation(result, baseline):
    """Per-zone ``(max |dT|, std(dT))`` of ``result`` against ``baseline``."""
    if result.t_air.shape != baseline.t_air.shape or \
            not np.array_equal(result.times, baseline.times):
        raise ConfigError("runs cover different horizons or zones")
    diff = result.t_air - baseline.t_air
    return np.max(np.abs(diff), axis=0), np.std(diff, axis=0)


class TimingFit(NamedTuple):
    t_f: float
    c: float
    r2: float


def fit_timing_model(orders, times):
    """Least-squares fit of ``t = t_f + c * sum(n_i**3)``.

    ``orders`` holds one order vector (or a scalar order) per measurement.
    Returns the intercept, the cubic coefficient and R^2 of the fit.
    """
    x = np.array([np.sum(np.asarray(n, dtype=float) ** 3) for n in orders])
    t = np.asarray(times, dtype=float)
    if x.size != t.size or x.size < 2:
        raise ConfigError("need at least two (orders, time) measurements")
    A = np.column_stack([np.ones_like(x), x])
    (t_f, c), *_ = np.linalg.lstsq(A, t, rcond=None)
    ss_tot = float(np.sum((t - t.mean()) ** 2))
    ss_res = float(np.sum((t - A @ np.array([t_f, c])) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return TimingFit(float(t_f), float(c), r2)
