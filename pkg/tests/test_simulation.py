import numpy as np
import pytest

from thermored.airflow import FlowSchedule, schedule_flows
from thermored.building import WEATHER_FIELDS, WeatherSeries
from thermored.cli import data_file
from thermored.errors import ConfigError, RangeError
from thermored.simulation import (STRATEGIES, RunOptions, deviation, fit_timing_model,
                                  simulate_building, steady_state)

from oracles import reduce_every_step

DT = 3600.0


@pytest.fixture(scope="module")
def schedule():
    return FlowSchedule.from_csv(data_file("two_zone_schedule.csv"))


def days(weather, n):
    return weather.start, weather.start + np.timedelta64(int(n * 86400), "s")


@pytest.mark.parametrize("kw", [dict(strategy="fastest"), dict(eps=-0.1), dict(dt=0.0),
                                dict(flow_tolerance=0.01),
                                dict(strategy="conditional", flow_tolerance=-1.0),
                                dict(iteration_eps=0.0), dict(max_iterations=0)])
def test_run_options_validation(kw):
    with pytest.raises(ConfigError):
        RunOptions(**kw)


def test_horizon_checks(closed_building, weather):
    with pytest.raises(ConfigError):
        simulate_building(closed_building, weather, weather.start,
                          weather.start + np.timedelta64(5400, "s"))
    with pytest.raises(ConfigError):
        simulate_building(closed_building, weather, weather.start, weather.start)
    with pytest.raises(RangeError):
        simulate_building(closed_building, weather, weather.start,
                          weather.end + np.timedelta64(3600, "s"))


@pytest.mark.parametrize("strategy", STRATEGIES)
def test_runs_are_deterministic(strategy, two_zone, weather, schedule):
    opts = RunOptions(strategy)
    a = simulate_building(two_zone, weather, *days(weather, 1), opts, schedule)
    b = simulate_building(two_zone, weather, *days(weather, 1), opts, schedule)
    np.testing.assert_array_equal(a.t_air, b.t_air)
    assert a.times.shape == (24,) and a.t_air.shape == (24, 2)
    assert a.times[0] == weather.start + np.timedelta64(3600, "s")


def _constant_weather(weather):
    data = np.zeros((len(weather.times), len(WEATHER_FIELDS)))
    data[:, WEATHER_FIELDS.index("t_out")] = 25.0
    data[:, WEATHER_FIELDS.index("t_sky")] = 25.0
    data[:, WEATHER_FIELDS.index("rh")] = 70.0
    return WeatherSeries(weather.times, data)


@pytest.mark.parametrize("strategy", STRATEGIES)
def test_steady_inputs_stay_steady(strategy, closed_building, weather):
    w = _constant_weather(weather)
    res = simulate_building(closed_building, w, *days(w, 2), RunOptions(strategy))
    np.testing.assert_allclose(res.t_air, np.broadcast_to(res.initial_t_air, res.t_air.shape),
                               atol=1e-6)


def test_steady_state_isothermal_without_gains(closed_building, weather):
    inputs = [np.where(z.temperature_inputs, 25.0, 0.0) for z in closed_building.zones]
    for x in steady_state(closed_building, inputs, np.zeros(0)):
        np.testing.assert_allclose(x, 25.0, atol=1e-9)


def test_reduce_lti_at_eps_zero_matches_full(closed_building, weather):
    full = simulate_building(closed_building, weather, *days(weather, 3), RunOptions("full"))
    red = simulate_building(closed_building, weather, *days(weather, 3),
                            RunOptions("reduce-lti", eps=0.0))
    # only states below the minimality threshold are dropped
    assert all(full.orders[i] - 1 <= n <= full.orders[i] for i, n in enumerate(red.orders))
    assert np.max(np.abs(red.t_air - full.t_air)) < 1e-6


def test_schedule_flows_used(two_zone, weather, schedule):
    res = simulate_building(two_zone, weather, *days(weather, 1), RunOptions("full"), schedule)
    ref = schedule_flows(schedule.for_links(two_zone.link_ids), res.times)
    np.testing.assert_array_equal(res.flows, ref)
    assert np.all(res.airflow_iterations == 1)


def test_conditional_infinite_tolerance_equals_reduce_lti(two_zone, weather, schedule):
    span = days(weather, 2)
    a = simulate_building(two_zone, weather, *span, RunOptions("reduce-lti"), schedule)
    b = simulate_building(two_zone, weather, *span,
                          RunOptions("conditional", flow_tolerance=np.inf), schedule)
    np.testing.assert_array_equal(a.t_air, b.t_air)
    assert b.reductions == (1, 1)


def test_conditional_zero_tolerance_matches_per_step_oracle(two_zone, weather, schedule):
    span = days(weather, 2)
    res = simulate_building(two_zone, weather, *span,
                            RunOptions("conditional", flow_tolerance=0.0, coupling_tol=1e-13),
                            schedule)
    ref = reduce_every_step(two_zone, weather, span[0], 48, schedule, 0.2)
    assert min(res.reductions) > 24
    np.testing.assert_allclose(res.t_air, ref, atol=1e-8)


def test_model_swap_discontinuity_small(open_building, weather):
    # flows step at t*; the conditional model is swapped there exactly once
    link_ids = open_building.link_ids
    t_star = weather.start + np.timedelta64(30 * 3600, "s")
    times = np.array([weather.start, t_star, weather.end], dtype="datetime64[s]")
    values = np.array([[0.05, -0.02, 0.04], [0.25, -0.1, 0.2], [0.25, -0.1, 0.2]])
    sched = FlowSchedule(times, link_ids, values)
    span = days(weather, 3)
    full = simulate_building(open_building, weather, *span, RunOptions("full"), sched)
    cond = simulate_building(open_building, weather, *span,
                             RunOptions("conditional", eps=0.2, flow_tolerance=0.01), sched)
    assert max(cond.reductions) == 2
    k = int(np.flatnonzero(cond.times == t_star)[0])
    dev = cond.t_air - full.t_air
    assert np.max(np.abs(dev[k] - dev[k - 1])) <= 0.05


def test_separate_iterations_recorded(two_zone, weather, schedule):
    res = simulate_building(two_zone, weather, *days(weather, 1),
                            RunOptions("separate", iteration_eps=1e-4), schedule)
    assert res.iterations.min() >= 1
    assert res.iterations.max() <= 50


def test_trace_records_every_step(two_zone, weather, schedule):
    res = simulate_building(two_zone, weather, *days(weather, 0.5),
                            RunOptions("separate", trace=True), schedule)
    assert len(res.trace) == 12 and len(res.trace[0]) == 2
    assert {"x_prev", "x", "u", "x2", "x2_prev"} <= set(res.trace[0][0])


def test_deviation(two_zone, weather, schedule):
    a = simulate_building(two_zone, weather, *days(weather, 1), RunOptions("full"), schedule)
    mx, sd = deviation(a, a)
    np.testing.assert_array_equal(mx, 0.0)
    np.testing.assert_array_equal(sd, 0.0)
    b = simulate_building(two_zone, weather, *days(weather, 2), RunOptions("full"), schedule)
    with pytest.raises(ConfigError):
        deviation(a, b)


def test_open_building_network_run(open_building, weather):
    res = simulate_building(open_building, weather, *days(weather, 1), RunOptions("full"))
    assert res.mass_residual <= 1e-9
    assert np.any(res.flows != 0.0)
    assert np.all((res.airflow_iterations >= 1) & (res.airflow_iterations <= 3))


def test_fit_timing_model_recovers_coefficients():
    orders = [(5,), (10,), (20,), (40,)]
    t = [0.01 + 2e-7 * n[0] ** 3 for n in orders]
    fit = fit_timing_model(orders, t)
    assert fit.t_f == pytest.approx(0.01, rel=1e-9)
    assert fit.c == pytest.approx(2e-7, rel=1e-9)
    assert fit.r2 == pytest.approx(1.0)
    multi = fit_timing_model([(3, 4), (5, 6)], [1.0, 2.0])
    assert multi.c == pytest.approx(1.0 / (341 - 91))
    with pytest.raises(ConfigError):
        fit_timing_model([(5,)], [1.0])
