import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import bisect

from thermored import airflow, kernels
from thermored.airflow import (DP_REG, G, MASS_TOL, FlowSchedule, Network, Opening,
                               air_density, opening_flow, schedule_flows, solve_network,
                               stack_wind_pressure, wind_pressure)
from thermored.errors import ConfigError, ConvergenceError, RangeError


def door(id="d", a="exterior", b="z", area=1.0, **kw):
    return Opening(id, a, b, kw.pop("cd", 0.6), area, **kw)


# --- power law ------------------------------------------------------------------

def test_opening_flow_hand_value():
    assert opening_flow(door(), 1.0, 1.2) == pytest.approx(0.6 * 1.2 * math.sqrt(2 / 1.2),
                                                          rel=1e-12)
    assert opening_flow(door(), 1.0, 1.2) == pytest.approx(0.92952, abs=1e-5)
    assert opening_flow(door(), 0.0, 1.2) == 0.0


@given(dp=st.floats(-500, 500), n=st.sampled_from([0.5, 0.65, 1.0]))
def test_opening_flow_odd(dp, n):
    o = door(exponent=n)
    assert opening_flow(o, -dp, 1.2) == -opening_flow(o, dp, 1.2)


@given(a=st.floats(-100, 100), b=st.floats(-100, 100), n=st.sampled_from([0.5, 0.65, 1.0]))
def test_opening_flow_monotone(a, b, n):
    lo, hi = min(a, b), max(a, b)
    o = door(exponent=n)
    assert opening_flow(o, lo, 1.2) <= opening_flow(o, hi, 1.2)


@pytest.mark.parametrize("n", [0.5, 0.65])
def test_regularization_is_c1(n):
    k = 0.6 * math.sqrt(2.4)
    h = 1e-9
    q_lo, s_lo = kernels.power_law(k, n, DP_REG - h, DP_REG)
    q_hi, s_hi = kernels.power_law(k, n, DP_REG + h, DP_REG)
    assert q_lo == pytest.approx(q_hi, rel=1e-6)
    assert s_lo == pytest.approx(s_hi, rel=1e-6)
    assert s_hi == pytest.approx(n * k * DP_REG ** (n - 1), rel=1e-6)
    _, s0 = kernels.power_law(k, n, 0.0, DP_REG)
    assert np.isfinite(s0) and s0 > 0


def test_power_law_backends_agree():
    dp = np.linspace(-3, 3, 101)
    py = kernels.load_backend("python")
    for n in (0.5, 0.7):
        q, s = py.power_law(0.9, n, dp, DP_REG)
        q2, s2 = kernels.power_law(0.9, n, dp, DP_REG)
        np.testing.assert_allclose(q2, q, rtol=1e-14)
        np.testing.assert_allclose(s2, s, rtol=1e-14)


# --- driving pressures ----------------------------------------------------------

def test_stack_pressure_examples():
    o = door(a="a", b="b", height=1.0)
    assert stack_wind_pressure(o, 25.0, 25.0) == 0.0
    rho = lambda t: 1.2 * 293.15 / (t + 273.15)
    dp = stack_wind_pressure(o, 30.0, 20.0)
    assert dp == pytest.approx(G * (rho(20) - rho(30)), rel=1e-12)
    assert dp == pytest.approx(0.3882, abs=1e-4)


def test_wind_pressure_example():
    o = door(cp=0.6)
    assert wind_pressure(o, 4.0, 0.0, 1.2) == pytest.approx(5.76)
    assert wind_pressure(door(a="a", b="b", cp=0.6), 4.0, 0.0, 1.2) == 0.0
    faced = door(cp=0.6, azimuth=90.0)
    assert wind_pressure(faced, 4.0, 150.0, 1.2) == pytest.approx(5.76 * 0.5)


def test_air_density():
    assert air_density(20.0) == pytest.approx(1.2)
    assert air_density(30.0) < air_density(20.0)


def _random_network(rng, nz):
    names = [f"z{i}" for i in range(nz)]
    openings = []
    for i in range(nz):
        openings.append(Opening(f"e{i}", "exterior", names[i], rng.uniform(0.3, 0.8),
                                rng.uniform(0.05, 1.5), rng.uniform(0.2, 3.0),
                                rng.uniform(-0.6, 0.8),
                                None if i % 2 else rng.uniform(0, 360)))
    for i in range(nz - 1):
        openings.append(Opening(f"i{i}", names[i], names[i + 1], rng.uniform(0.3, 0.8),
                                rng.uniform(0.05, 2.0), rng.uniform(0.2, 2.5)))
    return names, openings


def test_driving_matches_per_opening_route():
    rng = np.random.default_rng(0)
    names, openings = _random_network(rng, 4)
    net = Network(openings, names)
    t_air = rng.uniform(18, 34, 4)
    t_out, ws, wd = 24.0, 3.5, 130.0
    dp, rho_from, rho_to = net.driving(t_air, t_out, ws, wd)
    temp = dict(zip(names, t_air), exterior=t_out)
    for k, o in enumerate(openings):
        ref = stack_wind_pressure(o, temp[o.from_zone], temp[o.to_zone], ws, wd)
        assert dp[k] == pytest.approx(ref, rel=1e-12, abs=1e-14)
        assert rho_from[k] == pytest.approx(air_density(temp[o.from_zone]))
        assert rho_to[k] == pytest.approx(air_density(temp[o.to_zone]))


# --- network solve --------------------------------------------------------------

def test_all_closed():
    names = ["a", "b"]
    st_ = solve_network([door("x", "a", "b", area=0.0), door("y", "exterior", "a", area=0.0)],
                        names, [30.0, 20.0], 25.0, 5.0, 90.0)
    np.testing.assert_array_equal(st_.flows, 0.0)
    np.testing.assert_array_equal(st_.pressures, 0.0)


def _single_zone_stack():
    low = Opening("low", "exterior", "z", 0.6, 0.4, height=0.3)
    high = Opening("high", "z", "exterior", 0.6, 0.4, height=2.5)
    return [low, high]


def _bisection_flows(openings, t_in, t_out):
    temp = {"z": t_in, "exterior": t_out}

    def flow(o, p):
        pf = p if o.from_zone == "z" else 0.0
        pt = p if o.to_zone == "z" else 0.0
        dp = pf - pt + stack_wind_pressure(o, temp[o.from_zone], temp[o.to_zone])
        rho = air_density(temp[o.from_zone] if dp >= 0 else temp[o.to_zone])
        return opening_flow(o, dp, rho)

    def balance(p):
        return sum(flow(o, p) * (1 if o.to_zone == "z" else -1) for o in openings)

    p = bisect(balance, -50.0, 50.0, xtol=1e-14, rtol=1e-15, maxiter=400)
    return p, np.array([flow(o, p) for o in openings])


def test_single_zone_stack_ventilation():
    openings = _single_zone_stack()
    net = Network(openings, ["z"])
    res = net.solve([30.0], 20.0)
    q_in, q_out = res.flows
    # warm zone: inflow at the low opening, outflow at the high one
    assert q_in > 0 and q_out > 0
    assert q_in == pytest.approx(q_out, abs=1e-9)
    assert abs(net.incidence @ res.flows).max() <= MASS_TOL
    p_ref, q_ref = _bisection_flows(openings, 30.0, 20.0)
    np.testing.assert_allclose(res.flows, q_ref, atol=1e-8)
    assert res.pressures[0] == pytest.approx(p_ref, abs=1e-6)


def test_single_zone_cold_reverses():
    res = Network(_single_zone_stack(), ["z"]).solve([15.0], 25.0)
    assert res.flows[0] < 0 and res.flows[1] < 0


@pytest.mark.parametrize("t_in", [20.5, 24.0, 35.0])
def test_single_zone_matches_bisection(t_in):
    openings = [Opening("a", "exterior", "z", 0.6, 0.3, 0.5, 0.0),
                Opening("b", "exterior", "z", 0.65, 0.9, 1.8, 0.0, exponent=0.6),
                Opening("c", "z", "exterior", 0.5, 0.2, 2.9)]
    res = Network(openings, ["z"]).solve([t_in], 20.0)
    _, q_ref = _bisection_flows(openings, t_in, 20.0)
    np.testing.assert_allclose(res.flows, q_ref, atol=1e-8)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31), nz=st.integers(1, 6), ws=st.floats(0, 10),
       wd=st.floats(0, 360))
def test_random_networks_balance(seed, nz, ws, wd):
    rng = np.random.default_rng(seed)
    names, openings = _random_network(rng, nz)
    net = Network(openings, names)
    res = net.solve(rng.uniform(15, 40, nz), rng.uniform(15, 35), ws, wd)
    assert np.max(np.abs(net.incidence @ res.flows)) <= MASS_TOL
    assert res.residual <= MASS_TOL


def test_doubling_areas_keeps_balance_and_signs():
    rng = np.random.default_rng(3)
    names, openings = _random_network(rng, 4)
    doubled = [Opening(o.id, o.from_zone, o.to_zone, o.cd, 2 * o.area, o.height, o.cp,
                       o.azimuth, o.exponent) for o in openings]
    args = (rng.uniform(20, 34, 4), 26.0, 2.0, 45.0)
    a = Network(openings, names).solve(*args)
    net = Network(doubled, names)
    b = net.solve(*args)
    assert np.max(np.abs(net.incidence @ b.flows)) <= MASS_TOL
    np.testing.assert_array_equal(np.sign(a.flows), np.sign(b.flows))


def test_internal_only_component_is_pinned():
    # two zones linked only to each other: pressure level fixed at 0
    openings = [door("ab", "a", "b", area=0.5, height=1.0), door("e", "exterior", "c")]
    net = Network(openings, ["a", "b", "c"])
    res = net.solve([30.0, 20.0, 25.0], 25.0)
    assert np.max(np.abs(net.incidence @ res.flows)) <= MASS_TOL
    assert res.flows[0] == pytest.approx(0.0, abs=1e-9)


def test_warm_start_converges_immediately():
    rng = np.random.default_rng(4)
    names, openings = _random_network(rng, 5)
    net = Network(openings, names)
    args = (rng.uniform(20, 34, 5), 26.0, 3.0, 200.0)
    first = net.solve(*args)
    again = net.solve(*args, p0=first.pressures)
    assert again.iterations <= 1
    np.testing.assert_allclose(again.flows, first.flows, atol=1e-9)


def test_non_convergence_raises():
    rng = np.random.default_rng(5)
    names, openings = _random_network(rng, 5)
    with pytest.raises(ConvergenceError) as err:
        Network(openings, names).solve(rng.uniform(20, 34, 5), 26.0, 6.0, 10.0,
                                       max_iterations=1)
    assert err.value.residual > MASS_TOL


def test_network_backends_agree():
    rng = np.random.default_rng(6)
    names, openings = _random_network(rng, 5)
    net = Network(openings, names)
    args = (rng.uniform(20, 34, 5), 26.0, 4.0, 300.0)
    compiled = net.solve(*args)
    saved = airflow.kernels
    airflow.kernels = kernels.load_backend("python")
    try:
        py = Network(openings, names).solve(*args)
    finally:
        airflow.kernels = saved
    np.testing.assert_allclose(py.flows, compiled.flows, atol=1e-12)
    np.testing.assert_allclose(py.pressures, compiled.pressures, atol=1e-10)


def test_opening_validation():
    with pytest.raises(ConfigError):
        door(cd=0.0)
    with pytest.raises(ConfigError):
        door(area=-1.0)
    with pytest.raises(ConfigError):
        door(exponent=1.5)
    with pytest.raises(ConfigError):
        Opening.from_dict({"id": "x", "from": "a"})
    with pytest.raises(ConfigError):
        Network([door("x", "exterior", "ghost")], ["z"])


# --- schedules ------------------------------------------------------------------

T0 = np.datetime64("2026-01-01T00:00", "s")
HOUR = np.timedelta64(3600, "s")


def test_empty_schedule_is_zero():
    np.testing.assert_array_equal(schedule_flows(FlowSchedule.empty(("a", "b")), T0), [0, 0])


def test_single_record_schedule_is_constant():
    s = FlowSchedule(np.array([T0]), ("a",), [[0.3]])
    assert schedule_flows(s, T0)[0] == 0.3
    with pytest.raises(RangeError):
        schedule_flows(s, T0 + HOUR)


def test_step_schedule_is_right_continuous():
    s = FlowSchedule(np.array([T0, T0 + HOUR, T0 + 2 * HOUR]), ("a",), [[0.1], [0.5], [0.5]])
    np.testing.assert_array_equal(
        schedule_flows(s, [T0, T0 + HOUR - np.timedelta64(1, "s"), T0 + HOUR])[:, 0],
        [0.1, 0.1, 0.5])
    with pytest.raises(RangeError):
        schedule_flows(s, T0 - HOUR)


def test_schedule_csv_holds_missing_links(tmp_path):
    path = tmp_path / "s.csv"
    path.write_text("timestamp,link_id,mass_flow\n"
                    "2026-01-01T00:00,a,0.1\n2026-01-01T00:00,b,0.2\n"
                    "2026-01-01T01:00,a,0.3\n")
    s = FlowSchedule.from_csv(path)
    assert s.link_ids == ("a", "b")
    np.testing.assert_array_equal(s.values, [[0.1, 0.2], [0.3, 0.2]])
    r = s.for_links(("b", "c", "a"))
    np.testing.assert_array_equal(r.values, [[0.2, 0.0, 0.1], [0.2, 0.0, 0.3]])
    with pytest.raises(ConfigError):
        s.for_links(("a",))


@pytest.mark.parametrize("body", ["2026-01-01T00:00,a\n", "yesterday,a,0.1\n",
                                  "2026-01-01T00:00,a,fast\n"])
def test_schedule_csv_errors(tmp_path, body):
    path = tmp_path / "s.csv"
    path.write_text("timestamp,link_id,mass_flow\n" + body)
    with pytest.raises(ConfigError):
        FlowSchedule.from_csv(path)


def test_bundled_schedule_matches_two_zone(two_zone):
    from thermored.cli import data_file
    s = FlowSchedule.from_csv(data_file("two_zone_schedule.csv")).for_links(two_zone.link_ids)
    assert len(s.times) > 1
    assert np.all(np.isfinite(s.values))
