"""Inter-zone and zone-exterior mass flows.

Flows come either from a prescribed schedule (zero-order hold) or from a
simplified pressure network: one pressure node per zone, power-law
openings, stack and wind driving pressures, solved by damped Newton on the
zone mass balances.
"""
import csv
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConfigError, ConvergenceError, RangeError

G = 9.80665
RHO_REF = 1.2
T_REF = 293.15
EXTERIOR = "exterior"
# below this |dP| (Pa) the power law is replaced by a C1 odd cubic
DP_REG = 0.01
MASS_TOL = 1e-9


def air_density(t_celsius):
    """Ideal-gas air density (kg/m3) at temperature ``t_celsius``."""
    return RHO_REF * T_REF / (np.asarray(t_celsius, dtype=float) + 273.15)


@dataclass(frozen=True)
class Opening:
    """Flow path between two zones or a zone and the exterior.

    Flows are signed, positive from ``from_zone`` to ``to_zone``. ``height``
    is measured above the pressure reference (floor level). ``cp`` is the
    wind pressure coefficient of an exterior-facing opening; if ``azimuth``
    is given it is scaled by the cosine between wind and facade.
    """

    id: str
    from_zone: str
    to_zone: str
    cd: float
    area: float
    height: float = 1.0
    cp: float = 0.0
    azimuth: float = None
    exponent: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.cd <= 1.0:
            raise ConfigError(f"opening {self.id}: discharge coefficient must be in (0, 1]")
        if not self.area >= 0.0:
            raise ConfigError(f"opening {self.id}: area must be non-negative")
        if not 0.0 < self.exponent <= 1.0:
            raise ConfigError(f"opening {self.id}: flow exponent must be in (0, 1]")

    @property
    def exterior_facing(self):
        return EXTERIOR in (self.from_zone, self.to_zone)

    @property
    def closed(self):
        return self.area == 0.0

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(str(d["id"]), d["from"], d["to"], float(d.get("cd", 0.6)),
                       float(d["area"]), float(d.get("height", 1.0)),
                       float(d.get("cp", 0.0) or 0.0),
                       None if d.get("azimuth") is None else float(d["azimuth"]),
                       float(d.get("exponent", 0.5)))
        except KeyError as exc:
            raise ConfigError(f"opening {d!r}: missing field {exc}") from exc


def opening_flow(opening, dp, rho_upwind):
    """Mass flow (kg/s) through ``opening`` under pressure difference ``dp``.

    ``mdot = Cd*A*sqrt(2*rho)*|dp|^n*sign(dp)``, which for ``n = 0.5`` is
    ``Cd*A*rho*sqrt(2*|dp|/rho)``. Below 0.01 Pa an odd cubic that matches
    value and slope at the threshold keeps the derivative finite.
    """
    k = opening.cd * opening.area * np.sqrt(2.0 * np.asarray(rho_upwind, dtype=float))
    q, _ = kernels.power_law(k, opening.exponent, dp, DP_REG)
    return q if np.ndim(q) else float(q)


def wind_pressure(opening, wind_speed, wind_dir, rho_ext):
    """Wind pressure (Pa) on the exterior face of ``opening``."""
    if not opening.exterior_facing or opening.cp == 0.0:
        return 0.0
    cp = opening.cp
    if opening.azimuth is not None:
        cp = cp * math.cos(math.radians(wind_dir - opening.azimuth))
    return 0.5 * cp * rho_ext * wind_speed ** 2


def stack_wind_pressure(opening, t_from, t_to, wind_speed=0.0, wind_dir=0.0):
    """Driving pressure (Pa) added to ``P_from - P_to`` for ``opening``.

    Stack term ``-g*h*(rho(T_from) - rho(T_to))``; wind term
    ``0.5*Cp*rho_ext*v^2`` acting on the exterior side.
    """
    rho_from, rho_to = float(air_density(t_from)), float(air_density(t_to))
    dp = -G * opening.height * (rho_from - rho_to)
    if opening.from_zone == EXTERIOR:
        dp += wind_pressure(opening, wind_speed, wind_dir, rho_from)
    elif opening.to_zone == EXTERIOR:
        dp -= wind_pressure(opening, wind_speed, wind_dir, rho_to)
    return dp


@dataclass
class FlowState:
    """Converged network: zone pressures (Pa) and signed opening flows (kg/s)."""

    pressures: np.ndarray
    flows: np.ndarray
    residual: float = 0.0
    iterations: int = 0


class Network:
    """Pressure network prepared for repeated solves.

    ``zone_names`` fixes the order of the pressure unknowns. Zones not
    reached by any open opening are excluded and keep pressure 0.
    """

    def __init__(self, openings, zone_names):
        self.openings = tuple(openings)
        self.zone_names = tuple(zone_names)
        index = {n: i for i, n in enumerate(self.zone_names)}
        nl = len(self.openings)
        self.src = np.full(nl, -1)
        self.dst = np.full(nl, -1)
        for k, o in enumerate(self.openings):
            for end, arr in ((o.from_zone, self.src), (o.to_zone, self.dst)):
                if end != EXTERIOR:
                    if end not in index:
                        raise ConfigError(f"opening {o.id}: unknown zone {end!r}")
                    arr[k] = index[end]
        self.open = np.array([not o.closed for o in self.openings], dtype=bool)
        self.base = np.array([o.cd * o.area for o in self.openings])
        self.exponent = np.array([o.exponent for o in self.openings])
        self.height = np.array([o.height for o in self.openings])
        nz = len(self.zone_names)
        inc = np.zeros((nz, nl))
        for k in range(nl):
            if self.open[k]:
                if self.src[k] >= 0:
                    inc[self.src[k], k] -= 1.0
                if self.dst[k] >= 0:
                    inc[self.dst[k], k] += 1.0
        self.incidence = inc
        self.active = np.flatnonzero(np.any(inc != 0.0, axis=1))
        self.pinned = self._pinned()
        facing = np.array([o.exterior_facing for o in self.openings], dtype=bool)
        self._solver = kernels.NetworkSolver(
            self.src, self.dst, np.where(self.open, self.base, 0.0), self.exponent, self.height,
            np.where(facing, [o.cp for o in self.openings], 0.0),
            [np.nan if o.azimuth is None else o.azimuth for o in self.openings],
            self.active, ~np.isin(self.active, self.pinned), G, RHO_REF * T_REF, DP_REG)

    def _pinned(self):
        # one zone per component without an exterior opening fixes the pressure level
        nz = len(self.zone_names)
        parent = list(range(nz + 1))   # node nz is the exterior

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for k in np.flatnonzero(self.open):
            a = self.src[k] if self.src[k] >= 0 else nz
            b = self.dst[k] if self.dst[k] >= 0 else nz
            parent[find(a)] = find(b)
        pinned, seen = [], set()
        for z in self.active:
            root = find(z)
            if root != find(nz) and root not in seen:
                seen.add(root)
                pinned.append(z)
        return np.array(pinned, dtype=int)

    def driving(self, t_air, t_out, wind_speed, wind_dir):
        """Stack plus wind pressure per opening, and densities of both ends."""
        return self._solver.driving(np.asarray(t_air, dtype=float), float(t_out),
                                    float(wind_speed), float(wind_dir))

    def flows(self, pressures, drive, rho_from, rho_to):
        p = np.concatenate([pressures, [0.0]])
        dp = p[self.src] - p[self.dst] + drive
        rho = np.where(dp >= 0.0, rho_from, rho_to)
        k = self.base * np.sqrt(2.0 * rho)
        q, s = kernels.power_law(k, self.exponent, dp, DP_REG)
        return np.where(self.open, q, 0.0), np.where(self.open, s, 0.0)

    def solve(self, t_air, t_out, wind_speed=0.0, wind_dir=0.0, p0=None, max_iterations=100,
              tol=MASS_TOL):
        """Damped Newton on the zone mass balances.

        A warm start ``p0`` that fails to converge is retried once from zero
        pressures.
        """
        nz = len(self.zone_names)
        if self.active.size == 0:
            return FlowState(np.zeros(nz), np.zeros(len(self.openings)), 0.0, 0)
        t_air = np.asarray(t_air, dtype=float)
        q = np.zeros(len(self.openings))
        for start in ((p0, None) if p0 is not None else (None,)):
            p = np.zeros(nz) if start is None else np.array(start, dtype=float)
            p[self.pinned] = 0.0
            status, it, norm = self._solver.solve(t_air, float(t_out), float(wind_speed),
                                                  float(wind_dir), p, q, max_iterations, tol)
            if status == kernels.STATUS_OK:
                return FlowState(p, q, float(norm), it)
        raise ConvergenceError(f"airflow network did not converge in {max_iterations} "
                               f"iterations (mass residual {norm:.3g} kg/s)", residual=norm)


def solve_network(openings, zone_names, t_air, t_out, wind_speed=0.0, wind_dir=0.0, p0=None):
    """Zone pressures and opening flows for the given temperatures and wind."""
    return Network(openings, zone_names).solve(t_air, t_out, wind_speed, wind_dir, p0)


# --- schedules -----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FlowSchedule:
    """Piecewise-constant link flows; row ``i`` holds from ``times[i]`` on."""

    times: np.ndarray
    link_ids: tuple
    values: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype="datetime64[s]")
        values = np.array(self.values, dtype=float).reshape(len(times), len(self.link_ids))
        if len(times) > 1 and np.any(np.diff(times) <= np.timedelta64(0, "s")):
            raise ConfigError("schedule timestamps must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "link_ids", tuple(self.link_ids))

    @classmethod
    def empty(cls, link_ids=()):
        return cls(np.array([], dtype="datetime64[s]"), link_ids, np.zeros((0, len(link_ids))))

    def for_links(self, link_ids):
        """Re-order columns to ``link_ids``; links absent from the schedule get 0."""
        unknown = set(self.link_ids) - set(link_ids)
        if unknown:
            raise ConfigError(f"schedule references unknown links {sorted(unknown)}")
        values = np.zeros((len(self.times), len(link_ids)))
        for j, lid in enumerate(link_ids):
            if lid in self.link_ids:
                values[:, j] = self.values[:, self.link_ids.index(lid)]
        return FlowSchedule(self.times, tuple(link_ids), values)

    @classmethod
    def from_csv(cls, path):
        """Long-format CSV ``timestamp,link_id,mass_flow``.

        A link missing at a timestamp keeps its previous value (0 before its
        first record).
        """
        records = {}
        links = []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                return cls.empty()
            for line, row in enumerate(reader, start=2):
                if not row or not "".join(row).strip():
                    continue
                if len(row) != 3:
                    raise ConfigError(f"{path}:{line}: expected 3 fields, got {len(row)}")
                try:
                    t = np.datetime64(row[0].strip(), "s")
                    flow = float(row[2])
                except ValueError as exc:
                    raise ConfigError(f"{path}:{line}: {exc}") from exc
                lid = row[1].strip()
                if lid not in links:
                    links.append(lid)
                records.setdefault(t, {})[lid] = flow
        times = sorted(records)
        values = np.zeros((len(times), len(links)))
        last = np.zeros(len(links))
        for i, t in enumerate(times):
            for lid, v in records[t].items():
                last[links.index(lid)] = v
            values[i] = last
        return cls(np.array(times, dtype="datetime64[s]"), tuple(links), values)


def schedule_flows(schedule, t):
    """Link flows at time(s) ``t`` (zero-order hold, right-continuous)."""
    t = np.asarray(t, dtype="datetime64[s]")
    scalar = t.ndim == 0
    t = np.atleast_1d(t)
    if len(schedule.times) == 0:
        out = np.zeros((len(t), len(schedule.link_ids)))
    else:
        if t.min() < schedule.times[0] or t.max() > schedule.times[-1]:
            raise RangeError(f"time outside schedule range [{schedule.times[0]}, "
                             f"{schedule.times[-1]}]")
        idx = np.searchsorted(schedule.times, t, side="right") - 1
        out = schedule.values[idx]
    return out[0] if scalar else out
