"""Nodal thermal model of a multi-zone building.

Walls are discretized into RC chains, surfaces are eliminated as massless
star nodes and every zone becomes a :class:`ZoneModel` with the air node
last. The zone input vector is framed as::

    [T_out, T_sky | sw:<orientation>... | Q_int | T_air:<neighbour>...]

Short-wave columns carry the irradiance incident on each surface
orientation (W/m2), ``Q_int`` the internal gains (W) and the trailing
columns the air temperatures of adjacent zones. Airflow only ever enters
the air row, through inflow terms ``mdot*cp*(T_source - T_air)``.
"""
import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .airflow import Opening
from .errors import ConfigError, DimensionError, RangeError, TopologyError
from .statespace import StateSpaceModel
from .tvreduction import PartitionedModel

RHO_AIR = 1.2
CP_AIR = 1006.0
EXTERIOR = "exterior"
ADIABATIC = "adiabatic"
GLAZING_CAPACITANCE = 2500.0 * 840.0 * 0.006  # J/(m2 K), 6 mm float glass
WEATHER_FIELDS = ("t_out", "t_sky", "rh", "ghi", "dhi", "wind_speed", "wind_dir")
# below ~5 deg elevation the beam split is unreliable; treat everything as diffuse
LOW_SUN_COS = 0.0872
# nominal input magnitudes used to weigh inputs when balancing
NOMINAL_TEMPERATURE = 1.0   # K
NOMINAL_IRRADIANCE = 100.0  # W/m2
NOMINAL_GAIN = 100.0        # W


def _positive(owner, **values):
    for name, v in values.items():
        if not (np.isfinite(v) and v > 0):
            raise ConfigError(f"{owner}: {name} must be positive, got {v!r}")


@dataclass(frozen=True)
class Layer:
    """Homogeneous wall layer (SI units)."""

    conductivity: float
    density: float
    specific_heat: float
    thickness: float
    nodes: int = 3

    def __post_init__(self):
        _positive("layer", conductivity=self.conductivity, density=self.density,
                  specific_heat=self.specific_heat, thickness=self.thickness)
        if int(self.nodes) != self.nodes or self.nodes < 1:
            raise ConfigError(f"layer: nodes must be an integer >= 1, got {self.nodes!r}")


@dataclass(frozen=True)
class Wall:
    """Opaque wall; ``layers`` run from the outer face to the zone face.

    ``boundary`` is ``"exterior"``, ``"adiabatic"`` or the name of the
    zone on the other side. ``tilt`` is 0 for a roof and 90 for a vertical
    wall, ``azimuth`` is measured clockwise from north.
    """

    name: str
    area: float
    layers: tuple
    boundary: str = EXTERIOR
    tilt: float = 90.0
    azimuth: float = 0.0
    absorptance: float = 0.6

    def __post_init__(self):
        _positive(f"wall {self.name}", area=self.area)
        if not self.layers:
            raise ConfigError(f"wall {self.name}: no layers")
        if not 0.0 <= self.absorptance <= 1.0:
            raise ConfigError(f"wall {self.name}: absorptance outside [0, 1]")
        object.__setattr__(self, "layers", tuple(self.layers))

    def mirrored(self, boundary):
        """Same wall seen from the zone on the other side."""
        return replace(self, name=f"{boundary}/{self.name}", layers=self.layers[::-1],
                       boundary=boundary, azimuth=(self.azimuth + 180.0) % 360.0)


@dataclass(frozen=True)
class Glazing:
    """Window modelled as one glass node between exterior and zone air."""

    name: str
    area: float
    u_value: float
    transmittance: float
    tilt: float = 90.0
    azimuth: float = 0.0
    capacitance: float = GLAZING_CAPACITANCE

    def __post_init__(self):
        _positive(f"glazing {self.name}", area=self.area, u_value=self.u_value,
                  capacitance=self.capacitance)
        if not 0.0 <= self.transmittance <= 1.0:
            raise ConfigError(f"glazing {self.name}: transmittance outside [0, 1]")


@dataclass(frozen=True)
class ZoneDescription:
    name: str
    walls: tuple
    air_volume: float
    glazings: tuple = ()
    h_int: float = 5.0
    h_ext: float = 12.0
    h_rad: float = 5.0
    internal_gain: float = 0.0

    def __post_init__(self):
        _positive(f"zone {self.name}", air_volume=self.air_volume, h_int=self.h_int,
                  h_ext=self.h_ext)
        if self.h_rad < 0:
            raise ConfigError(f"zone {self.name}: h_rad must be non-negative")
        if not self.walls:
            raise ConfigError(f"zone {self.name}: a zone needs at least one wall")
        object.__setattr__(self, "walls", tuple(self.walls))
        object.__setattr__(self, "glazings", tuple(self.glazings))
        names = [w.name for w in self.walls] + [g.name for g in self.glazings]
        if len(set(names)) != len(names):
            raise ConfigError(f"zone {self.name}: duplicate wall/glazing names")


@dataclass(frozen=True)
class RCChain:
    """Capacitances and conductances of a discretized wall.

    ``conductances[i]`` links nodes ``i`` and ``i+1``; ``g_out`` and ``g_in``
    are the half-slice conductances from the end nodes to the two faces.
    Films are not included.
    """

    capacitances: np.ndarray
    conductances: np.ndarray
    g_out: float
    g_in: float

    @property
    def total_capacitance(self):
        return float(self.capacitances.sum())

    @property
    def total_resistance(self):
        return float(1.0 / self.g_out + np.sum(1.0 / self.conductances) + 1.0 / self.g_in)


def discretize_wall(wall):
    """Uniform finite-difference chain, ``layer.nodes`` slices per layer."""
    caps, halves = [], []
    for layer in wall.layers:
        d = layer.thickness / layer.nodes
        half = layer.conductivity * wall.area / (0.5 * d)
        for _ in range(layer.nodes):
            caps.append(layer.density * layer.specific_heat * d * wall.area)
            halves.append(half)
    halves = np.array(halves)
    # two half-slices in series between neighbouring nodes
    links = 1.0 / (1.0 / halves[:-1] + 1.0 / halves[1:])
    return RCChain(np.array(caps), links, float(halves[0]), float(halves[-1]))


def orientation_label(tilt, azimuth):
    tilt = float(tilt) % 360.0
    azimuth = 0.0 if tilt == 0.0 else float(azimuth) % 360.0
    return f"sw:{tilt:g}/{azimuth:g}"


@dataclass(frozen=True)
class FlowTerm:
    """Airflow link feeding a zone: inflow is ``max(sign*flow[link], 0)``."""

    link: int
    sign: int
    source_col: int


class ZoneModel(PartitionedModel):
    """Partitioned nodal model of one zone (air node last).

    ``A0``/``B0`` hold the zero-airflow matrices; ``capacitance`` the node
    capacitances (J/K). Inflow terms modify only the air row through
    ``coef = cp_air / C_air``.
    """

    def __init__(self, name, A0, B0, capacitance, state_labels, input_labels,
                 temperature_inputs, flow_terms=(), description=None):
        A0 = np.array(A0, dtype=float)
        B0 = np.array(B0, dtype=float)
        n = A0.shape[0]
        self.name = name
        self.A0 = A0
        self.B0 = B0
        self.air = n - 1
        self.capacitance = np.asarray(capacitance, dtype=float)
        self.air_capacitance = float(self.capacitance[-1])
        self.coef = CP_AIR / self.air_capacitance
        self.temperature_inputs = np.asarray(temperature_inputs, dtype=bool)
        self.flow_terms = tuple(flow_terms)
        self.description = description
        self.flow_fn = None
        super().__init__(A0[:-1, :-1], A0[:-1, -1:], B0[:-1], A0[-1:, :-1],
                         self._a22_at, self._b2_at, state_labels, input_labels)

    @property
    def order(self):
        return self.A0.shape[0]

    @property
    def input_scale(self):
        """Nominal magnitude of each input column (K, W/m2 or W)."""
        return np.array([NOMINAL_IRRADIANCE if lab.startswith("sw:") else
                         NOMINAL_GAIN if lab == "Q_int" else NOMINAL_TEMPERATURE
                         for lab in self.input_labels])

    def column(self, label):
        return self.input_labels.index(label)

    def inflows(self, link_flows):
        """Per-term inflow (kg/s) for a vector of signed link flows."""
        if not self.flow_terms:
            return np.zeros(0)
        link_flows = np.asarray(link_flows, dtype=float)
        return np.array([max(t.sign * link_flows[t.link], 0.0) for t in self.flow_terms])

    def matrices(self, inflows):
        """``(A, B)`` with the given per-term inflows (kg/s)."""
        inflows = np.asarray(inflows, dtype=float)
        if inflows.shape != (len(self.flow_terms),):
            raise DimensionError(f"zone {self.name}: expected {len(self.flow_terms)} inflows")
        A = self.A0.copy()
        B = self.B0.copy()
        for term, q in zip(self.flow_terms, inflows):
            A[self.air, self.air] -= self.coef * q
            B[self.air, term.source_col] += self.coef * q
        return A, B

    def model_for(self, link_flows=None):
        """Full LTI model with the airflows frozen at ``link_flows``."""
        if link_flows is None:
            q = np.zeros(len(self.flow_terms))
        else:
            q = self.inflows(link_flows)
        A, B = self.matrices(q)
        return StateSpaceModel.from_dynamics(A, B, state_labels=self.state_labels,
                                             input_labels=self.input_labels)

    def with_flows(self, flow_fn):
        """Copy whose ``a22``/``b2`` providers follow ``flow_fn(t)`` (link flows)."""
        twin = object.__new__(ZoneModel)
        twin.__dict__.update(self.__dict__)
        twin.flow_fn = flow_fn
        twin._a22 = twin._a22_at
        twin._b2 = twin._b2_at
        return twin

    def _current_inflows(self, t):
        if self.flow_fn is None or not self.flow_terms:
            return np.zeros(len(self.flow_terms))
        return self.inflows(self.flow_fn(t))

    def _a22_at(self, t):
        q = self._current_inflows(t)
        return np.array([[self.A0[self.air, self.air] - self.coef * q.sum()]])

    def _b2_at(self, t):
        b2 = self.B0[self.air].copy()
        for term, q in zip(self.flow_terms, self._current_inflows(t)):
            b2[term.source_col] += self.coef * q
        return b2[None, :]

    def conductance_network(self):
        """``(K, Kb)``: node and boundary-temperature conductances (W/K).

        Row ``i`` of ``K`` plus row ``i`` of ``Kb`` sums to zero.
        """
        K = self.capacitance[:, None] * self.A0
        Kb = self.capacitance[:, None] * self.B0[:, self.temperature_inputs]
        return K, Kb


class _Assembler:
    # sparse-ish accumulation of conductances and input couplings
    def __init__(self):
        self.caps, self.labels = [], []
        self.links = []     # (i, j, g)
        self.bounds = []    # (i, column label, g)
        self.gains = []     # (i, column label, coefficient in W per input unit)

    def node(self, label, cap):
        self.caps.append(cap)
        self.labels.append(label)
        return len(self.caps) - 1


def build_zone(zone, neighbours=(), flow_terms=()):
    """Assemble the nodal model of one zone.

    ``neighbours`` lists extra adjacent zones (linked by airflow only) that
    need a ``T_air`` input column; zones behind walls are added
    automatically. ``flow_terms`` are ``(link, sign, source)`` triples where
    ``source`` is ``"exterior"`` or a neighbour name.
    """
    asm = _Assembler()
    air_label = f"{zone.name}:air"
    interior = []   # (node, g_in_effective_to_air, area, g_in, g_film)

    for wall in zone.walls:
        chain = discretize_wall(wall)
        idx = [asm.node(f"{wall.name}[{i}]", c) for i, c in enumerate(chain.capacitances)]
        for i, g in enumerate(chain.conductances):
            asm.links.append((idx[i], idx[i + 1], g))
        first, last = idx[0], idx[-1]
        if wall.boundary == EXTERIOR:
            f_sky = 0.5 * (1.0 + math.cos(math.radians(wall.tilt)))
            g_conv = (zone.h_ext + zone.h_rad * (1.0 - f_sky)) * wall.area
            g_sky = zone.h_rad * f_sky * wall.area
            total = chain.g_out + g_conv + g_sky
            asm.bounds.append((first, "T_out", chain.g_out * g_conv / total))
            if g_sky > 0:
                asm.bounds.append((first, "T_sky", chain.g_out * g_sky / total))
            asm.gains.append((first, orientation_label(wall.tilt, wall.azimuth),
                              wall.absorptance * wall.area * chain.g_out / total))
        elif wall.boundary != ADIABATIC:
            g_film = zone.h_int * wall.area
            asm.bounds.append((first, f"T_air:{wall.boundary}",
                               chain.g_out * g_film / (chain.g_out + g_film)))
        g_film = zone.h_int * wall.area
        interior.append((last, chain.g_in * g_film / (chain.g_in + g_film), wall.area,
                         chain.g_in, g_film))

    glass = []
    for glz in zone.glazings:
        i = asm.node(f"{glz.name}[0]", glz.capacitance * glz.area)
        ua2 = 2.0 * glz.u_value * glz.area
        asm.bounds.append((i, "T_out", ua2))
        glass.append((i, ua2))

    air = asm.node(air_label, RHO_AIR * CP_AIR * zone.air_volume)
    for node, g, _, _, _ in interior:
        asm.links.append((node, air, g))
    for node, ua2 in glass:
        asm.links.append((node, air, ua2))

    # transmitted sun lands on the interior faces, shared by area
    total_area = sum(a for _, _, a, _, _ in interior)
    for glz in zone.glazings:
        col = orientation_label(glz.tilt, glz.azimuth)
        incoming = glz.transmittance * glz.area
        for node, _, area, g_in, g_film in interior:
            share = incoming * area / total_area
            asm.gains.append((node, col, share * g_in / (g_in + g_film)))
            asm.gains.append((air, col, share * g_film / (g_in + g_film)))
    asm.gains.append((air, "Q_int", 1.0))

    # input frame
    sw = []
    for label in [orientation_label(w.tilt, w.azimuth) for w in zone.walls
                  if w.boundary == EXTERIOR] + \
                 [orientation_label(g.tilt, g.azimuth) for g in zone.glazings]:
        if label not in sw:
            sw.append(label)
    others = []
    for name in [w.boundary for w in zone.walls] + list(neighbours):
        if name not in (EXTERIOR, ADIABATIC) and name not in others:
            if name == zone.name:
                raise TopologyError(f"zone {zone.name} cannot border itself")
            others.append(name)
    inputs = ["T_out", "T_sky"] + sw + ["Q_int"] + [f"T_air:{o}" for o in others]
    col = {label: j for j, label in enumerate(inputs)}
    temperature = np.array([lab.startswith("T_") for lab in inputs])

    n, m = len(asm.caps), len(inputs)
    K = np.zeros((n, n))
    Kb = np.zeros((n, m))
    for i, j, g in asm.links:
        K[i, j] += g
        K[j, i] += g
    for i, label, g in asm.bounds:
        Kb[i, col[label]] += g
    G = np.zeros((n, m))
    for i, label, g in asm.gains:
        G[i, col[label]] += g
    np.fill_diagonal(K, -(K.sum(axis=1) + Kb.sum(axis=1)))
    caps = np.array(asm.caps)
    A = K / caps[:, None]
    B = (Kb + G) / caps[:, None]

    terms = []
    for link, sign, source in flow_terms:
        source_col = col["T_out"] if source == EXTERIOR else col.get(f"T_air:{source}")
        if source_col is None:
            raise TopologyError(f"zone {zone.name}: no input column for flow source {source!r}")
        terms.append(FlowTerm(int(link), int(sign), source_col))
    return ZoneModel(zone.name, A, B, caps, asm.labels, inputs, temperature, terms, zone)


@dataclass(frozen=True)
class Site:
    latitude: float = 0.0
    longitude: float = 0.0
    utc_offset: float = 0.0


@dataclass(frozen=True, eq=False)
class BuildingModel:
    """Zones, airflow links and the coupling wiring between zones.

    ``coupling[z]`` lists ``(column, source_zone)`` pairs: column ``column``
    of zone ``z`` takes the air temperature of zone ``source_zone``.
    Zones are solved sequentially, each using the latest available
    neighbour temperatures.
    """

    zones: tuple
    links: tuple = ()
    site: Site = field(default_factory=Site)
    name: str = "building"
    weather_binding: dict = field(default_factory=lambda: {"T_out": "t_out", "T_sky": "t_sky"})

    @property
    def zone_names(self):
        return tuple(z.name for z in self.zones)

    def index(self, name):
        try:
            return self.zone_names.index(name)
        except ValueError:
            raise TopologyError(f"unknown zone {name!r}") from None

    @property
    def coupling(self):
        out = []
        for zone in self.zones:
            pairs = [(j, self.index(lab.split(":", 1)[1]))
                     for j, lab in enumerate(zone.input_labels) if lab.startswith("T_air:")]
            out.append(tuple(pairs))
        return tuple(out)

    @property
    def orders(self):
        return tuple(z.order for z in self.zones)

    @property
    def link_ids(self):
        return tuple(link.id for link in self.links)


def assemble_building(zones, links=(), site=None, name="building", weather_binding=None):
    """Build every zone and wire walls and airflow links between them.

    A wall whose boundary names another zone is mirrored into that zone
    (layers reversed) unless that zone already declares a wall of the same
    name facing back.
    """
    zones = list(zones)
    names = [z.name for z in zones]
    if len(set(names)) != len(names):
        raise TopologyError("duplicate zone names")
    if EXTERIOR in names or ADIABATIC in names:
        raise TopologyError(f"zone names {EXTERIOR!r} and {ADIABATIC!r} are reserved")
    extra_walls = {n: [] for n in names}
    for zone in zones:
        for wall in zone.walls:
            if wall.boundary in (EXTERIOR, ADIABATIC):
                continue
            if wall.boundary not in extra_walls:
                raise TopologyError(f"wall {wall.name} of {zone.name} faces unknown zone "
                                    f"{wall.boundary!r}")
            other = zones[names.index(wall.boundary)]
            declared = any(w.boundary == zone.name and w.name in (wall.name, f"{zone.name}/{wall.name}")
                           for w in other.walls)
            if not declared:
                extra_walls[other.name].append(wall.mirrored(zone.name))
    neighbours = {n: [] for n in names}
    terms = {n: [] for n in names}
    links = tuple(links)
    for k, link in enumerate(links):
        for end in (link.from_zone, link.to_zone):
            if end != EXTERIOR and end not in names:
                raise TopologyError(f"link {link.id} has unknown endpoint {end!r}")
        if link.from_zone == link.to_zone:
            raise TopologyError(f"link {link.id} connects {link.from_zone!r} to itself")
        if link.from_zone != EXTERIOR:
            terms[link.from_zone].append((k, -1, link.to_zone))
            if link.to_zone != EXTERIOR:
                neighbours[link.from_zone].append(link.to_zone)
        if link.to_zone != EXTERIOR:
            terms[link.to_zone].append((k, +1, link.from_zone))
            if link.from_zone != EXTERIOR:
                neighbours[link.to_zone].append(link.from_zone)
    built = []
    for zone in zones:
        if extra_walls[zone.name]:
            zone = replace(zone, walls=zone.walls + tuple(extra_walls[zone.name]))
        built.append(build_zone(zone, neighbours[zone.name], terms[zone.name]))
    return BuildingModel(tuple(built), links, site or Site(), name,
                         weather_binding or {"T_out": "t_out", "T_sky": "t_sky"})


# --- weather -------------------------------------------------------------------

def _as_times(values):
    return np.asarray(values, dtype="datetime64[s]")


@dataclass(frozen=True, eq=False)
class WeatherSeries:
    """Timestamped weather records, columns as in ``WEATHER_FIELDS``."""

    times: np.ndarray
    data: np.ndarray

    def __post_init__(self):
        times = _as_times(self.times)
        data = np.array(self.data, dtype=float, ndmin=2)
        if data.shape != (len(times), len(WEATHER_FIELDS)):
            raise DimensionError(f"weather data must be {len(times)}x{len(WEATHER_FIELDS)}")
        if len(times) < 1:
            raise ConfigError("weather series is empty")
        if np.any(np.diff(times) <= np.timedelta64(0, "s")):
            raise ConfigError("weather timestamps must be strictly increasing")
        if not np.all(np.isfinite(data)):
            raise ConfigError("weather data contains non-finite values")
        col = {f: i for i, f in enumerate(WEATHER_FIELDS)}
        if np.any(data[:, [col["ghi"], col["dhi"]]] < 0):
            raise ConfigError("radiation must be non-negative")
        rh = data[:, col["rh"]]
        if np.any((rh < 0) | (rh > 100)):
            raise ConfigError("relative humidity must lie in [0, 100]")
        if np.any(data[:, col["wind_speed"]] < 0):
            raise ConfigError("wind speed must be non-negative")
        times.setflags(write=False)
        data.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "data", data)

    def __len__(self):
        return len(self.times)

    def column(self, name):
        return self.data[:, WEATHER_FIELDS.index(name)]

    @property
    def start(self):
        return self.times[0]

    @property
    def end(self):
        return self.times[-1]

    def sample(self, times):
        """Weather at ``times``: linear interpolation, circular for wind direction."""
        times = np.atleast_1d(_as_times(times))
        if times.min() < self.times[0] or times.max() > self.times[-1]:
            raise RangeError(f"requested times outside weather range "
                             f"[{self.times[0]}, {self.times[-1]}]")
        x = (times - self.times[0]).astype(float)
        xp = (self.times - self.times[0]).astype(float)
        out = np.empty((len(times), len(WEATHER_FIELDS)))
        for j, name in enumerate(WEATHER_FIELDS):
            if name == "wind_dir":
                rad = np.radians(self.data[:, j])
                s = np.interp(x, xp, np.sin(rad))
                c = np.interp(x, xp, np.cos(rad))
                out[:, j] = np.degrees(np.arctan2(s, c)) % 360.0
            else:
                out[:, j] = np.interp(x, xp, self.data[:, j])
        return out

    @classmethod
    def from_csv(cls, path):
        """Read ``timestamp,t_out,t_sky,rh,ghi,dhi,wind_speed,wind_dir``."""
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            missing = {"timestamp", *WEATHER_FIELDS} - set(reader.fieldnames or ())
            if missing:
                raise ConfigError(f"{path}: missing weather columns {sorted(missing)}")
            times, rows = [], []
            for line, rec in enumerate(reader, start=2):
                try:
                    times.append(np.datetime64(rec["timestamp"].strip(), "s"))
                    rows.append([float(rec[f]) for f in WEATHER_FIELDS])
                except ValueError as exc:
                    raise ConfigError(f"{path}:{line}: {exc}") from exc
        return cls(np.array(times, dtype="datetime64[s]"), np.array(rows).reshape(-1, 7))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("timestamp",) + WEATHER_FIELDS)
            for t, row in zip(self.times, self.data):
                w.writerow([str(t)] + [f"{v:.3f}" for v in row])


# --- solar ---------------------------------------------------------------------

def sun_vector(times, site):
    """Unit sun vectors (east, north, up) at the given local clock times."""
    times = np.atleast_1d(_as_times(times))
    day = (times.astype("datetime64[D]") - times.astype("datetime64[Y]")).astype(int) + 1
    hours = (times - times.astype("datetime64[D]")).astype(float) / 3600.0
    b = 2.0 * np.pi * (day - 1) / 365.0
    eot = 229.18 * (0.000075 + 0.001868 * np.cos(b) - 0.032077 * np.sin(b)
                    - 0.014615 * np.cos(2 * b) - 0.040849 * np.sin(2 * b))
    solar = hours + (4.0 * (site.longitude - 15.0 * site.utc_offset) + eot) / 60.0
    omega = np.radians(15.0 * (solar - 12.0))
    delta = np.radians(23.45 * np.sin(2.0 * np.pi * (284 + day) / 365.0))
    return sun_vector_from_angles(np.radians(site.latitude), delta, omega)


def sun_vector_from_angles(phi, delta, omega):
    """Sun vector from latitude, declination and hour angle (radians)."""
    east = -np.cos(delta) * np.sin(omega)
    north = np.cos(phi) * np.sin(delta) - np.sin(phi) * np.cos(delta) * np.cos(omega)
    up = np.sin(phi) * np.sin(delta) + np.cos(phi) * np.cos(delta) * np.cos(omega)
    return np.stack(np.broadcast_arrays(east, north, up), axis=-1)


def surface_normal(tilt, azimuth):
    t, a = math.radians(tilt), math.radians(azimuth)
    return np.array([math.sin(t) * math.sin(a), math.sin(t) * math.cos(a), math.cos(t)])


def surface_irradiance(ghi, dhi, sun, tilt, azimuth):
    """Incident short-wave flux (W/m2) on a surface, isotropic sky.

    Beam is projected with ``cos(theta)/cos(zenith)``; diffuse is weighted
    by the sky view factor ``(1 + cos tilt)/2``. With the sun lower than
    about 5 degrees all radiation is treated as diffuse. No ground
    reflection.
    """
    ghi = np.asarray(ghi, dtype=float)
    dhi = np.minimum(np.asarray(dhi, dtype=float), ghi)
    sun = np.asarray(sun, dtype=float)
    cos_z = sun[..., 2]
    cos_t = np.maximum(sun @ surface_normal(tilt, azimuth), 0.0)
    view = 0.5 * (1.0 + math.cos(math.radians(tilt)))
    high = cos_z >= LOW_SUN_COS
    ratio = np.where(high, cos_t / np.where(high, cos_z, 1.0), 0.0)
    beam = (ghi - dhi) * ratio
    return np.where(high, beam + dhi * view, ghi * view)


def _parse_orientation(label):
    tilt, azimuth = label[3:].split("/")
    return float(tilt), float(azimuth)


def input_series(weather, building, times):
    """Per-zone ``k x m`` input matrices at ``times``.

    Meteorological, short-wave and internal-gain columns are filled;
    coupling columns (``T_air:*``) are left at zero for the solver.
    """
    times = np.atleast_1d(_as_times(times))
    w = weather.sample(times)
    col = {f: i for i, f in enumerate(WEATHER_FIELDS)}
    sun = sun_vector(times, building.site)
    cache = {}
    out = []
    for zone in building.zones:
        U = np.zeros((len(times), len(zone.input_labels)))
        for j, label in enumerate(zone.input_labels):
            if label in building.weather_binding:
                U[:, j] = w[:, col[building.weather_binding[label]]]
            elif label.startswith("sw:"):
                if label not in cache:
                    tilt, azimuth = _parse_orientation(label)
                    cache[label] = surface_irradiance(w[:, col["ghi"]], w[:, col["dhi"]],
                                                      sun, tilt, azimuth)
                U[:, j] = cache[label]
            elif label == "Q_int":
                U[:, j] = zone.description.internal_gain if zone.description else 0.0
        out.append(U)
    return out


def weather_inputs(weather, building, t):
    """Input vector of every zone at a single time ``t``."""
    return [U[0] for U in input_series(weather, building, [t])]


# --- JSON description ----------------------------------------------------------

DEFAULTS = {"nodes": 3, "h_int": 5.0, "h_ext": 12.0, "h_rad": 5.0, "absorptance": 0.6}


def _layers(spec, materials, constructions, default_nodes, where):
    if isinstance(spec, str):
        if spec not in constructions:
            raise ConfigError(f"{where}: unknown construction {spec!r}")
        spec = constructions[spec]
    layers = []
    for item in spec:
        props = dict(item)
        if "material" in props:
            name = props.pop("material")
            if name not in materials:
                raise ConfigError(f"{where}: unknown material {name!r}")
            props = {**materials[name], **props}
        props.setdefault("nodes", default_nodes)
        try:
            layers.append(Layer(**props))
        except TypeError as exc:
            raise ConfigError(f"{where}: bad layer {item!r}: {exc}") from exc
    return tuple(layers)


def building_from_dict(doc):
    """Build a :class:`BuildingModel` from a parsed JSON description."""
    try:
        defaults = {**DEFAULTS, **doc.get("defaults", {})}
        materials = doc.get("materials", {})
        constructions = doc.get("constructions", {})
        zones = []
        for z in doc["zones"]:
            where = f"zone {z.get('name', '?')}"
            walls = []
            for w in z.get("walls", []):
                layers = _layers(w.get("construction", w.get("layers")), materials, constructions,
                                 w.get("nodes", defaults["nodes"]), f"{where}/{w.get('name')}")
                walls.append(Wall(w["name"], float(w["area"]), layers,
                                  w.get("boundary", EXTERIOR), float(w.get("tilt", 90.0)),
                                  float(w.get("azimuth", 0.0)),
                                  float(w.get("absorptance", defaults["absorptance"]))))
            glazings = [Glazing(g["name"], float(g["area"]), float(g["u_value"]),
                                float(g["transmittance"]), float(g.get("tilt", 90.0)),
                                float(g.get("azimuth", 0.0)))
                        for g in z.get("glazings", [])]
            zones.append(ZoneDescription(z["name"], tuple(walls), float(z["air_volume"]),
                                         tuple(glazings),
                                         float(z.get("h_int", defaults["h_int"])),
                                         float(z.get("h_ext", defaults["h_ext"])),
                                         float(z.get("h_rad", defaults["h_rad"])),
                                         float(z.get("internal_gain", 0.0))))
        links = [Opening.from_dict(o) for o in doc.get("openings", [])]
        site = Site(**doc.get("site", {}))
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"invalid building description: {exc!r}") from exc
    return assemble_building(zones, links, site, doc.get("name", "building"))


def load_building(path):
    """Read a building JSON file."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return building_from_dict(doc)
