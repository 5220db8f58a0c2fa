"""Regenerate the bundled synthetic building and weather files.

    python tools/make_data.py [outdir]

Writes the closed and open variants of the 5-zone dwelling (3 bedrooms,
living room, kitchen + bathroom + toilets), a 2-zone test building with
its flow schedule, and 7 days of synthetic tropical-summer weather at
30-minute cadence. Everything is deterministic (fixed seed).
"""
import copy
import csv
import json
import sys
from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parents[1] / "src" / "thermored" / "data"

SITE = {"latitude": -20.9, "longitude": 55.5, "utc_offset": 4}
H = 2.5

MATERIALS = {
    "render": {"conductivity": 1.15, "density": 1800, "specific_heat": 1000},
    "block": {"conductivity": 0.95, "density": 1300, "specific_heat": 1000},
    "plaster": {"conductivity": 0.5, "density": 1300, "specific_heat": 1000},
    "concrete": {"conductivity": 1.75, "density": 2300, "specific_heat": 920},
    "tile": {"conductivity": 1.3, "density": 2300, "specific_heat": 840},
    "plasterboard": {"conductivity": 0.25, "density": 900, "specific_heat": 1000},
    "mineral_wool": {"conductivity": 0.04, "density": 30, "specific_heat": 1030},
    "steel_sheet": {"conductivity": 50.0, "density": 7800, "specific_heat": 500},
}

CONSTRUCTIONS = {
    "ext_wall": [{"material": "render", "thickness": 0.015, "nodes": 1},
                 {"material": "block", "thickness": 0.20},
                 {"material": "plaster", "thickness": 0.01, "nodes": 1}],
    "partition": [{"material": "plaster", "thickness": 0.01, "nodes": 1},
                  {"material": "block", "thickness": 0.10},
                  {"material": "plaster", "thickness": 0.01, "nodes": 1}],
    "roof": [{"material": "steel_sheet", "thickness": 0.00075, "nodes": 1},
             {"material": "mineral_wool", "thickness": 0.05},
             {"material": "plasterboard", "thickness": 0.0125, "nodes": 1}],
    "floor": [{"material": "concrete", "thickness": 0.15},
              {"material": "tile", "thickness": 0.01, "nodes": 1}],
}


def wall(name, construction, area, boundary="exterior", azimuth=0.0, tilt=90.0, nodes=None,
         absorptance=None):
    w = {"name": name, "construction": construction, "area": round(area, 3),
         "boundary": boundary, "tilt": tilt, "azimuth": azimuth}
    if nodes is not None:
        w["nodes"] = nodes
    if absorptance is not None:
        w["absorptance"] = absorptance
    return w


def window(name, area, azimuth, u=5.8, tau=0.75):
    return {"name": name, "area": area, "u_value": u, "transmittance": tau, "azimuth": azimuth}


def roof_floor(area, roof_nodes=None, floor_nodes=None):
    return [wall("roof", "roof", area, tilt=0.0, nodes=roof_nodes, absorptance=0.4),
            wall("floor", "floor", area, boundary="adiabatic", tilt=180.0, nodes=floor_nodes)]


def dwelling(open_variant):
    # plan: bedrooms along the north facade, living room and service block to the south
    zones = [
        {"name": "bedroom1", "air_volume": 3.0 * 3.5 * H, "internal_gain": 60.0,
         "walls": [wall("north", "ext_wall", 3.0 * H, azimuth=0.0, nodes=6),
                   wall("west", "ext_wall", 3.5 * H, azimuth=270.0, nodes=3),
                   wall("to_bedroom2", "partition", 3.5 * H, boundary="bedroom2", nodes=3),
                   wall("to_living", "partition", 3.0 * H, boundary="living", nodes=3),
                   *roof_floor(10.5, roof_nodes=2, floor_nodes=3)],
         "glazings": [window("window", 1.2, 0.0)]},
        {"name": "bedroom2", "air_volume": 3.0 * 3.5 * H, "internal_gain": 60.0,
         "walls": [wall("north", "ext_wall", 3.0 * H, azimuth=0.0, nodes=6),
                   wall("to_bedroom3", "partition", 3.5 * H, boundary="bedroom3", nodes=3),
                   wall("to_living", "partition", 3.0 * H, boundary="living", nodes=3),
                   *roof_floor(10.5, roof_nodes=3, floor_nodes=4)],
         "glazings": [window("window", 1.2, 0.0)]},
        {"name": "bedroom3", "air_volume": 3.0 * 3.5 * H, "internal_gain": 60.0,
         "walls": [wall("north", "ext_wall", 3.0 * H, azimuth=0.0, nodes=6),
                   wall("east", "ext_wall", 3.5 * H, azimuth=90.0, nodes=5),
                   wall("to_service", "partition", 3.5 * H, boundary="service", nodes=3),
                   *roof_floor(10.5, roof_nodes=3, floor_nodes=4)],
         "glazings": [window("window", 1.2, 90.0)]},
        {"name": "living", "air_volume": 6.0 * 5.0 * H, "internal_gain": 150.0,
         "walls": [wall("south", "ext_wall", 6.0 * H - 4.0, azimuth=180.0, nodes=12),
                   wall("west", "ext_wall", 5.0 * H - 1.5, azimuth=270.0, nodes=11),
                   wall("to_service", "partition", 5.0 * H - 1.6, boundary="service", nodes=6),
                   wall("door_bedroom2", "door", 1.6, boundary="bedroom2"),
                   *roof_floor(30.0, roof_nodes=8, floor_nodes=8)],
         "glazings": [window("sliding_door", 4.0, 180.0), window("window", 1.5, 270.0)]},
        {"name": "service", "air_volume": 3.0 * 5.0 * H, "internal_gain": 120.0,
         "walls": [wall("south", "ext_wall", 3.0 * H - 1.0, azimuth=180.0, nodes=2),
                   wall("east", "ext_wall", 5.0 * H, azimuth=90.0, nodes=1),
                   *roof_floor(15.0, roof_nodes=1, floor_nodes=2)],
         "glazings": [window("window", 1.0, 180.0)]},
    ]
    constructions = copy.deepcopy(CONSTRUCTIONS)
    constructions["door"] = [{"material": "plasterboard", "thickness": 0.04, "nodes": 1}]
    doc = {"name": "dwelling-open" if open_variant else "dwelling-closed", "site": SITE,
           "defaults": {"nodes": 3, "h_int": 5.0, "h_ext": 12.0, "h_rad": 5.0,
                        "absorptance": 0.6},
           "materials": MATERIALS, "constructions": constructions, "zones": zones,
           "openings": []}
    if open_variant:
        doc["openings"] = [
            {"id": "living_sliding_door", "from": "exterior", "to": "living", "cd": 0.6,
             "area": 2.0, "height": 1.0, "cp": 0.6, "azimuth": 180.0},
            {"id": "bedroom2_living_door", "from": "living", "to": "bedroom2", "cd": 0.6,
             "area": 1.6, "height": 1.0},
            {"id": "bedroom2_window", "from": "bedroom2", "to": "exterior", "cd": 0.6,
             "area": 0.6, "height": 1.5, "cp": 0.6, "azimuth": 0.0},
        ]
    return doc


def two_zone():
    zones = [
        {"name": "east", "air_volume": 30.0, "internal_gain": 80.0,
         "walls": [wall("facade", "ext_wall", 10.0, azimuth=90.0, nodes=3),
                   wall("party", "partition", 10.0, boundary="west", nodes=2),
                   *roof_floor(12.0, roof_nodes=1, floor_nodes=2)],
         "glazings": [window("window", 1.0, 90.0)]},
        {"name": "west", "air_volume": 30.0, "internal_gain": 40.0,
         "walls": [wall("facade", "ext_wall", 10.0, azimuth=270.0, nodes=3),
                   *roof_floor(12.0, roof_nodes=1, floor_nodes=2)],
         "glazings": [window("window", 1.0, 270.0)]},
    ]
    return {"name": "two-zone", "site": SITE, "materials": MATERIALS,
            "constructions": CONSTRUCTIONS, "zones": zones,
            "openings": [
                {"id": "vent", "from": "exterior", "to": "east", "cd": 0.6, "area": 0.1,
                 "height": 1.0},
                {"id": "door", "from": "east", "to": "west", "cd": 0.6, "area": 1.6,
                 "height": 1.0},
                {"id": "exhaust", "from": "west", "to": "exterior", "cd": 0.6, "area": 0.1,
                 "height": 2.0},
            ]}


def two_zone_schedule(start, hours):
    rows = []
    for h in range(hours + 1):
        t = start + np.timedelta64(h, "h")
        phase = 2.0 * np.pi * h / 24.0
        base = 0.03 + 0.02 * np.sin(phase) + 0.002 * (h % 5)
        rows.append((str(t), "vent", round(base, 6)))
        rows.append((str(t), "door", round(base + 0.01 * np.cos(3 * phase), 6)))
        rows.append((str(t), "exhaust", round(base, 6)))
    return rows


def weather(start, days, seed=7):
    """Tropical summer (southern hemisphere, January), 30-minute records."""
    rng = np.random.default_rng(seed)
    n = days * 48 + 1
    times = start + np.arange(n) * np.timedelta64(30, "m")
    hours = np.arange(n) * 0.5
    hod = hours % 24.0
    day = (hours // 24).astype(int)
    clear = np.clip(0.75 + 0.12 * rng.standard_normal(days + 1), 0.4, 0.95)[day]
    t_out = 27.0 + 3.5 * np.sin(2 * np.pi * (hod - 9.0) / 24.0) + 0.3 * rng.standard_normal(n)
    t_out += np.repeat(0.6 * rng.standard_normal(days + 1), 48)[:n]
    t_sky = t_out - (6.0 + 8.0 * clear)
    rh = np.clip(75.0 - 12.0 * np.sin(2 * np.pi * (hod - 9.0) / 24.0)
                 + 3.0 * rng.standard_normal(n), 30.0, 100.0)
    # clear-sky shape from the sun height at the site
    from thermored.building import Site, sun_vector
    cos_z = sun_vector(times, Site(**SITE))[:, 2]
    ghi = np.where(cos_z > 0, 1100.0 * np.clip(cos_z, 0, None) ** 1.15 * clear, 0.0)
    ghi *= np.clip(1.0 + 0.08 * rng.standard_normal(n), 0.6, 1.2)
    dhi = ghi * np.clip(1.05 - clear, 0.12, 0.7)
    wind = np.clip(3.0 + 1.5 * np.sin(2 * np.pi * (hod - 8.0) / 24.0)
                   + 0.6 * rng.standard_normal(n), 0.2, None)
    wdir = (110.0 + 25.0 * np.sin(2 * np.pi * hod / 24.0) + 10.0 * rng.standard_normal(n)) % 360
    return times, np.column_stack([t_out, t_sky, rh, ghi, dhi, wind, wdir])


def main(out=OUT):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    for variant, name in ((False, "dwelling_closed.json"), (True, "dwelling_open.json")):
        (out / name).write_text(json.dumps(dwelling(variant), indent=2) + "\n")
    (out / "two_zone.json").write_text(json.dumps(two_zone(), indent=2) + "\n")
    start = np.datetime64("2026-01-10T00:00", "s")
    times, data = weather(start, 7)
    with open(out / "weather_tropical.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp", "t_out", "t_sky", "rh", "ghi", "dhi", "wind_speed", "wind_dir"])
        for t, row in zip(times, data):
            w.writerow([str(t)] + [f"{v:.3f}" for v in row])
    with open(out / "two_zone_schedule.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp", "link_id", "mass_flow"])
        w.writerows(two_zone_schedule(start, 7 * 24))


if __name__ == "__main__":
    main(*sys.argv[1:])
