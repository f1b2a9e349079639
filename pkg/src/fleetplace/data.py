"""Instance files, synthetic facility pools and JSON persistence.

CSV layouts (header row required, UTF-8, '.' decimals):

    bases.csv     id,kind,lat,lon                      kind: aerodrome | helipad
    missions.csv  id,pickup_lat,pickup_lon,delivery_lat,delivery_lon,rotary_only
    fleet.csv     id,kind                              kind: rotary | fixed
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .geo import GeoPoint
from .model import (
    Assignment,
    Base,
    BaseKind,
    Instance,
    InstanceError,
    Mission,
    Vehicle,
    VehicleKind,
)

BASE_COLUMNS = ("id", "kind", "lat", "lon")
MISSION_COLUMNS = ("id", "pickup_lat", "pickup_lon", "delivery_lat", "delivery_lon", "rotary_only")
FLEET_COLUMNS = ("id", "kind")

# Rough Ontario extent: (lat_min, lat_max, lon_min, lon_max).
DEFAULT_BOX = (42.0, 56.5, -95.0, -74.5)
DEFAULT_ROTARY_ONLY_FRACTION = 0.3


class ParseError(ValueError):
    def __init__(self, path, line: int, column: str | None, reason: str):
        self.path, self.line, self.column, self.reason = str(path), line, column, reason
        where = f"{path}:{line}" + (f" [{column}]" if column else "")
        super().__init__(f"{where}: {reason}")


class ValidationError(ValueError):
    def __init__(self, entity: str, rule: str):
        self.entity, self.rule = entity, rule
        super().__init__(f"{entity}: {rule}")


class PoolTooSmall(ValueError):
    pass


@dataclass(frozen=True)
class FacilityPool:
    aerodromes: tuple[GeoPoint, ...]
    helipads: tuple[GeoPoint, ...]
    health_sites: tuple[GeoPoint, ...]


def _clustered_points(rng: np.random.Generator, n: int, box, centres: np.ndarray,
                      spread: float, remote_fraction: float) -> list[GeoPoint]:
    lat0, lat1, lon0, lon1 = box
    pts = []
    for _ in range(n):
        if rng.random() < remote_fraction or len(centres) == 0:
            lat = rng.uniform(lat0, lat1) if lat1 > lat0 else lat0
            lon = rng.uniform(lon0, lon1) if lon1 > lon0 else lon0
        else:
            c = centres[rng.integers(len(centres))]
            lat = c[0] + rng.normal(0.0, spread * (lat1 - lat0))
            lon = c[1] + rng.normal(0.0, spread * (lon1 - lon0))
        pts.append(GeoPoint(float(np.clip(lat, lat0, lat1)), float(np.clip(lon, lon0, lon1))))
    return pts


def synthesize_pool(
    seed: int,
    box: tuple[float, float, float, float] = DEFAULT_BOX,
    counts: tuple[int, int, int] = (274, 104, 200),
    n_clusters: int = 5,
    spread: float = 0.04,
    remote_fraction: float = 0.3,
) -> FacilityPool:
    """Aerodromes, helipads and health sites: a few dense clusters plus sparse scatter.

    ``spread`` is the cluster standard deviation as a fraction of the box
    extent; ``remote_fraction`` of the points ignore the clusters entirely.
    """
    if min(counts) <= 0:
        raise ValueError("counts must be positive")
    lat0, lat1, lon0, lon1 = box
    rng = np.random.default_rng(seed)
    centres = np.column_stack([
        rng.uniform(lat0, lat1, n_clusters) if lat1 > lat0 else np.full(n_clusters, lat0),
        rng.uniform(lon0, lon1, n_clusters) if lon1 > lon0 else np.full(n_clusters, lon0),
    ])
    n_aero, n_heli, n_health = counts
    return FacilityPool(
        aerodromes=tuple(_clustered_points(rng, n_aero, box, centres, spread, remote_fraction)),
        helipads=tuple(_clustered_points(rng, n_heli, box, centres, spread, remote_fraction)),
        health_sites=tuple(_clustered_points(rng, n_health, box, centres, spread, remote_fraction)),
    )


def default_fleet(n_rotary: int = 8, n_fixed: int = 4) -> list[Vehicle]:
    return [Vehicle(i + 1, VehicleKind.ROTARY) for i in range(n_rotary)] + [
        Vehicle(n_rotary + j + 1, VehicleKind.FIXED) for j in range(n_fixed)
    ]


def generate_instance(
    pool: FacilityPool,
    n_missions: int,
    rotary_only_fraction: float = DEFAULT_ROTARY_ONLY_FRACTION,
    seed: int = 0,
    fleet: list[Vehicle] | None = None,
    n_aerodromes: int | None = None,
    n_helipads: int | None = None,
) -> Instance:
    """Missions drawn from health sites; bases taken from the pool.

    Aerodromes get ids 1..A and helipads A+1..A+H. Passing ``n_aerodromes`` /
    ``n_helipads`` samples that many bases (without replacement) instead of
    using the whole pool.
    """
    if not 0.0 <= rotary_only_fraction <= 1.0:
        raise ValueError("rotary_only_fraction must lie in [0, 1]")
    if len(pool.health_sites) < 2:
        raise PoolTooSmall("need at least two health sites")
    n_aero = len(pool.aerodromes) if n_aerodromes is None else n_aerodromes
    n_heli = len(pool.helipads) if n_helipads is None else n_helipads
    if n_aero > len(pool.aerodromes) or n_heli > len(pool.helipads):
        raise PoolTooSmall("pool has fewer bases than requested")
    rng = np.random.default_rng(seed)
    aero_idx = sorted(rng.choice(len(pool.aerodromes), n_aero, replace=False).tolist()) \
        if n_aerodromes is not None else list(range(n_aero))
    heli_idx = sorted(rng.choice(len(pool.helipads), n_heli, replace=False).tolist()) \
        if n_helipads is not None else list(range(n_heli))
    bases = [Base(k + 1, BaseKind.AERODROME, pool.aerodromes[a]) for k, a in enumerate(aero_idx)]
    bases += [Base(n_aero + k + 1, BaseKind.HELIPAD, pool.helipads[h]) for k, h in enumerate(heli_idx)]

    sites = pool.health_sites
    missions = []
    for z in range(n_missions):
        p, d = rng.choice(len(sites), 2, replace=False)
        rotary_only = bool(rng.random() < rotary_only_fraction)
        missions.append(Mission(z + 1, sites[int(p)], sites[int(d)], rotary_only))
    fleet = default_fleet() if fleet is None else fleet
    if sum(v.kind is VehicleKind.FIXED for v in fleet) > n_aero or len(fleet) > len(bases):
        raise PoolTooSmall("not enough bases for the fleet")
    return Instance(tuple(bases), tuple(fleet), tuple(missions))


# --- CSV -----------------------------------------------------------------

def _read_rows(path: Path, columns: tuple[str, ...]) -> list[tuple[int, dict[str, str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(path, 1, None, "empty file") from None
        header = [h.strip() for h in header]
        if tuple(header) != columns:
            raise ParseError(path, 1, None, f"expected header {','.join(columns)}, got {','.join(header)}")
        rows = []
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(columns):
                raise ParseError(path, reader.line_num, None, f"expected {len(columns)} fields, got {len(row)}")
            rows.append((reader.line_num, dict(zip(columns, (c.strip() for c in row)))))
    return rows


def _int(path, line, row, col) -> int:
    try:
        return int(row[col])
    except ValueError:
        raise ParseError(path, line, col, f"not an integer: {row[col]!r}") from None


def _float(path, line, row, col) -> float:
    try:
        return float(row[col])
    except ValueError:
        raise ParseError(path, line, col, f"not a number: {row[col]!r}") from None


def _point(path, line, row, lat_col, lon_col, entity) -> GeoPoint:
    lat, lon = _float(path, line, row, lat_col), _float(path, line, row, lon_col)
    try:
        return GeoPoint(lat, lon)
    except ValueError as exc:
        raise ValidationError(entity, str(exc)) from None


def _bool(path, line, row, col) -> bool:
    v = row[col].lower()
    if v in ("1", "true"):
        return True
    if v in ("0", "false"):
        return False
    raise ParseError(path, line, col, f"not a boolean: {row[col]!r}")


def _check_unique(items, name):
    seen = set()
    for x in items:
        if x.id in seen:
            raise ValidationError(f"{name} {x.id}", "duplicate id")
        seen.add(x.id)


def load_instance(bases_path, missions_path, fleet_path) -> Instance:
    bases_path, missions_path, fleet_path = Path(bases_path), Path(missions_path), Path(fleet_path)
    bases = []
    for line, row in _read_rows(bases_path, BASE_COLUMNS):
        bid = _int(bases_path, line, row, "id")
        try:
            kind = BaseKind(row["kind"].lower())
        except ValueError:
            raise ParseError(bases_path, line, "kind", f"unknown base kind {row['kind']!r}") from None
        bases.append(Base(bid, kind, _point(bases_path, line, row, "lat", "lon", f"base {bid}")))
    missions = []
    for line, row in _read_rows(missions_path, MISSION_COLUMNS):
        mid = _int(missions_path, line, row, "id")
        missions.append(Mission(
            mid,
            _point(missions_path, line, row, "pickup_lat", "pickup_lon", f"mission {mid}"),
            _point(missions_path, line, row, "delivery_lat", "delivery_lon", f"mission {mid}"),
            _bool(missions_path, line, row, "rotary_only"),
        ))
    fleet = []
    for line, row in _read_rows(fleet_path, FLEET_COLUMNS):
        vid = _int(fleet_path, line, row, "id")
        try:
            kind = VehicleKind(row["kind"].lower())
        except ValueError:
            raise ParseError(fleet_path, line, "kind", f"unknown vehicle kind {row['kind']!r}") from None
        fleet.append(Vehicle(vid, kind))
    _check_unique(bases, "base")
    _check_unique(missions, "mission")
    _check_unique(fleet, "vehicle")
    try:
        return Instance(tuple(bases), tuple(fleet), tuple(missions))
    except InstanceError as exc:
        raise ValidationError("instance", str(exc)) from None


def save_instance(inst: Instance, directory) -> tuple[Path, Path, Path]:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    paths = d / "bases.csv", d / "missions.csv", d / "fleet.csv"
    with open(paths[0], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BASE_COLUMNS)
        for b in inst.bases:
            w.writerow([b.id, b.kind.value, repr(b.location.lat_deg), repr(b.location.lon_deg)])
    with open(paths[1], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MISSION_COLUMNS)
        for m in inst.missions:
            w.writerow([m.id, repr(m.pickup.lat_deg), repr(m.pickup.lon_deg),
                        repr(m.delivery.lat_deg), repr(m.delivery.lon_deg), int(m.rotary_only)])
    with open(paths[2], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FLEET_COLUMNS)
        for v in inst.fleet:
            w.writerow([v.id, v.kind.value])
    return paths


# --- JSON ----------------------------------------------------------------

def instance_to_dict(inst: Instance) -> dict[str, Any]:
    return {
        "bases": [{"id": b.id, "kind": b.kind.value, "lat": b.location.lat_deg, "lon": b.location.lon_deg}
                  for b in inst.bases],
        "fleet": [{"id": v.id, "kind": v.kind.value} for v in inst.fleet],
        "missions": [{
            "id": m.id,
            "pickup": [m.pickup.lat_deg, m.pickup.lon_deg],
            "delivery": [m.delivery.lat_deg, m.delivery.lon_deg],
            "rotary_only": m.rotary_only,
        } for m in inst.missions],
    }


def instance_from_dict(d: dict[str, Any]) -> Instance:
    return Instance(
        tuple(Base(b["id"], BaseKind(b["kind"]), GeoPoint(b["lat"], b["lon"])) for b in d["bases"]),
        tuple(Vehicle(v["id"], VehicleKind(v["kind"])) for v in d["fleet"]),
        tuple(Mission(m["id"], GeoPoint(*m["pickup"]), GeoPoint(*m["delivery"]), bool(m["rotary_only"]))
              for m in d["missions"]),
    )


def assignment_to_dict(a: Assignment) -> dict[str, Any]:
    return {
        "placement": [[v, b] for v, b in sorted(a.placement.items())],
        "service": [[m, v] for m, v in sorted(a.service.items())],
    }


def assignment_from_dict(d: dict[str, Any]) -> Assignment:
    return Assignment({int(v): int(b) for v, b in d["placement"]}, {int(m): int(v) for m, v in d["service"]})


def dumps(obj: dict[str, Any]) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def instance_hash(inst: Instance) -> str:
    return hashlib.sha256(json.dumps(instance_to_dict(inst), sort_keys=True).encode()).hexdigest()


def save_json(obj: dict[str, Any], path) -> Path:
    p = Path(path)
    p.write_text(dumps(obj), encoding="utf-8")
    return p


def load_json(path) -> dict[str, Any]:
    return json.loads(Path(path).read_text(encoding="utf-8"))
