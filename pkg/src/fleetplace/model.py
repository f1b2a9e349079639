"""Problem data model, compatibility rules, feasibility and objective."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .geo import EARTH_RADIUS_KM, GeoPoint, haversine_km


class VehicleKind(str, enum.Enum):
    ROTARY = "rotary"
    FIXED = "fixed"


class BaseKind(str, enum.Enum):
    AERODROME = "aerodrome"
    HELIPAD = "helipad"


@dataclass(frozen=True)
class Vehicle:
    id: int
    kind: VehicleKind


@dataclass(frozen=True)
class Base:
    id: int
    kind: BaseKind
    location: GeoPoint


@dataclass(frozen=True)
class Mission:
    id: int
    pickup: GeoPoint
    delivery: GeoPoint
    rotary_only: bool = False


class InstanceError(ValueError):
    pass


@dataclass(frozen=True)
class Instance:
    """Bases, fleet and missions.

    Row/column order of every derived table follows the order of ``missions``
    and ``bases`` here; ids need not be contiguous.
    """

    bases: tuple[Base, ...]
    fleet: tuple[Vehicle, ...]
    missions: tuple[Mission, ...]

    def __post_init__(self):
        object.__setattr__(self, "bases", tuple(self.bases))
        object.__setattr__(self, "fleet", tuple(self.fleet))
        object.__setattr__(self, "missions", tuple(self.missions))
        if not self.fleet:
            raise InstanceError("fleet is empty")
        for name, items in (("base", self.bases), ("vehicle", self.fleet), ("mission", self.missions)):
            ids = [x.id for x in items]
            if len(set(ids)) != len(ids):
                raise InstanceError(f"duplicate {name} id")
        n_aero = sum(b.kind is BaseKind.AERODROME for b in self.bases)
        n_fixed = sum(v.kind is VehicleKind.FIXED for v in self.fleet)
        if n_aero < n_fixed:
            raise InstanceError(f"{n_fixed} fixed-wing vehicles but only {n_aero} aerodromes")
        if len(self.bases) < len(self.fleet):
            raise InstanceError("fewer bases than vehicles")

    @cached_property
    def base_index(self) -> dict[int, int]:
        return {b.id: k for k, b in enumerate(self.bases)}

    @cached_property
    def vehicle_index(self) -> dict[int, int]:
        return {v.id: k for k, v in enumerate(self.fleet)}

    @cached_property
    def mission_index(self) -> dict[int, int]:
        return {m.id: k for k, m in enumerate(self.missions)}

    @property
    def rotary(self) -> list[Vehicle]:
        return [v for v in self.fleet if v.kind is VehicleKind.ROTARY]

    @property
    def fixed(self) -> list[Vehicle]:
        return [v for v in self.fleet if v.kind is VehicleKind.FIXED]

    @property
    def aerodromes(self) -> list[Base]:
        return [b for b in self.bases if b.kind is BaseKind.AERODROME]

    @property
    def helipads(self) -> list[Base]:
        return [b for b in self.bases if b.kind is BaseKind.HELIPAD]


@dataclass(frozen=True)
class DistanceTable:
    """Round-trip cost in km, rows = missions, columns = bases (instance order)."""

    cost: np.ndarray

    def __post_init__(self):
        self.cost.setflags(write=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.cost.shape


def build_distance_table(inst: Instance, radius_km: float = EARTH_RADIUS_KM) -> DistanceTable:
    cost = np.empty((len(inst.missions), len(inst.bases)), dtype=np.float64)
    for k, base in enumerate(inst.bases):
        for z, m in enumerate(inst.missions):
            cost[z, k] = haversine_km(base.location, m.pickup, radius_km) + haversine_km(
                base.location, m.delivery, radius_km
            )
    return DistanceTable(cost)


def compatible_vehicle_base(v: Vehicle, b: Base) -> bool:
    return not (v.kind is VehicleKind.FIXED and b.kind is BaseKind.HELIPAD)


def compatible_vehicle_mission(v: Vehicle, m: Mission) -> bool:
    return not (m.rotary_only and v.kind is VehicleKind.FIXED)


@dataclass
class Assignment:
    """Vehicle placement (vehicle id -> base id) and mission service (mission id -> vehicle id)."""

    placement: dict[int, int] = field(default_factory=dict)
    service: dict[int, int] = field(default_factory=dict)

    def copy(self) -> "Assignment":
        return Assignment(dict(self.placement), dict(self.service))

    def canonical(self) -> tuple[tuple[tuple[int, int], ...], tuple[tuple[int, int], ...]]:
        return tuple(sorted(self.placement.items())), tuple(sorted(self.service.items()))

    def __eq__(self, other):
        if not isinstance(other, Assignment):
            return NotImplemented
        return self.canonical() == other.canonical()


class Rule(str, enum.Enum):
    ONE_VEHICLE_PER_MISSION = "OneVehiclePerMission"
    ONE_BASE_PER_VEHICLE = "OneBasePerVehicle"
    BASE_OCCUPANCY = "BaseOccupancy"
    SERVICE_REQUIRES_PLACEMENT = "ServiceRequiresPlacement"
    ROTARY_ONLY = "RotaryOnly"
    FIXED_WING_ON_HELIPAD = "FixedWingOnHelipad"


@dataclass(frozen=True)
class Violation:
    rule: Rule
    subject: tuple[int, ...]

    def __str__(self):
        return f"{self.rule.value}({', '.join(map(str, self.subject))})"


class InfeasibleAssignmentError(ValueError):
    def __init__(self, violations: list[Violation]):
        self.violations = violations
        super().__init__(f"infeasible assignment: {violations[0]}" + (
            f" (+{len(violations) - 1} more)" if len(violations) > 1 else ""))


def check_feasible(a: Assignment, inst: Instance) -> list[Violation]:
    """Every broken constraint as a ``Violation``; empty when the assignment is feasible.

    Unknown ids are reported against the rule they make unverifiable.
    """
    out: list[Violation] = []
    vehicles = {v.id: v for v in inst.fleet}
    bases = {b.id: b for b in inst.bases}

    # each mission served by exactly one vehicle of the fleet
    for m in inst.missions:
        if m.id not in a.service or a.service[m.id] not in vehicles:
            out.append(Violation(Rule.ONE_VEHICLE_PER_MISSION, (m.id,)))
    mission_ids = inst.mission_index
    for mid in sorted(a.service):
        if mid not in mission_ids:
            out.append(Violation(Rule.ONE_VEHICLE_PER_MISSION, (mid,)))

    # each vehicle on exactly one known base
    for v in inst.fleet:
        if v.id not in a.placement or a.placement[v.id] not in bases:
            out.append(Violation(Rule.ONE_BASE_PER_VEHICLE, (v.id,)))
    for vid in sorted(a.placement):
        if vid not in vehicles:
            out.append(Violation(Rule.ONE_BASE_PER_VEHICLE, (vid,)))

    occupants: dict[int, list[int]] = {}
    for vid, bid in a.placement.items():
        occupants.setdefault(bid, []).append(vid)
    for bid in sorted(occupants):
        if len(occupants[bid]) > 1:
            out.append(Violation(Rule.BASE_OCCUPANCY, (bid,)))

    for vid in sorted(a.placement):
        v, b = vehicles.get(vid), bases.get(a.placement[vid])
        if v is not None and b is not None and not compatible_vehicle_base(v, b):
            out.append(Violation(Rule.FIXED_WING_ON_HELIPAD, (vid, b.id)))

    flagged: set[int] = set()
    for m in inst.missions:
        vid = a.service.get(m.id)
        if vid is None or vid not in vehicles:
            continue
        if vid not in a.placement and vid not in flagged:
            flagged.add(vid)
            out.append(Violation(Rule.SERVICE_REQUIRES_PLACEMENT, (vid,)))
        if not compatible_vehicle_mission(vehicles[vid], m):
            out.append(Violation(Rule.ROTARY_ONLY, (m.id, vid)))
    return out


def objective_km(a: Assignment, inst: Instance, t: DistanceTable) -> float:
    """Total km: each mission charged at the base of the vehicle that serves it."""
    violations = check_feasible(a, inst)
    if violations:
        raise InfeasibleAssignmentError(violations)
    col = inst.base_index
    total = 0.0
    for z, m in enumerate(inst.missions):
        total += float(t.cost[z, col[a.placement[a.service[m.id]]]])
    return total
