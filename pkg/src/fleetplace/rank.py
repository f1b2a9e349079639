"""Base ranking: place the fleet on the bases with the lowest total mission cost."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .model import (
    Assignment,
    BaseKind,
    DistanceTable,
    Instance,
    VehicleKind,
    compatible_vehicle_base,
    compatible_vehicle_mission,
)


class NoCompatibleVehicle(RuntimeError):
    pass


@dataclass
class RankedStart:
    assignment: Assignment
    unused_bases: list[int]
    base_totals: dict[int, float] = field(default_factory=dict)


def column_totals(cost: np.ndarray, columns: Iterable[int]) -> list[float]:
    # fsum is correctly rounded, so the result does not depend on who sums
    # which column or in what order.
    return [math.fsum(cost[:, k].tolist()) for k in columns]


def select_top_bases(inst: Instance, totals: list[float]) -> list[int]:
    """Column indices of the |fleet| cheapest bases, at most |rotary| of them helipads.

    Ties on the total go to the lower base id.
    """
    n_rotary = len(inst.rotary)
    order = sorted(range(len(inst.bases)), key=lambda k: (totals[k], inst.bases[k].id))
    chosen: list[int] = []
    helipads = 0
    for k in order:
        if len(chosen) == len(inst.fleet):
            break
        if inst.bases[k].kind is BaseKind.HELIPAD:
            if helipads == n_rotary:
                continue
            helipads += 1
        chosen.append(k)
    if len(chosen) < len(inst.fleet):
        raise NoCompatibleVehicle("not enough bases to host the fleet")
    return chosen


def place_fleet(inst: Instance, chosen: list[int]) -> dict[int, int]:
    """Rotary vehicles take chosen helipads first; the rest fill chosen aerodromes in rank order."""
    rotary = sorted(inst.rotary, key=lambda v: v.id)
    fixed = sorted(inst.fixed, key=lambda v: v.id)
    helipads = [k for k in chosen if inst.bases[k].kind is BaseKind.HELIPAD]
    aerodromes = [k for k in chosen if inst.bases[k].kind is BaseKind.AERODROME]
    placement: dict[int, int] = {}
    for v, k in zip(rotary, helipads):
        placement[v.id] = inst.bases[k].id
    queue = rotary[len(helipads):] + fixed
    for v, k in zip(queue, aerodromes):
        placement[v.id] = inst.bases[k].id
    return placement


def assign_missions(inst: Instance, t: DistanceTable, placement: dict[int, int]) -> dict[int, int]:
    """Each mission goes to the cheapest occupied base whose vehicle can fly it."""
    vehicles = sorted((v for v in inst.fleet if v.id in placement), key=lambda v: v.id)
    col = inst.base_index
    service: dict[int, int] = {}
    for z, m in enumerate(inst.missions):
        best = None
        for v in vehicles:
            if not compatible_vehicle_mission(v, m):
                continue
            c = t.cost[z, col[placement[v.id]]]
            if best is None or c < best[0]:
                best = (c, v.id)
        if best is None:
            raise NoCompatibleVehicle(f"no placed vehicle can serve mission {m.id}")
        service[m.id] = best[1]
    return service


def rank_bases(inst: Instance, t: DistanceTable, totals: list[float] | None = None) -> RankedStart:
    if totals is None:
        totals = column_totals(t.cost, range(len(inst.bases)))
    chosen = select_top_bases(inst, totals)
    placement = place_fleet(inst, chosen)
    service = assign_missions(inst, t, placement)
    occupied = set(placement.values())
    return RankedStart(
        assignment=Assignment(placement, service),
        unused_bases=[b.id for b in inst.bases if b.id not in occupied],
        base_totals={b.id: totals[k] for k, b in enumerate(inst.bases)},
    )


def random_start(inst: Instance, rng: np.random.Generator) -> Assignment:
    """Random feasible assignment, the baseline ranking is compared against.

    Vehicles are dropped on distinct compatible bases, fixed-wing first.
    Every draw then has the same number of options whatever came before,
    so placements are uniform over all feasible ones. Each mission picks a
    uniformly random vehicle able to fly it.
    """
    order = [v for v in inst.fleet if v.kind is VehicleKind.FIXED] + [
        v for v in inst.fleet if v.kind is VehicleKind.ROTARY
    ]
    free = list(range(len(inst.bases)))
    placement: dict[int, int] = {}
    for v in order:
        options = [k for k in free if compatible_vehicle_base(v, inst.bases[k])]
        k = options[int(rng.integers(len(options)))]
        free.remove(k)
        placement[v.id] = inst.bases[k].id
    service: dict[int, int] = {}
    for m in inst.missions:
        options = [v.id for v in inst.fleet if compatible_vehicle_mission(v, m)]
        if not options:
            raise NoCompatibleVehicle(f"no vehicle can serve mission {m.id}")
        service[m.id] = options[int(rng.integers(len(options)))]
    return Assignment(placement, service)
