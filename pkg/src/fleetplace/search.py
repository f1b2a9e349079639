"""Permutation-driven local search and its Tabu variant.

The outer index ``i`` walks a permutation of base slots (one per base in
instance order); the inner index ``j`` walks a permutation of missions. What
sits at slot ``i`` decides which move the pair can produce:

* an idle vehicle (placed, serving nothing) -> TakeoverByIdleVehicle
* an empty base                              -> RelocateToEmptyBase
* a busy vehicle                             -> ReassignToPlacedVehicle

Idle vehicles and empty bases together form the unused pool. A move is
applied as soon as it lowers the total distance (first improvement).
"""

from __future__ import annotations

import enum
import logging
from bisect import insort
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .model import (
    Assignment,
    BaseKind,
    DistanceTable,
    Instance,
    VehicleKind,
    check_feasible,
    objective_km,
)
from .rank import RankedStart
from .rng import PermutationStream

log = logging.getLogger(__name__)

DELTA_TOLERANCE_KM = 1e-9


class MoveKind(str, enum.Enum):
    TAKEOVER = "TakeoverByIdleVehicle"
    RELOCATE = "RelocateToEmptyBase"
    REASSIGN = "ReassignToPlacedVehicle"


class SearchInvariantError(AssertionError):
    """Raised in debug mode when a move breaks feasibility or its delta is wrong."""


@dataclass
class SearchConfig:
    seed: int = 0
    mode: Literal["local", "tabu"] = "local"
    tabu_tenure: int | None = None  # None: 2 * number of missions
    max_passes: int | None = None
    debug: bool = False
    tabu_key: Literal["base", "vehicle"] = "base"

    def __post_init__(self):
        if self.mode not in ("local", "tabu"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.tabu_key not in ("base", "vehicle"):
            raise ValueError(f"unknown tabu_key {self.tabu_key!r}")
        if self.tabu_tenure is not None and self.tabu_tenure <= 0:
            raise ValueError("tabu_tenure must be positive")
        if self.max_passes is not None and self.max_passes < 1:
            raise ValueError("max_passes must be >= 1")

    def tenure_for(self, n_missions: int) -> int:
        if self.tabu_tenure is not None:
            return self.tabu_tenure
        return max(1, 2 * n_missions)


@dataclass(frozen=True)
class MoveProposal:
    kind: MoveKind
    i_entity: int  # base slot index
    j_mission: int  # mission id
    delta_km: float
    vehicle_id: int  # vehicle serving the mission after the move
    base_id: int  # base that vehicle sits on after the move


class SearchState:
    """Index-based mutable view of an assignment.

    Vehicles, bases and missions are addressed by their position in the
    instance. ``members[v]`` is kept sorted so relocation deltas are always
    summed in ascending mission order.
    """

    def __init__(self, inst: Instance, t: DistanceTable, a: Assignment):
        self.inst = inst
        self.table = t
        self.cost = t.cost
        self.costl: list[list[float]] = t.cost.tolist()
        self.n_missions = len(inst.missions)
        self.n_bases = len(inst.bases)
        self.n_vehicles = len(inst.fleet)
        self.fixed = [v.kind is VehicleKind.FIXED for v in inst.fleet]
        self.helipad = [b.kind is BaseKind.HELIPAD for b in inst.bases]
        self.rotary_only = [m.rotary_only for m in inst.missions]
        self.fixed_arr = np.array(self.fixed, dtype=bool)
        self.rotary_only_arr = np.array(self.rotary_only, dtype=bool)

        vi, bi = inst.vehicle_index, inst.base_index
        self.base_of = [-1] * self.n_vehicles
        self.occ = [-1] * self.n_bases
        for vid, bid in a.placement.items():
            v, b = vi[vid], bi[bid]
            self.base_of[v] = b
            self.occ[b] = v
        self.serve = [vi[a.service[m.id]] for m in inst.missions]
        self.members: list[list[int]] = [[] for _ in range(self.n_vehicles)]
        for z, v in enumerate(self.serve):
            self.members[v].append(z)
        self.objective = 0.0
        for z, v in enumerate(self.serve):
            self.objective += self.costl[z][self.base_of[v]]
        self.version = 0

    def to_assignment(self) -> Assignment:
        inst = self.inst
        placement = {
            inst.fleet[v].id: inst.bases[b].id for v, b in enumerate(self.base_of) if b >= 0
        }
        service = {inst.missions[z].id: inst.fleet[v].id for z, v in enumerate(self.serve)}
        return Assignment(placement, service)

    def slot_kind(self, i: int) -> MoveKind:
        u = self.occ[i]
        if u < 0:
            return MoveKind.RELOCATE
        return MoveKind.TAKEOVER if not self.members[u] else MoveKind.REASSIGN

    def relocation_delta(self, w: int, b_new: int) -> float:
        b_old = self.base_of[w]
        costl = self.costl
        s = 0.0
        for z in self.members[w]:
            row = costl[z]
            s += row[b_new] - row[b_old]
        return s

    def propose(self, i: int, j: int) -> tuple[MoveKind, int, float] | None:
        """The move pair (slot i, mission j) can make: (kind, vehicle, delta) or None."""
        w = self.serve[j]
        u = self.occ[i]
        if u < 0:
            if self.fixed[w] and self.helipad[i]:
                return None
            return MoveKind.RELOCATE, w, self.relocation_delta(w, i)
        if u == w or (self.fixed[u] and self.rotary_only[j]):
            return None
        row = self.costl[j]
        kind = MoveKind.REASSIGN if self.members[u] else MoveKind.TAKEOVER
        return kind, u, row[i] - row[self.base_of[w]]

    def apply(self, kind: MoveKind, i: int, j: int, vehicle: int, delta: float) -> None:
        if kind is MoveKind.RELOCATE:
            b_old = self.base_of[vehicle]
            self.occ[b_old] = -1
            self.occ[i] = vehicle
            self.base_of[vehicle] = i
        else:
            w = self.serve[j]
            self.members[w].remove(j)
            insort(self.members[vehicle], j)
            self.serve[j] = vehicle
        self.objective += delta
        self.version += 1

    def proposal(self, i: int, j: int, kind: MoveKind, vehicle: int, delta: float) -> MoveProposal:
        inst = self.inst
        # both the relocated vehicle and the receiving vehicle end up on slot i
        return MoveProposal(
            kind=kind,
            i_entity=i,
            j_mission=inst.missions[j].id,
            delta_km=delta,
            vehicle_id=inst.fleet[vehicle].id,
            base_id=inst.bases[i].id,
        )

    def unused_pool(self) -> tuple[list[int], list[int]]:
        """(empty base ids, idle vehicle ids)."""
        inst = self.inst
        empty = [inst.bases[b].id for b in range(self.n_bases) if self.occ[b] < 0]
        idle = [inst.fleet[v].id for v in range(self.n_vehicles) if self.base_of[v] >= 0 and not self.members[v]]
        return empty, idle

    def verify(self, before: float, delta: float) -> None:
        a = self.to_assignment()
        violations = check_feasible(a, self.inst)
        if violations:
            raise SearchInvariantError(f"move produced infeasible state: {violations}")
        full = objective_km(a, self.inst, self.table)
        if abs(full - (before + delta)) > DELTA_TOLERANCE_KM:
            raise SearchInvariantError(f"delta mismatch: {before} + {delta} != {full}")
        if abs(full - self.objective) > DELTA_TOLERANCE_KM:
            raise SearchInvariantError(f"incumbent drifted: {self.objective} != {full}")


def unused_pool(a: Assignment, inst: Instance) -> tuple[list[int], list[int]]:
    """Empty base ids and idle vehicle ids of an assignment."""
    occupied = set(a.placement.values())
    busy = set(a.service.values())
    empty = [b.id for b in inst.bases if b.id not in occupied]
    idle = [v.id for v in inst.fleet if v.id in a.placement and v.id not in busy]
    return empty, idle


def enumerate_moves(a: Assignment, i: int, j: int, inst: Instance, t: DistanceTable) -> list[MoveProposal]:
    """Candidate moves for base slot ``i`` and mission id ``j``.

    A slot holds either an empty base, an idle vehicle or a busy vehicle, so
    at most one of the three move kinds applies to a given pair.
    """
    state = SearchState(inst, t, a)
    z = inst.mission_index[j]
    p = state.propose(i, z)
    if p is None:
        return []
    kind, vehicle, delta = p
    return [state.proposal(i, z, kind, vehicle, delta)]


def apply_move(a: Assignment, move: MoveProposal, inst: Instance) -> Assignment:
    out = a.copy()
    if move.kind is MoveKind.RELOCATE:
        out.placement[move.vehicle_id] = move.base_id
    else:
        out.service[move.j_mission] = move.vehicle_id
    return out


def _start_assignment(start: RankedStart | Assignment) -> Assignment:
    return start.assignment if isinstance(start, RankedStart) else start


@dataclass(frozen=True)
class TabuKey:
    """A tabu entry: a vehicle index for ``kind`` moves, or any move at a base.

    Base keys carry ``kind=None`` and ``on_base=True`` with a base index as
    entity.
    """

    kind: MoveKind | None
    entity: int
    on_base: bool = False


@dataclass
class TabuList:
    """Tenure counters keyed by move; each entry remembers which loop index produced it."""

    entries: dict[TabuKey, int] = field(default_factory=dict)
    roles: dict[TabuKey, str] = field(default_factory=dict)

    def add(self, key: TabuKey, role: str, tenure: int) -> None:
        self.entries[key] = tenure
        self.roles[key] = role

    def blocks(self, key: TabuKey, role: str) -> bool:
        return key in self.entries and self.roles[key] == role

    def tick(self, n: int = 1) -> None:
        if not self.entries:
            return
        expired = []
        for key in self.entries:
            self.entries[key] -= n
            if self.entries[key] <= 0:
                expired.append(key)
        for key in expired:
            del self.entries[key]
            del self.roles[key]

    def __len__(self):
        return len(self.entries)

    def __contains__(self, key):
        return key in self.entries


def tabu_keys(state: SearchState, i: int, j: int, policy: str = "base") -> tuple[TabuKey | None, TabuKey | None]:
    """Keys the pair (i, j) would touch: (selected via slot i, selected via mission j)."""
    u = state.occ[i]
    if policy == "base":
        key_i = TabuKey(None, i, on_base=True)
        key_j = TabuKey(MoveKind.RELOCATE, state.serve[j]) if u < 0 else None
        return key_i, key_j
    if u < 0:
        return None, TabuKey(MoveKind.RELOCATE, state.serve[j])
    kind = MoveKind.REASSIGN if state.members[u] else MoveKind.TAKEOVER
    return TabuKey(kind, u), None


def keys_for_move(kind: MoveKind, i: int, vehicle: int, policy: str = "base") -> list[tuple[TabuKey, str]]:
    """Entries recorded after an applied move, each with the loop role that selects it.

    "base" marks the slot's base (no further move there while tabu) and, for
    a relocation, the moved vehicle. "vehicle" marks only the vehicle: the
    relocated one through the mission role, the receiving one through the
    slot role.
    """
    if policy == "base":
        keys = [(TabuKey(None, i, on_base=True), "i")]
        if kind is MoveKind.RELOCATE:
            keys.append((TabuKey(MoveKind.RELOCATE, vehicle), "j"))
        return keys
    return [(TabuKey(kind, vehicle), "j" if kind is MoveKind.RELOCATE else "i")]


def local_search(
    start: RankedStart | Assignment,
    inst: Instance,
    t: DistanceTable,
    cfg: SearchConfig | None = None,
    trace: list[MoveProposal] | None = None,
) -> Assignment:
    cfg = cfg or SearchConfig()
    state = SearchState(inst, t, _start_assignment(start))
    stream = PermutationStream(cfg.seed)
    perm_a = stream.permutation(state.n_bases)
    perm_b = stream.permutation(state.n_missions)
    passes = 0
    while True:
        applied = 0
        for i in perm_a:
            for j in perm_b:
                p = state.propose(i, j)
                if p is None or not p[2] < 0.0:
                    continue
                kind, vehicle, delta = p
                before = state.objective
                state.apply(kind, i, j, vehicle, delta)
                applied += 1
                if trace is not None:
                    trace.append(state.proposal(i, j, kind, vehicle, delta))
                if cfg.debug:
                    state.verify(before, delta)
        passes += 1
        log.debug("local pass %d: %d moves, objective %.3f", passes, applied, state.objective)
        if applied == 0 or (cfg.max_passes is not None and passes >= cfg.max_passes):
            break
        perm_a = stream.permutation(state.n_bases)
        perm_b = stream.permutation(state.n_missions)
    return state.to_assignment()


def tabu_search(
    start: RankedStart | Assignment,
    inst: Instance,
    t: DistanceTable,
    cfg: SearchConfig | None = None,
    trace: list[MoveProposal] | None = None,
) -> Assignment:
    """Local search plus a tenure-limited list of recently applied moves.

    Before a pair is evaluated, a listed key selected through the slot skips
    the rest of that slot's inner loop, and one selected through the mission
    skips just that mission. Counters drop by one per inner iteration,
    skipped ones included. Only improving moves are ever applied, and the
    search ends after a pass with neither moves nor skips.
    """
    cfg = cfg or SearchConfig(mode="tabu")
    state = SearchState(inst, t, _start_assignment(start))
    tenure = cfg.tenure_for(state.n_missions)
    tabu = TabuList()
    stream = PermutationStream(cfg.seed)
    perm_a = stream.permutation(state.n_bases)
    perm_b = stream.permutation(state.n_missions)
    passes = 0
    while True:
        applied = skipped = 0
        for i in perm_a:
            for j in perm_b:
                if tabu.entries:
                    key_i, key_j = tabu_keys(state, i, j, cfg.tabu_key)
                    if key_i is not None and tabu.blocks(key_i, "i"):
                        tabu.tick()
                        skipped += 1
                        break
                    if key_j is not None and tabu.blocks(key_j, "j"):
                        tabu.tick()
                        skipped += 1
                        continue
                p = state.propose(i, j)
                if p is not None and p[2] < 0.0:
                    kind, vehicle, delta = p
                    before = state.objective
                    state.apply(kind, i, j, vehicle, delta)
                    applied += 1
                    for key, role in keys_for_move(kind, i, vehicle, cfg.tabu_key):
                        tabu.add(key, role, tenure)
                    if trace is not None:
                        trace.append(state.proposal(i, j, kind, vehicle, delta))
                    if cfg.debug:
                        state.verify(before, delta)
                tabu.tick()
        passes += 1
        log.debug("tabu pass %d: %d moves, %d skips, objective %.3f", passes, applied, skipped, state.objective)
        # a pass that skipped pairs has not proven a local optimum; no entries are
        # added without moves, so they run out and the loop still ends
        if (applied == 0 and skipped == 0) or (cfg.max_passes is not None and passes >= cfg.max_passes):
            break
        perm_a = stream.permutation(state.n_bases)
        perm_b = stream.permutation(state.n_missions)
    return state.to_assignment()


def search(
    start: RankedStart | Assignment,
    inst: Instance,
    t: DistanceTable,
    cfg: SearchConfig,
    trace: list[MoveProposal] | None = None,
) -> Assignment:
    if cfg.mode == "tabu":
        return tabu_search(start, inst, t, cfg, trace)
    return local_search(start, inst, t, cfg, trace)
