"""Worker-pool execution of ranking and search.

Workers scan outer (slot) indices against a read snapshot, evaluating every
inner (mission) index of a slot at once. All state changes go through one
exclusive commit section that re-validates the move against the live state
before applying it.

Local search commits strictly in permutation order, so its result is the
sequential result for any worker count. Tabu search commits in arrival
order and decrements tenure counters in the same section; it gives a
comparable but generally different answer.
"""

from __future__ import annotations

import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .model import DistanceTable, Instance, Assignment
from .rank import RankedStart, column_totals
from .rng import PermutationStream
from .search import (
    MoveKind,
    MoveProposal,
    SearchConfig,
    SearchState,
    TabuKey,
    TabuList,
    keys_for_move,
    tabu_keys,
    tabu_search,
    _start_assignment,
)

WORKERS_ENV = "FLEETPLACE_WORKERS"


@dataclass(frozen=True)
class ParallelConfig:
    workers: int = 1
    batch: int | None = None  # outer indices per speculative round; default 4 * workers
    commit_protocol: str = "ordered"

    def __post_init__(self):
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.commit_protocol != "ordered":
            raise ValueError("only the ordered commit protocol is supported")

    @classmethod
    def from_env(cls, default: int = 1) -> "ParallelConfig":
        return cls(workers=int(os.environ.get(WORKERS_ENV, default)))

    @property
    def batch_size(self) -> int:
        return self.batch or 4 * self.workers


@dataclass
class CommitAudit:
    scans: int = 0
    commits_attempted: int = 0
    committed: int = 0
    rejected: int = 0
    stale_batches: int = 0
    applied: int = 0  # state mutations observed, should equal committed


def parallel_rank_totals(t: DistanceTable, pcfg: ParallelConfig) -> list[float]:
    n = t.cost.shape[1]
    if pcfg.workers == 1 or n == 0:
        return column_totals(t.cost, range(n))
    bounds = np.linspace(0, n, min(pcfg.workers, n) + 1).astype(int)
    chunks = [range(bounds[k], bounds[k + 1]) for k in range(len(bounds) - 1)]
    with ThreadPoolExecutor(max_workers=pcfg.workers) as pool:
        parts = list(pool.map(lambda cols: column_totals(t.cost, cols), chunks))
    return [x for part in parts for x in part]


class Snapshot:
    """Read-only copy of the parts of a SearchState the vectorized scan needs."""

    __slots__ = ("serve", "base_of", "occ", "busy", "version")

    def __init__(self, state: SearchState):
        self.serve = np.array(state.serve, dtype=np.intp)
        self.base_of = np.array(state.base_of, dtype=np.intp)
        self.occ = list(state.occ)
        self.busy = [bool(m) for m in state.members]
        self.version = state.version


def scan(state: SearchState, snap: Snapshot, i: int, perm_b: np.ndarray, start: int,
         blocked_relocations: frozenset[int] = frozenset()) -> int:
    """First position ``q >= start`` of ``perm_b`` whose move at slot ``i`` improves, or -1.

    Deltas are computed with the same float operations, in the same order,
    as ``SearchState.propose`` so the improving/non-improving verdicts agree
    bit for bit.
    """
    js = perm_b[start:]
    if len(js) == 0:
        return -1
    cost = state.cost
    serve = snap.serve
    u = snap.occ[i]
    w = serve[js]
    if u < 0:
        d = cost[:, i] - cost[np.arange(state.n_missions), snap.base_of[serve]]
        vdelta = np.bincount(serve, weights=d, minlength=state.n_vehicles)
        ok = vdelta[w] < 0.0
        if state.helipad[i]:
            ok &= ~state.fixed_arr[w]
        if blocked_relocations:
            ok &= ~np.isin(w, list(blocked_relocations))
    else:
        d = cost[js, i] - cost[js, snap.base_of[w]]
        ok = (w != u) & (d < 0.0)
        if state.fixed[u]:
            ok &= ~state.rotary_only_arr[js]
    hits = np.flatnonzero(ok)
    return int(start + hits[0]) if len(hits) else -1


def _commit_in_order(state: SearchState, i: int, perm_b: np.ndarray, q: int, cfg: SearchConfig,
                     audit: CommitAudit, trace: list | None) -> int:
    """Apply the move found at position q, then finish slot i's inner loop on live state."""
    n = 0
    while q >= 0:
        j = int(perm_b[q])
        audit.commits_attempted += 1
        p = state.propose(i, j)
        if p is not None and p[2] < 0.0:
            kind, vehicle, delta = p
            before = state.objective
            version = state.version
            state.apply(kind, i, j, vehicle, delta)
            audit.applied += state.version - version
            audit.committed += 1
            n += 1
            if trace is not None:
                trace.append(state.proposal(i, j, kind, vehicle, delta))
            if cfg.debug:
                state.verify(before, delta)
        else:
            audit.rejected += 1
        audit.scans += 1
        q = scan(state, Snapshot(state), i, perm_b, q + 1)
    return n


def parallel_local_search(
    start: RankedStart | Assignment,
    inst: Instance,
    t: DistanceTable,
    cfg: SearchConfig | None = None,
    pcfg: ParallelConfig | None = None,
    trace: list[MoveProposal] | None = None,
    audit: CommitAudit | None = None,
) -> Assignment:
    cfg = cfg or SearchConfig()
    pcfg = pcfg or ParallelConfig()
    audit = audit if audit is not None else CommitAudit()
    state = SearchState(inst, t, _start_assignment(start))
    stream = PermutationStream(cfg.seed)
    perm_a = stream.permutation(state.n_bases)
    perm_b = np.array(stream.permutation(state.n_missions), dtype=np.intp)
    lock = threading.Lock()
    pool = ThreadPoolExecutor(max_workers=pcfg.workers) if pcfg.workers > 1 else None
    passes = 0
    try:
        while True:
            applied = 0
            pos = 0
            while pos < len(perm_a):
                batch = perm_a[pos:pos + pcfg.batch_size]
                snap = Snapshot(state)
                if pool is not None:
                    results = list(pool.map(lambda i: scan(state, snap, i, perm_b, 0), batch))
                else:
                    results = [scan(state, snap, i, perm_b, 0) for i in batch]
                audit.scans += len(batch)
                for i, q in zip(batch, results):
                    if state.version != snap.version:
                        audit.stale_batches += 1
                        break
                    pos += 1
                    if q >= 0:
                        with lock:
                            applied += _commit_in_order(state, i, perm_b, q, cfg, audit, trace)
            passes += 1
            if applied == 0 or (cfg.max_passes is not None and passes >= cfg.max_passes):
                break
            perm_a = stream.permutation(state.n_bases)
            perm_b = np.array(stream.permutation(state.n_missions), dtype=np.intp)
    finally:
        if pool is not None:
            pool.shutdown()
    return state.to_assignment()


def parallel_tabu_search(
    start: RankedStart | Assignment,
    inst: Instance,
    t: DistanceTable,
    cfg: SearchConfig | None = None,
    pcfg: ParallelConfig | None = None,
    trace: list[MoveProposal] | None = None,
    audit: CommitAudit | None = None,
) -> Assignment:
    cfg = cfg or SearchConfig(mode="tabu")
    pcfg = pcfg or ParallelConfig()
    if pcfg.workers == 1:
        return tabu_search(start, inst, t, cfg, trace)
    audit = audit if audit is not None else CommitAudit()
    state = SearchState(inst, t, _start_assignment(start))
    tenure = cfg.tenure_for(state.n_missions)
    tabu = TabuList()
    lock = threading.Lock()
    stream = PermutationStream(cfg.seed)
    n_missions = state.n_missions
    skips = [0]  # pairs passed over because of the list, guarded by lock

    def run_slot(i: int, perm_b: np.ndarray) -> int:
        applied = 0
        pos = 0
        while pos < n_missions:
            with lock:
                key_i, _ = tabu_keys(state, i, int(perm_b[pos]), cfg.tabu_key)
                if key_i is not None and tabu.blocks(key_i, "i"):
                    tabu.tick()
                    skips[0] += 1
                    return applied
                snap = Snapshot(state)
                blocked = frozenset(k.entity for k, role in tabu.roles.items()
                                    if role == "j" and k.kind is MoveKind.RELOCATE)
                if blocked and snap.occ[i] < 0:
                    skips[0] += 1  # some relocations into this slot may be filtered out
            q = scan(state, snap, i, perm_b, pos, blocked)
            with lock:
                audit.scans += 1
                consumed = (q - pos + 1) if q >= 0 else (n_missions - pos)
                if q >= 0:
                    j = int(perm_b[q])
                    audit.commits_attempted += 1
                    key_i, key_j = tabu_keys(state, i, j, cfg.tabu_key)
                    blocked_now = (key_i is not None and tabu.blocks(key_i, "i")) or (
                        key_j is not None and tabu.blocks(key_j, "j"))
                    p = None if blocked_now else state.propose(i, j)
                    if p is not None and p[2] < 0.0:
                        kind, vehicle, delta = p
                        before = state.objective
                        version = state.version
                        state.apply(kind, i, j, vehicle, delta)
                        audit.applied += state.version - version
                        audit.committed += 1
                        applied += 1
                        for key, role in keys_for_move(kind, i, vehicle, cfg.tabu_key):
                            tabu.add(key, role, tenure)
                        if trace is not None:
                            trace.append(state.proposal(i, j, kind, vehicle, delta))
                        if cfg.debug:
                            state.verify(before, delta)
                    else:
                        audit.rejected += 1
                        skips[0] += blocked_now
                tabu.tick(consumed)
            if q < 0:
                return applied
            pos = q + 1
        return applied

    passes = 0
    with ThreadPoolExecutor(max_workers=pcfg.workers) as pool:
        while True:
            perm_a = stream.permutation(state.n_bases)
            perm_b = np.array(stream.permutation(n_missions), dtype=np.intp)
            skips[0] = 0
            applied = sum(pool.map(lambda i: run_slot(i, perm_b), perm_a))
            passes += 1
            if (applied == 0 and skips[0] == 0) or (cfg.max_passes is not None and passes >= cfg.max_passes):
                break
    return state.to_assignment()


__all__ = [
    "CommitAudit",
    "ParallelConfig",
    "TabuKey",
    "parallel_local_search",
    "parallel_rank_totals",
    "parallel_tabu_search",
    "scan",
]
