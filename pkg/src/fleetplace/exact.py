"""Exact references: brute-force enumeration for tiny instances and MILP text export/import.

Variable naming (ids, not positions):

    v_<rotary>_<mission>    helicopter serves mission
    w_<fixed>_<mission>     plane serves mission
    x_<fixed>_<aerodrome>   plane based at aerodrome
    y_<rotary>_<aerodrome>  helicopter based at aerodrome
    z_<rotary>_<helipad>    helicopter based at helipad
    s_<vehicle>_<base>_<mission>  product of the serve and place variables
"""

from __future__ import annotations

import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .model import (
    Assignment,
    DistanceTable,
    Instance,
    VehicleKind,
    BaseKind,
    check_feasible,
    compatible_vehicle_base,
    compatible_vehicle_mission,
    objective_km,
)

BINARY_TOLERANCE = 1e-6
DEFAULT_BUDGET = 5_000_000


class BudgetExceeded(RuntimeError):
    pass


class Infeasible(RuntimeError):
    pass


class UnknownVariable(ValueError):
    pass


class NonBinaryValue(ValueError):
    pass


class InfeasibleReconstruction(ValueError):
    def __init__(self, reason, violations=()):
        self.violations = list(violations)
        super().__init__(reason)


@dataclass
class ExactResult:
    assignment: Assignment
    objective_km: float
    nodes_enumerated: int


def search_space_size(inst: Instance) -> int:
    """Placement leaves (ignoring base exclusivity) times per-leaf service decisions."""
    size = 1
    for v in inst.fleet:
        size *= sum(compatible_vehicle_base(v, b) for b in inst.bases)
    return size * max(1, len(inst.missions))


def _service_for(inst, cost, placement_cols, vehicles, mission_options):
    total = 0.0
    service = []
    for z, options in enumerate(mission_options):
        row = cost[z]
        best_c, best_v = None, None
        for vk in options:
            c = row[placement_cols[vk]]
            if best_c is None or c < best_c:
                best_c, best_v = c, vk
        total += best_c
        service.append(best_v)
    return total, service


def _enumerate(inst, cost, vehicles, base_options, mission_options, first_choices):
    """Depth-first over placements in lexicographic order; returns (obj, placement, service, leaves)."""
    n = len(vehicles)
    cols = [-1] * n
    used = set()
    best = [None, None, None]
    leaves = 0

    def rec(d):
        nonlocal leaves
        if d == n:
            leaves += 1
            total, service = _service_for(inst, cost, cols, vehicles, mission_options)
            if best[0] is None or total < best[0]:
                best[0], best[1], best[2] = total, list(cols), service
            return
        choices = first_choices if d == 0 else base_options[d]
        for k in choices:
            if k in used:
                continue
            used.add(k)
            cols[d] = k
            rec(d + 1)
            used.discard(k)
        cols[d] = -1

    rec(0)
    return best[0], best[1], best[2], leaves


def brute_force_optimal(
    inst: Instance, t: DistanceTable, limit: int = DEFAULT_BUDGET, workers: int = 1
) -> ExactResult:
    """Globally optimal assignment by exhaustive placement enumeration.

    Once placement is fixed, missions are independent, so each leaf serves
    every mission from its cheapest placed compatible vehicle. Placements
    are visited in lexicographic (vehicle id, base id) order and only strict
    improvements replace the incumbent, which makes the lexicographically
    smallest optimal encoding win ties. ``workers`` > 1 splits the first
    vehicle's base choices across threads with the same result.
    """
    size = search_space_size(inst)
    if size > limit:
        raise BudgetExceeded(f"search space {size} exceeds budget {limit}")
    vehicles = sorted(inst.fleet, key=lambda v: v.id)
    base_order = sorted(range(len(inst.bases)), key=lambda k: inst.bases[k].id)
    base_options = [[k for k in base_order if compatible_vehicle_base(v, inst.bases[k])] for v in vehicles]
    mission_options = [[vk for vk, v in enumerate(vehicles) if compatible_vehicle_mission(v, m)]
                       for m in inst.missions]
    for m, opts in zip(inst.missions, mission_options):
        if not opts:
            raise Infeasible(f"no vehicle can serve mission {m.id}")
    cost = t.cost.tolist()

    chunks = [[k] for k in base_options[0]] if workers > 1 else [base_options[0]]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(
                lambda ch: _enumerate(inst, cost, vehicles, base_options, mission_options, ch), chunks))
    else:
        parts = [_enumerate(inst, cost, vehicles, base_options, mission_options, chunks[0])]

    best = None
    leaves = 0
    for obj, cols, service, n in parts:  # chunks are in lexicographic order
        leaves += n
        if obj is not None and (best is None or obj < best[0]):
            best = (obj, cols, service)
    if best is None:
        raise Infeasible("no feasible placement of the fleet")
    _, cols, service = best
    a = Assignment(
        {v.id: inst.bases[cols[vk]].id for vk, v in enumerate(vehicles)},
        {m.id: vehicles[service[z]].id for z, m in enumerate(inst.missions)},
    )
    return ExactResult(a, objective_km(a, inst, t), leaves)


# --- MILP model -----------------------------------------------------------

@dataclass
class Row:
    name: str
    coeffs: dict[str, float]
    sense: str  # "<=", ">=", "="
    rhs: float


@dataclass
class MilpModel:
    objective: dict[str, float] = field(default_factory=dict)
    rows: list[Row] = field(default_factory=list)
    binaries: list[str] = field(default_factory=list)

    def evaluate(self, values: dict[str, float], tol: float = 1e-9) -> tuple[float, list[str]]:
        """Objective value and names of violated rows for a full variable assignment."""
        obj = math.fsum(c * values.get(n, 0.0) for n, c in self.objective.items())
        broken = []
        for r in self.rows:
            lhs = math.fsum(c * values.get(n, 0.0) for n, c in r.coeffs.items())
            ok = (lhs <= r.rhs + tol) if r.sense == "<=" else (lhs >= r.rhs - tol) if r.sense == ">=" \
                else abs(lhs - r.rhs) <= tol
            if not ok:
                broken.append(r.name)
        return obj, broken


def _place_var(v, b) -> str:
    if v.kind is VehicleKind.FIXED:
        return f"x_{v.id}_{b.id}"
    return f"y_{v.id}_{b.id}" if b.kind is BaseKind.AERODROME else f"z_{v.id}_{b.id}"


def _serve_var(v, m) -> str:
    return f"{'w' if v.kind is VehicleKind.FIXED else 'v'}_{v.id}_{m.id}"


def build_milp(inst: Instance, t: DistanceTable) -> MilpModel:
    rotary, fixed = inst.rotary, inst.fixed
    aero, heli = inst.aerodromes, inst.helipads
    model = MilpModel()
    names: list[str] = []
    names += [f"v_{i.id}_{m.id}" for i in rotary for m in inst.missions]
    names += [f"w_{j.id}_{m.id}" for j in fixed for m in inst.missions]
    names += [f"x_{j.id}_{k.id}" for j in fixed for k in aero]
    names += [f"y_{i.id}_{k.id}" for i in rotary for k in aero]
    names += [f"z_{i.id}_{n.id}" for i in rotary for n in heli]
    col = inst.base_index
    lin = []
    for v in inst.fleet:
        for b in inst.bases:
            if not compatible_vehicle_base(v, b):
                continue
            for z, m in enumerate(inst.missions):
                s = f"s_{v.id}_{b.id}_{m.id}"
                names.append(s)
                model.objective[s] = float(t.cost[z, col[b.id]])
                lin.append((s, _serve_var(v, m), _place_var(v, b)))
    model.binaries = names
    rows = model.rows
    for m in inst.missions:
        rows.append(Row(f"c3_{m.id}", {_serve_var(v, m): 1.0 for v in rotary + fixed}, "=", 1.0))
    for i in rotary:
        rows.append(Row(f"c4_{i.id}", {_place_var(i, b): 1.0 for b in aero + heli}, "=", 1.0))
    for j in fixed:
        rows.append(Row(f"c5_{j.id}", {_place_var(j, k): 1.0 for k in aero}, "=", 1.0))
    for n in heli:
        rows.append(Row(f"c6_{n.id}", {_place_var(i, n): 1.0 for i in rotary}, "<=", 1.0))
    for k in aero:
        coeffs = {_place_var(j, k): 1.0 for j in fixed}
        coeffs.update({_place_var(i, k): 1.0 for i in rotary})
        rows.append(Row(f"c7_{k.id}", coeffs, "<=", 1.0))
    # service requires placement, stated per mission
    for i in rotary:
        for m in inst.missions:
            coeffs = {_serve_var(i, m): 1.0}
            coeffs.update({_place_var(i, b): -1.0 for b in aero + heli})
            rows.append(Row(f"c8_{i.id}_{m.id}", coeffs, "<=", 0.0))
    for j in fixed:
        for m in inst.missions:
            coeffs = {_serve_var(j, m): 1.0}
            coeffs.update({_place_var(j, k): -1.0 for k in aero})
            rows.append(Row(f"c9_{j.id}_{m.id}", coeffs, "<=", 0.0))
    for j in fixed:
        for m in inst.missions:
            rows.append(Row(f"c10_{j.id}_{m.id}", {_serve_var(j, m): 1.0}, "<=", 1.0 - float(m.rotary_only)))
    for s, serve, place in lin:
        rows.append(Row(f"ls_{s[2:]}", {s: 1.0, serve: -1.0}, "<=", 0.0))
        rows.append(Row(f"lp_{s[2:]}", {s: 1.0, place: -1.0}, "<=", 0.0))
        rows.append(Row(f"lb_{s[2:]}", {s: 1.0, serve: -1.0, place: -1.0}, ">=", -1.0))
    return model


def milp_variable_count(inst: Instance) -> int:
    n_r, n_f, n_m = len(inst.rotary), len(inst.fixed), len(inst.missions)
    n_a, n_h = len(inst.aerodromes), len(inst.helipads)
    compat = sum(compatible_vehicle_base(v, b) for v in inst.fleet for b in inst.bases)
    return n_r * n_m + n_f * n_m + n_f * n_a + n_r * n_a + n_r * n_h + n_m * compat


def _num(x: float) -> str:
    return repr(float(x))


def render_lp(model: MilpModel) -> str:
    out = ["\\ air-ambulance fleet placement", "Minimize"]

    def expr(coeffs, lead):
        parts, line = [], lead
        for n, c in coeffs.items():
            term = f"{'-' if c < 0 else '+'} {_num(abs(c))} {n}"
            if len(line) + len(term) > 200:
                parts.append(line)
                line = "   "
            line += " " + term
        parts.append(line)
        return parts

    out += expr(model.objective, " obj:")
    out.append("Subject To")
    for r in model.rows:
        body = expr(r.coeffs, f" {r.name}:")
        body[-1] += f" {r.sense} {_num(r.rhs)}"
        out += body
    out.append("Binaries")
    line = ""
    for n in model.binaries:
        if len(line) + len(n) > 200:
            out.append(line)
            line = ""
        line += " " + n
    if line:
        out.append(line)
    out.append("End")
    return "\n".join(out) + "\n"


def render_mps(model: MilpModel, name: str = "FLEET") -> str:
    """Free-format MPS (names are longer than the 8 characters fixed columns allow)."""
    sense = {"<=": "L", ">=": "G", "=": "E"}
    by_col: dict[str, list[tuple[str, float]]] = {n: [] for n in model.binaries}
    for n, c in model.objective.items():
        by_col[n].append(("obj", c))
    for r in model.rows:
        for n, c in r.coeffs.items():
            by_col[n].append((r.name, c))
    out = [f"NAME {name}", "ROWS", " N obj"]
    out += [f" {sense[r.sense]} {r.name}" for r in model.rows]
    out += ["COLUMNS", "    MARKER 'MARKER' 'INTORG'"]
    for n in model.binaries:
        for row, c in by_col[n]:
            out.append(f"    {n} {row} {_num(c)}")
    out += ["    MARKER 'MARKER' 'INTEND'", "RHS"]
    out += [f"    rhs {r.name} {_num(r.rhs)}" for r in model.rows if r.rhs != 0.0]
    out.append("BOUNDS")
    out += [f" BV bnd {n}" for n in model.binaries]
    out.append("ENDATA")
    return "\n".join(out) + "\n"


def export_milp(inst: Instance, t: DistanceTable, fmt: str = "lp") -> str:
    model = build_milp(inst, t)
    fmt = fmt.lower()
    if fmt == "lp":
        return render_lp(model)
    if fmt == "mps":
        return render_mps(model)
    raise ValueError(f"unknown format {fmt!r}")


_SENSE = {"<=": "<=", "=<": "<=", "<": "<=", ">=": ">=", "=>": ">=", ">": ">=", "=": "="}


def parse_lp(text: str) -> MilpModel:
    """Read back the LP dialect written by :func:`render_lp`."""
    model = MilpModel()
    section = None
    current: list[str] = []
    statements: list[tuple[str, str]] = []
    for raw in text.splitlines():
        line = raw.split("\\", 1)[0].strip()
        if not line:
            continue
        key = line.lower()
        if key in ("minimize", "subject to", "binaries", "end"):
            if current:
                statements.append((section, " ".join(current)))
                current = []
            section = key
            continue
        if section in ("minimize", "subject to") and ":" in line and current:
            statements.append((section, " ".join(current)))
            current = []
        current.append(line)
    if current:
        statements.append((section, " ".join(current)))

    term = re.compile(r"([+-])\s*([0-9.eE+-]+)\s+([A-Za-z_][\w]*)")
    for section, stmt in statements:
        if section == "binaries":
            model.binaries += stmt.split()
            continue
        name, body = stmt.split(":", 1)
        if section == "minimize":
            for sign, c, n in term.findall(body):
                model.objective[n] = float(c) * (-1 if sign == "-" else 1)
            continue
        m = re.search(r"(<=|>=|=<|=>|<|>|=)\s*([-+0-9.eE]+)\s*$", body)
        if not m:
            raise ValueError(f"constraint without sense: {name}")
        coeffs = {n: float(c) * (-1 if sign == "-" else 1) for sign, c, n in term.findall(body[:m.start()])}
        model.rows.append(Row(name.strip(), coeffs, _SENSE[m.group(1)], float(m.group(2))))
    return model


def parse_mps(text: str) -> MilpModel:
    """Read back free-format MPS as written by :func:`render_mps`."""
    model = MilpModel()
    rows: dict[str, Row] = {}
    obj_row = None
    section = None
    sense = {"L": "<=", "G": ">=", "E": "="}
    for raw in text.splitlines():
        if not raw.strip() or raw.startswith("*"):
            continue
        if not raw[0].isspace():
            section = raw.split()[0].upper()
            continue
        f = raw.split()
        if section == "ROWS":
            if f[0] == "N":
                obj_row = f[1]
            else:
                rows[f[1]] = Row(f[1], {}, sense[f[0]], 0.0)
                model.rows.append(rows[f[1]])
        elif section == "COLUMNS":
            if len(f) >= 3 and f[1] == "'MARKER'":
                continue
            n = f[0]
            if n not in model.binaries:
                model.binaries.append(n)
            for k in range(1, len(f) - 1, 2):
                r, c = f[k], float(f[k + 1])
                if r == obj_row:
                    model.objective[n] = c
                else:
                    rows[r].coeffs[n] = c
        elif section == "RHS":
            for k in range(1, len(f) - 1, 2):
                rows[f[k]].rhs = float(f[k + 1])
    return model


def assignment_values(a: Assignment, inst: Instance) -> dict[str, float]:
    """Exporter variable values that encode an assignment."""
    vals: dict[str, float] = {}
    vehicles = {v.id: v for v in inst.fleet}
    bases = {b.id: b for b in inst.bases}
    for vid, bid in a.placement.items():
        vals[_place_var(vehicles[vid], bases[bid])] = 1.0
    for m in inst.missions:
        v = vehicles[a.service[m.id]]
        vals[_serve_var(v, m)] = 1.0
        b = bases[a.placement[v.id]]
        vals[f"s_{v.id}_{b.id}_{m.id}"] = 1.0
    return vals


_NAME = re.compile(r"^([vwxyz])_(-?\d+)_(-?\d+)$|^s_(-?\d+)_(-?\d+)_(-?\d+)$")


def import_solution(text: str, inst: Instance) -> Assignment:
    """Rebuild an assignment from ``name value`` lines; '#' starts a comment."""
    rotary = {v.id for v in inst.rotary}
    fixed = {v.id for v in inst.fixed}
    aero = {b.id for b in inst.aerodromes}
    heli = {b.id for b in inst.helipads}
    missions = set(inst.mission_index)
    all_v, all_b = rotary | fixed, aero | heli
    domains = {"v": (rotary, missions), "w": (fixed, missions), "x": (fixed, aero),
               "y": (rotary, aero), "z": (rotary, heli)}
    placement: dict[int, int] = {}
    service: dict[int, int] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 2:
            raise ValueError(f"line {lineno}: expected 'name value'")
        name, value = fields[0], float(fields[1])
        m = _NAME.match(name)
        if not m:
            raise UnknownVariable(name)
        bit = round(value)
        if abs(value - bit) > BINARY_TOLERANCE or bit not in (0, 1):
            raise NonBinaryValue(f"{name} = {value}")
        if m.group(1):
            kind, a, b = m.group(1), int(m.group(2)), int(m.group(3))
            first, second = domains[kind]
            if a not in first or b not in second:
                raise UnknownVariable(name)
        else:
            a, b, c = int(m.group(4)), int(m.group(5)), int(m.group(6))
            if a not in all_v or b not in all_b or c not in missions:
                raise UnknownVariable(name)
            continue
        if not bit:
            continue
        if kind in "vw":
            if b in service:
                raise InfeasibleReconstruction(f"mission {b} served twice")
            service[b] = a
        else:
            if a in placement:
                raise InfeasibleReconstruction(f"vehicle {a} placed twice")
            placement[a] = b
    assignment = Assignment(placement, service)
    violations = check_feasible(assignment, inst)
    if violations:
        raise InfeasibleReconstruction(f"reconstructed assignment is infeasible: {violations[0]}", violations)
    return assignment
