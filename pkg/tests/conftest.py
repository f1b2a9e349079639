import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fleetplace.data import generate_instance, synthesize_pool
from fleetplace.geo import GeoPoint
from fleetplace.model import (
    Base,
    BaseKind,
    Instance,
    Mission,
    Vehicle,
    VehicleKind,
    build_distance_table,
)

FIXTURES = Path(__file__).parent / "fixtures"

R, F = VehicleKind.ROTARY, VehicleKind.FIXED
AERO, HELI = BaseKind.AERODROME, BaseKind.HELIPAD


def tiny_two_vehicle_instance() -> Instance:
    """One helicopter, one plane, two aerodromes and a helipad, one rotary-only mission."""
    bases = (
        Base(1, AERO, GeoPoint(44.0, -79.0)),
        Base(2, AERO, GeoPoint(45.0, -76.0)),
        Base(3, HELI, GeoPoint(43.7, -79.4)),
    )
    fleet = (Vehicle(1, R), Vehicle(2, F))
    missions = (
        Mission(1, GeoPoint(43.65, -79.38), GeoPoint(43.66, -79.39), rotary_only=True),
        Mission(2, GeoPoint(45.4, -75.7), GeoPoint(45.3, -75.9), rotary_only=False),
    )
    return Instance(bases, fleet, missions)


def small_instance(seed: int, n_missions: int = 6, n_aero: int = 6, n_heli: int = 2,
                   fleet=(R, R, F), rotary_only_fraction: float = 0.3) -> Instance:
    """Brute-force sized instance drawn from a small synthetic pool."""
    pool = synthesize_pool(seed, counts=(n_aero, n_heli, 12), n_clusters=3, spread=0.08)
    vehicles = [Vehicle(k + 1, kind) for k, kind in enumerate(fleet)]
    return generate_instance(pool, n_missions, rotary_only_fraction, seed=seed, fleet=vehicles)


@pytest.fixture
def tiny():
    inst = tiny_two_vehicle_instance()
    return inst, build_distance_table(inst)


@pytest.fixture(scope="session")
def pool():
    return synthesize_pool(7)


@pytest.fixture(scope="session")
def inst80(pool):
    inst = generate_instance(pool, 80, seed=3)
    return inst, build_distance_table(inst)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
