"""Fleet placement for air ambulances: base ranking, local and Tabu search, exact oracle."""

from .geo import EARTH_RADIUS_KM, GeoPoint, haversine_km, mission_cost_km
from .model import (
    Assignment,
    Base,
    BaseKind,
    DistanceTable,
    Instance,
    Mission,
    Vehicle,
    VehicleKind,
    build_distance_table,
    check_feasible,
    objective_km,
)
from .rank import rank_bases
from .search import SearchConfig, local_search, search, tabu_search

__version__ = "0.1.0"

__all__ = [
    "Assignment",
    "Base",
    "BaseKind",
    "DistanceTable",
    "EARTH_RADIUS_KM",
    "GeoPoint",
    "Instance",
    "Mission",
    "SearchConfig",
    "Vehicle",
    "VehicleKind",
    "build_distance_table",
    "check_feasible",
    "haversine_km",
    "local_search",
    "mission_cost_km",
    "objective_km",
    "rank_bases",
    "search",
    "tabu_search",
]
