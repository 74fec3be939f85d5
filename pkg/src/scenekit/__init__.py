"""scenekit: driving-scenario raster codec, lane-graph vectorization,
diffusion numerics, GEO/TOPO metrics and rule-based rollouts."""

from .scenario import (Agent, AgentState, Centerline, Scenario, Waypoint,
                       normalize_scenario, polyline_directions)
from .raster import FeatureMap, WorldToPixel, rasterize, decode_direction
from .vectorize import LaneGraph, VectorizeConfig, vectorize, vectorize_graph
from .metrics import GeoTopoScore, evaluate
from .diffusion import NoiseSchedule, make_schedule, forward_noise, sample

__all__ = [
    "Agent", "AgentState", "Centerline", "Scenario", "Waypoint",
    "normalize_scenario", "polyline_directions",
    "FeatureMap", "WorldToPixel", "rasterize", "decode_direction",
    "LaneGraph", "VectorizeConfig", "vectorize", "vectorize_graph",
    "GeoTopoScore", "evaluate",
    "NoiseSchedule", "make_schedule", "forward_noise", "sample",
]
