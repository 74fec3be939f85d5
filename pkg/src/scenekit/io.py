"""Scenario files, synthetic corpus generation.

Scenario files are canonical JSON: sorted keys, 2-space indent, floats
rounded to 6 decimals, so write -> read -> write is byte-identical and diffs
stay reviewable.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError, SchemaVersionMismatch
from .scenario import (Agent, AgentState, Centerline, Scenario,
                       normalize_scenario)

SCHEMA_VERSION = 1
TEMPLATES = ("straight", "curved", "t_junction", "x_junction", "merge")


def _r6(x: float) -> float:
    v = round(float(x), 6)
    return 0.0 if v == 0.0 else v  # normalize -0.0


def _state_to_list(st: AgentState) -> list:
    return [_r6(st.x), _r6(st.y), _r6(st.heading), _r6(st.speed)]


def scenario_to_dict(s: Scenario, metadata: dict | None = None) -> dict:
    agents = []
    for a in s.agents:
        entry = {
            "x": _r6(a.initial_state.x),
            "y": _r6(a.initial_state.y),
            "heading": _r6(a.initial_state.heading),
            "speed": _r6(a.initial_state.speed),
            "length": _r6(a.length),
            "width": _r6(a.width),
        }
        if a.trajectory is not None:
            entry["trajectory"] = [_state_to_list(t) for t in a.trajectory]
            entry["dt"] = _r6(a.dt)
        agents.append(entry)
    return {
        "schema_version": SCHEMA_VERSION,
        "range": _r6(s.range_m),
        "v_max": _r6(s.v_max),
        "lanes": [[[_r6(x), _r6(y)] for x, y in lane.points] for lane in s.lanes],
        "agents": agents,
        "metadata": metadata or {},
    }


def write_scenario(s: Scenario, path, metadata: dict | None = None) -> None:
    text = json.dumps(scenario_to_dict(s, metadata), sort_keys=True, indent=2)
    with open(path, "w") as f:
        f.write(text + "\n")


def scenario_from_dict(d: dict, source: str = "<dict>") -> Scenario:
    if not isinstance(d, dict):
        raise ParseError(f"{source}: top level must be an object")
    version = d.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaVersionMismatch(
            f"{source}: schema_version {version!r}, expected {SCHEMA_VERSION}")
    try:
        range_m = float(d["range"])
        v_max = float(d["v_max"])
    except (KeyError, TypeError, ValueError) as e:
        raise ParseError(f"{source}: bad or missing range/v_max: {e}") from e
    lanes = []
    for i, pts in enumerate(d.get("lanes", [])):
        try:
            lanes.append(Centerline(np.asarray(pts, dtype=float)))
        except Exception as e:
            raise ParseError(f"{source}: lane {i}: {e}") from e
    agents = []
    for i, a in enumerate(d.get("agents", [])):
        try:
            if a["speed"] > v_max:
                raise ParseError(
                    f"{source}: agent {i}: speed {a['speed']} exceeds v_max {v_max}")
            st = AgentState(float(a["x"]), float(a["y"]),
                            float(a["heading"]), float(a["speed"]))
            traj = None
            if "trajectory" in a:
                traj = tuple(AgentState(*map(float, row)) for row in a["trajectory"])
            agents.append(Agent(float(a["length"]), float(a["width"]), st,
                                trajectory=traj, dt=float(a.get("dt", 0.1))))
        except ParseError:
            raise
        except (KeyError, TypeError, ValueError) as e:
            raise ParseError(f"{source}: agent {i}: {e}") from e
    try:
        return Scenario(lanes, agents, range_m, v_max)
    except ValueError as e:
        raise ParseError(f"{source}: {e}") from e


def read_scenario(path) -> Scenario:
    try:
        with open(path) as f:
            d = json.load(f)
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: invalid JSON at line {e.lineno}: {e.msg}") from e
    except OSError as e:
        raise ParseError(f"{path}: {e}") from e
    return scenario_from_dict(d, source=str(path))


# ---------------------------------------------------------------------------
# synthetic corpus

@dataclass
class CorpusConfig:
    counts: dict = field(default_factory=lambda: {t: 2 for t in TEMPLATES})
    range_m: float = 80.0
    v_max: float = 30.0
    max_agents: int = 5


def _rot(pts: np.ndarray, angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return pts @ np.array([[c, s], [-s, c]])


def _arc(center, radius, a0, a1, spacing=0.75) -> np.ndarray:
    n = max(6, int(abs(a1 - a0) * radius / spacing))
    t = np.linspace(a0, a1, n)
    return np.column_stack([center[0] + radius * np.cos(t),
                            center[1] + radius * np.sin(t)])


def _line(p0, p1, spacing=2.0) -> np.ndarray:
    p0, p1 = np.asarray(p0, float), np.asarray(p1, float)
    n = max(2, int(np.hypot(*(p1 - p0)) / spacing) + 1)
    t = np.linspace(0.0, 1.0, n)[:, None]
    return p0 + t * (p1 - p0)


def _template_straight(rng, half):
    n = int(rng.integers(1, 4))
    lanes = []
    base = rng.uniform(-0.3 * half, 0.3 * half)
    for i in range(n):
        off = base + 3.5 * i
        lanes.append(_line((-1.1 * half, off), (1.1 * half, off)))
    return lanes


def _template_curved(rng, half):
    radius = rng.uniform(0.8 * half, 2.5 * half)
    span = 2.4 * half / radius
    a0 = rng.uniform(0, 2 * math.pi)
    center = (-radius, 0.0)
    lanes = [_arc(center, radius, a0, a0 + span)]
    if rng.random() < 0.5:
        lanes.append(_arc(center, radius + 3.5, a0, a0 + span))
    return lanes


def _junction_arms(half, s, j, arms):
    """Through/approach lanes for the given arm set of a crossing at origin."""
    L = 1.1 * half
    lanes = []
    if "e" in arms and "w" in arms:
        lanes.append(_line((-L, -s), (L, -s)))   # eastbound through
        lanes.append(_line((L, s), (-L, s)))     # westbound through
    if "n" in arms and "s" in arms:
        lanes.append(_line((s, -L), (s, L)))     # northbound through
        lanes.append(_line((-s, L), (-s, -L)))   # southbound through
    if "s" in arms and "n" not in arms:
        lanes.append(_line((s, -L), (s, -j)))    # northbound approach
        lanes.append(_line((-s, -j), (-s, -L)))  # southbound exit
    return lanes


def _right_turn(s, j):
    # entry (s, -j) heading +y -> exit (j, -s) heading +x
    return _arc((j, -j), j - s, math.pi, math.pi / 2)


def _left_turn(s, j):
    # entry (s, -j) heading +y -> exit (-j, s) heading -x
    return _arc((-j, -j), j + s, 0.0, math.pi / 2)


def _template_t_junction(rng, half):
    s = rng.uniform(1.6, 2.0)
    j = rng.uniform(8.0, 12.0)
    lanes = _junction_arms(half, s, j, {"e", "w", "s"})
    lanes.append(_right_turn(s, j))                    # south -> east
    lanes.append(_left_turn(s, j))                     # south -> west
    lanes.append(_arc((-j, -j), j - s, math.pi / 2, 0.0))       # east-bound -> south
    lanes.append(_arc((j, -j), j + s, math.pi / 2, math.pi))    # west-bound -> south
    return lanes


def _template_x_junction(rng, half):
    s = rng.uniform(1.6, 2.0)
    j = rng.uniform(8.0, 12.0)
    lanes = _junction_arms(half, s, j, {"e", "w", "n", "s"})
    for k in range(4):
        ang = k * math.pi / 2
        lanes.append(_rot(_right_turn(s, j), -ang))
        if rng.random() < 0.5:
            lanes.append(_rot(_left_turn(s, j), -ang))
    return lanes


def _template_merge(rng, half):
    L = 1.1 * half
    lanes = [_line((-L, 0.0), (L, 0.0))]
    theta = rng.uniform(math.radians(12), math.radians(25))
    run = rng.uniform(0.5 * half, 0.9 * half)
    merge_x = rng.uniform(-0.2 * half, 0.2 * half)
    start = np.array([merge_x - run * math.cos(theta), -run * math.sin(theta)])
    # cubic blend: straight ramp departing at -theta, tangent to +x at the merge
    p0 = start
    p3 = np.array([merge_x, 0.0])
    d = np.hypot(*(p3 - p0))
    p1 = p0 + d / 3 * np.array([math.cos(theta), math.sin(theta)])
    p2 = p3 - d / 3 * np.array([1.0, 0.0])
    t = np.linspace(0, 1, max(12, int(d)))[:, None]
    ramp = ((1 - t) ** 3 * p0 + 3 * (1 - t) ** 2 * t * p1
            + 3 * (1 - t) * t ** 2 * p2 + t ** 3 * p3)
    lanes.append(ramp)
    return lanes


_BUILDERS = {
    "straight": _template_straight,
    "curved": _template_curved,
    "t_junction": _template_t_junction,
    "x_junction": _template_x_junction,
    "merge": _template_merge,
}


def _place_agents(rng, lanes, v_max, max_agents):
    agents = []
    n = int(rng.integers(1, max_agents + 1))
    for _ in range(n):
        lane = lanes[int(rng.integers(0, len(lanes)))]
        pts = lane.points
        seg = np.diff(pts, axis=0)
        d = np.hypot(seg[:, 0], seg[:, 1])
        arclen = np.concatenate([[0.0], np.cumsum(d)])
        if arclen[-1] < 12.0:
            continue
        t = rng.uniform(4.0, arclen[-1] - 4.0)
        x = float(np.interp(t, arclen, pts[:, 0]))
        y = float(np.interp(t, arclen, pts[:, 1]))
        i = int(np.searchsorted(arclen[1:], t))
        i = min(i, seg.shape[0] - 1)
        heading = math.atan2(seg[i, 1], seg[i, 0])
        speed = float(rng.uniform(2.0, 0.5 * v_max))
        agents.append(Agent(
            length=float(rng.uniform(4.2, 5.2)),
            width=float(rng.uniform(1.8, 2.1)),
            initial_state=AgentState(x, y, heading, speed),
        ))
    return agents


def generate_scenario(template: str, rng: np.random.Generator,
                      range_m: float = 80.0, v_max: float = 30.0,
                      max_agents: int = 5) -> Scenario:
    """One randomized scenario from a named template, normalized and clipped."""
    if template not in _BUILDERS:
        raise ValueError(f"unknown template {template!r}; choose from {TEMPLATES}")
    half = range_m / 2.0
    raw = _BUILDERS[template](rng, half)
    angle = rng.uniform(0.0, 2 * math.pi)
    lanes = [Centerline(_rot(p, angle)) for p in raw]
    agents = _place_agents(rng, lanes, v_max, max_agents)
    return normalize_scenario(Scenario(lanes, agents, range_m, v_max))


def generate_synthetic_corpus(cfg: CorpusConfig, seed: int) -> list:
    """Deterministic-by-seed list of scenarios; template order is fixed."""
    rng = np.random.default_rng(seed)
    out = []
    for template in TEMPLATES:
        for _ in range(int(cfg.counts.get(template, 0))):
            out.append(generate_scenario(template, rng, cfg.range_m,
                                         cfg.v_max, cfg.max_agents))
    return out
