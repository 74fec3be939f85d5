"""Rule-based multi-modal futures from an initial scene.

Each agent is snapped to the nearest direction-compatible lane edge and
follows it with constant-speed pure-pursuit steering. At lane-graph forks the
K futures enumerate branch choices (straightest first); unassignable agents
coast straight at constant velocity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import HorizonTooShort
from .scenario import Agent, AgentState, Centerline, Scenario, wrap_angle
from .vectorize import DirectedEdge, LaneGraph, LaneVertex

DEFAULT_K = 3
DEFAULT_HORIZON_S = 8.0
DEFAULT_DT = 0.1
MAX_LATERAL_M = 5.0
MAX_MISALIGN_RAD = math.radians(60.0)


@dataclass
class JointFuture:
    trajectories: list  # one list of AgentState per agent (index-aligned)
    probability: float


# ---------------------------------------------------------------------------
# lane graph from plain scenario lanes

def lane_graph_from_scenario(s: Scenario, join_tol: float = 0.5) -> LaneGraph:
    """Directed lane graph with vertices at lane endpoints and at interior
    points where another lane's endpoint touches (so forks and merges split
    the through lane)."""
    endpoints = []
    for lane in s.lanes:
        endpoints.append(lane.points[0])
        endpoints.append(lane.points[-1])
    endpoints = np.array(endpoints) if endpoints else np.zeros((0, 2))

    pieces = []
    for lane in s.lanes:
        p = lane.points
        seg = np.diff(p, axis=0)
        d = np.hypot(seg[:, 0], seg[:, 1])
        arclen = np.concatenate([[0.0], np.cumsum(d)])
        cuts = {0.0, float(arclen[-1])}
        for ep in endpoints:
            t, dist = _project_to_polyline(p, arclen, ep)
            if dist <= join_tol and join_tol < t < arclen[-1] - join_tol:
                cuts.add(float(t))
        cut_s = sorted(cuts)
        for a, b in zip(cut_s[:-1], cut_s[1:]):
            sub = _slice_polyline(p, arclen, a, b)
            if sub.shape[0] >= 2:
                pieces.append(sub)

    g = LaneGraph()
    positions: list[np.ndarray] = []

    def vertex_at(pt: np.ndarray) -> int:
        for i, q in enumerate(positions):
            if np.hypot(*(q - pt)) <= join_tol:
                return i
        positions.append(pt)
        return g.add_vertex(LaneVertex(pt, None, None))

    for sub in pieces:
        u = vertex_at(sub[0])
        v = vertex_at(sub[-1])
        g.edges.append(DirectedEdge(u, v, Centerline(sub)))
    return g


def _project_to_polyline(p: np.ndarray, arclen: np.ndarray, q: np.ndarray):
    """(arc position, distance) of the closest point on polyline p to q."""
    best_t, best_d = 0.0, math.inf
    for i in range(p.shape[0] - 1):
        a, b = p[i], p[i + 1]
        ab = b - a
        ll = float(ab @ ab)
        u = 0.0 if ll == 0 else float(np.clip((q - a) @ ab / ll, 0.0, 1.0))
        proj = a + u * ab
        d = float(np.hypot(*(q - proj)))
        if d < best_d:
            best_d = d
            best_t = float(arclen[i] + u * (arclen[i + 1] - arclen[i]))
    return best_t, best_d


def _slice_polyline(p: np.ndarray, arclen: np.ndarray, a: float, b: float) -> np.ndarray:
    inner = (arclen > a + 1e-9) & (arclen < b - 1e-9)
    s_vals = np.concatenate([[a], arclen[inner], [b]])
    x = np.interp(s_vals, arclen, p[:, 0])
    y = np.interp(s_vals, arclen, p[:, 1])
    pts = np.column_stack([x, y])
    seg = np.diff(pts, axis=0)
    keep = np.concatenate([[True], np.hypot(seg[:, 0], seg[:, 1]) > 1e-9])
    return pts[keep]


# ---------------------------------------------------------------------------
# lane assignment

def assign_lane(state: AgentState, g: LaneGraph,
                max_lateral: float = MAX_LATERAL_M,
                max_misalign: float = MAX_MISALIGN_RAD):
    """Nearest direction-compatible edge index, or None.

    Score = lateral distance + 2m * (heading misalignment / 60 deg); edges
    farther than max_lateral or misaligned beyond max_misalign are excluded.
    """
    q = np.array([state.x, state.y])
    best, best_score = None, math.inf
    for ei, e in enumerate(g.edges):
        p = e.geometry.points
        seg = np.diff(p, axis=0)
        d = np.hypot(seg[:, 0], seg[:, 1])
        arclen = np.concatenate([[0.0], np.cumsum(d)])
        t, dist = _project_to_polyline(p, arclen, q)
        if dist > max_lateral:
            continue
        i = int(np.searchsorted(arclen[1:], t))
        i = min(i, seg.shape[0] - 1)
        tangent = math.atan2(seg[i, 1], seg[i, 0])
        misalign = abs(wrap_angle(state.heading - tangent))
        if misalign > max_misalign:
            continue
        score = dist + 2.0 * misalign / MAX_MISALIGN_RAD
        if score < best_score:
            best_score = score
            best = ei
    return best


# ---------------------------------------------------------------------------
# path construction and pure pursuit

def _edge_exit_heading(e: DirectedEdge) -> float:
    p = e.geometry.points
    d = p[-1] - p[-2]
    return math.atan2(d[1], d[0])


def _edge_entry_heading(e: DirectedEdge) -> float:
    p = e.geometry.points
    d = p[1] - p[0]
    return math.atan2(d[1], d[0])


def _build_path(g: LaneGraph, start_edge: int, variant: int,
                needed_len: float) -> tuple[np.ndarray, list[int]]:
    """Concatenated polyline following out-edges from start_edge.

    At each fork the `variant`-th straightest option (modulo option count) is
    taken; returns the path and the sequence of branch choices made."""
    pts = [g.edges[start_edge].geometry.points]
    total = g.edges[start_edge].geometry.length()
    cur = g.edges[start_edge]
    choices = []
    guard = 0
    while total < needed_len and guard < 64:
        guard += 1
        options = g.out_edges(cur.v)
        options = [e for e in options if e is not cur]
        if not options:
            break
        if len(options) > 1:
            h = _edge_exit_heading(cur)
            options.sort(key=lambda e: (abs(wrap_angle(_edge_entry_heading(e) - h)),
                                        e.geometry.points[-1, 0],
                                        e.geometry.points[-1, 1]))
            pick = variant % len(options)
            choices.append(pick)
            nxt = options[pick]
        else:
            nxt = options[0]
        pts.append(nxt.geometry.points[1:])
        total += nxt.geometry.length()
        cur = nxt
    path = np.vstack(pts)
    # extend straight past the path end so agents never run out of target
    d = path[-1] - path[-2]
    n = np.hypot(*d)
    if n > 1e-9 and total < needed_len + 20.0:
        ext = path[-1] + d / n * (needed_len + 20.0 - total)
        path = np.vstack([path, ext])
    return path, choices


def _pure_pursuit(state: AgentState, path: np.ndarray, n_steps: int,
                  dt: float) -> list:
    """Constant-speed pure-pursuit rollout along a path polyline."""
    seg = np.diff(path, axis=0)
    d = np.hypot(seg[:, 0], seg[:, 1])
    arclen = np.concatenate([[0.0], np.cumsum(d)])
    v = state.speed
    lookahead = float(np.clip(0.5 * v, 2.0, 6.0))
    s0, _ = _project_to_polyline(path, arclen, np.array([state.x, state.y]))
    x, y, th = state.x, state.y, state.heading
    out = [state]
    s = s0
    for _ in range(n_steps):
        s_t = min(s + lookahead, arclen[-1])
        tx = float(np.interp(s_t, arclen, path[:, 0]))
        ty = float(np.interp(s_t, arclen, path[:, 1]))
        alpha = wrap_angle(math.atan2(ty - y, tx - x) - th)
        ld = max(math.hypot(tx - x, ty - y), 1e-6)
        omega = 2.0 * v * math.sin(alpha) / ld
        th = wrap_angle(th + omega * dt)
        x += v * math.cos(th) * dt
        y += v * math.sin(th) * dt
        s += v * dt
        out.append(AgentState(x, y, th, v))
    return out


def _constant_velocity(state: AgentState, n_steps: int, dt: float) -> list:
    out = [state]
    x, y = state.x, state.y
    vx = state.speed * math.cos(state.heading)
    vy = state.speed * math.sin(state.heading)
    for _ in range(n_steps):
        x += vx * dt
        y += vy * dt
        out.append(AgentState(x, y, state.heading, state.speed))
    return out


# ---------------------------------------------------------------------------
# joint futures

def rollout(scene: Scenario, g: LaneGraph, k: int = DEFAULT_K,
            horizon: float = DEFAULT_HORIZON_S, dt: float = DEFAULT_DT) -> list:
    """K candidate joint futures for every agent in the scene.

    Future k routes each branching agent down its k-th straightest fork option
    (modulo the option count); duplicate futures collapse and probabilities
    are uniform over the emitted set.
    """
    if horizon < dt:
        raise HorizonTooShort(f"horizon {horizon} shorter than dt {dt}")
    if k < 1:
        raise ValueError("k must be >= 1")
    n_steps = int(round(horizon / dt))
    if not scene.agents:
        return [JointFuture([], 1.0 / k) for _ in range(k)]

    assignments = [assign_lane(a.initial_state, g) for a in scene.agents]
    needed = max(a.initial_state.speed for a in scene.agents) * horizon + 10.0

    futures = []
    seen = set()
    for variant in range(k):
        trajs = []
        signature = []
        for a, ei in zip(scene.agents, assignments):
            if ei is None:
                trajs.append(_constant_velocity(a.initial_state, n_steps, dt))
                signature.append(("cv",))
            else:
                path, choices = _build_path(g, ei, variant, needed)
                trajs.append(_pure_pursuit(a.initial_state, path, n_steps, dt))
                signature.append((ei, tuple(choices)))
        sig = tuple(signature)
        if sig in seen:
            continue
        seen.add(sig)
        futures.append(JointFuture(trajs, 0.0))
    p = 1.0 / len(futures)
    return [replace(f, probability=p) for f in futures]


def future_to_scenario(scene: Scenario, future: JointFuture) -> Scenario:
    """Scenario copy with agent trajectories filled from one joint future."""
    agents = []
    for a, traj in zip(scene.agents, future.trajectories):
        agents.append(replace(a, trajectory=tuple(traj)))
    return Scenario(scene.lanes, agents, scene.range_m, scene.v_max)
