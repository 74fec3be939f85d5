"""Vector-side scenario model: centerline maps plus agents with initial states.

Coordinates are meters in a scenario-local frame. A normalized scenario is
centered on the bounding box of its lane waypoints and fits inside the
closed square [-R/2, R/2] x [-R/2, R/2].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .errors import DegeneratePolyline, EmptyScenario

DEFAULT_DT = 0.1  # trajectory timestep, 10 Hz


def wrap_angle(a: float) -> float:
    """Wrap an angle to [-pi, pi)."""
    return float((a + math.pi) % (2.0 * math.pi) - math.pi)


@dataclass(frozen=True)
class Waypoint:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite waypoint ({self.x}, {self.y})")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)


class Centerline:
    """Ordered lane centerline; index order is the driving direction."""

    __slots__ = ("points",)

    def __init__(self, points):
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
            raise ValueError(f"centerline needs >= 2 xy points, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("centerline contains non-finite coordinates")
        seg = np.diff(pts, axis=0)
        if np.any(np.hypot(seg[:, 0], seg[:, 1]) == 0.0):
            raise DegeneratePolyline("consecutive identical waypoints")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __setattr__(self, name, value):
        raise AttributeError("Centerline is immutable")

    def __len__(self) -> int:
        return self.points.shape[0]

    def __eq__(self, other) -> bool:
        return isinstance(other, Centerline) and np.array_equal(self.points, other.points)

    def length(self) -> float:
        seg = np.diff(self.points, axis=0)
        return float(np.hypot(seg[:, 0], seg[:, 1]).sum())

    def translated(self, dx: float, dy: float) -> "Centerline":
        return Centerline(self.points + np.array([dx, dy]))

    def resampled(self, spacing: float) -> "Centerline":
        """Resample at a fixed arc-length interval, keeping both endpoints."""
        pts = self.points
        seg = np.diff(pts, axis=0)
        seglen = np.hypot(seg[:, 0], seg[:, 1])
        s = np.concatenate([[0.0], np.cumsum(seglen)])
        total = s[-1]
        n = max(1, int(math.ceil(total / spacing)))
        st = np.linspace(0.0, total, n + 1)
        x = np.interp(st, s, pts[:, 0])
        y = np.interp(st, s, pts[:, 1])
        return Centerline(np.column_stack([x, y]))


@dataclass(frozen=True)
class AgentState:
    x: float
    y: float
    heading: float  # radians in [-pi, pi)
    speed: float    # m/s, >= 0

    def __post_init__(self):
        if self.speed < 0:
            raise ValueError(f"negative speed {self.speed}")
        object.__setattr__(self, "heading", wrap_angle(self.heading))


@dataclass(frozen=True)
class Agent:
    length: float
    width: float
    initial_state: AgentState
    trajectory: Optional[tuple] = None  # tuple of AgentState at fixed dt
    dt: float = DEFAULT_DT

    def __post_init__(self):
        if self.length <= 0 or self.width <= 0:
            raise ValueError("agent box dimensions must be positive")
        if self.length < self.width:
            raise ValueError("agent length must be >= width")
        if self.trajectory is not None:
            traj = tuple(self.trajectory)
            if not traj or traj[0] != self.initial_state:
                raise ValueError("trajectory[0] must equal initial_state")
            object.__setattr__(self, "trajectory", traj)


@dataclass(frozen=True)
class Scenario:
    lanes: tuple
    agents: tuple
    range_m: float
    v_max: float

    def __init__(self, lanes: Sequence[Centerline], agents: Sequence[Agent],
                 range_m: float, v_max: float):
        if range_m <= 0 or v_max <= 0:
            raise ValueError("range and v_max must be positive")
        for i, a in enumerate(agents):
            if a.initial_state.speed > v_max:
                raise ValueError(f"agent {i} speed exceeds v_max")
        object.__setattr__(self, "lanes", tuple(lanes))
        object.__setattr__(self, "agents", tuple(agents))
        object.__setattr__(self, "range_m", float(range_m))
        object.__setattr__(self, "v_max", float(v_max))


def polyline_directions(c: Centerline) -> np.ndarray:
    """Per-waypoint unit direction vectors.

    Waypoint i takes the direction of the segment to waypoint i+1; the final
    waypoint reuses the previous segment's direction.
    """
    seg = np.diff(c.points, axis=0)
    norms = np.hypot(seg[:, 0], seg[:, 1])
    if np.any(norms == 0.0):
        raise DegeneratePolyline("zero-length segment")
    units = seg / norms[:, None]
    return np.vstack([units, units[-1:]])


def _clip_polyline_to_square(pts: np.ndarray, half: float) -> list[np.ndarray]:
    """Clip a polyline to the closed square [-half, half]^2.

    Returns the list of surviving sub-polylines, with boundary intersection
    points inserted where segments cross the square edge (Liang-Barsky per
    segment).
    """
    pieces: list[list[np.ndarray]] = []
    cur: list[np.ndarray] = []

    def flush():
        nonlocal cur
        if len(cur) >= 2:
            pieces.append(cur)
        cur = []

    for a, b in zip(pts[:-1], pts[1:]):
        d = b - a
        t0, t1 = 0.0, 1.0
        ok = True
        for dim in (0, 1):
            for sign in (-1.0, 1.0):
                # inside: sign * p[dim] <= half
                p = sign * d[dim]
                q = half - sign * a[dim]
                if p == 0.0:
                    if q < 0.0:
                        ok = False
                        break
                else:
                    r = q / p
                    if p < 0.0:
                        t0 = max(t0, r)
                    else:
                        t1 = min(t1, r)
            if not ok:
                break
        if not ok or t0 > t1:
            flush()
            continue
        pa = a + t0 * d
        pb = a + t1 * d
        pa = np.clip(pa, -half, half)
        pb = np.clip(pb, -half, half)
        if cur and np.allclose(cur[-1], pa, atol=1e-12):
            pass
        elif cur:
            flush()
            cur = [pa]
        else:
            cur = [pa]
        if not np.allclose(pa, pb, atol=1e-12):
            cur.append(pb)
        if t1 < 1.0:
            flush()
    flush()
    return [np.array(p) for p in pieces]


def _lane_bbox_center(lanes: Sequence[Centerline]) -> np.ndarray:
    allpts = np.vstack([c.points for c in lanes])
    lo = allpts.min(axis=0)
    hi = allpts.max(axis=0)
    return (lo + hi) / 2.0


def normalize_scenario(s: Scenario) -> Scenario:
    """Center the scenario on its lane bounding box and clip to the R-square.

    Lanes are split at square-boundary crossings; agents outside the square
    are dropped. Iterates translate+clip to a fixpoint so the result is
    idempotent even when clipping shifts the bounding box.
    """
    if not s.lanes:
        raise EmptyScenario("scenario has no lanes")
    half = s.range_m / 2.0
    lanes = list(s.lanes)
    agents = list(s.agents)
    for _ in range(8):
        center = _lane_bbox_center(lanes)
        shifted = []
        for c in lanes:
            for piece in _clip_polyline_to_square(c.points - center, half):
                if piece.shape[0] >= 2:
                    seg = np.diff(piece, axis=0)
                    keep = np.concatenate([[True], np.hypot(seg[:, 0], seg[:, 1]) > 1e-12])
                    piece = piece[keep]
                    if piece.shape[0] >= 2:
                        shifted.append(Centerline(piece))
        if not shifted:
            raise EmptyScenario("all lanes clipped away")
        lanes = shifted
        moved = []
        for a in agents:
            st = a.initial_state
            nx, ny = st.x - center[0], st.y - center[1]
            if abs(nx) <= half and abs(ny) <= half:
                nst = replace(st, x=nx, y=ny)
                traj = None
                if a.trajectory is not None:
                    traj = tuple(replace(t, x=t.x - center[0], y=t.y - center[1])
                                 for t in a.trajectory)
                moved.append(replace(a, initial_state=nst, trajectory=traj))
        agents = moved
        if float(np.abs(center).max()) < 1e-9 :
            break
    return Scenario(lanes, agents, s.range_m, s.v_max)
