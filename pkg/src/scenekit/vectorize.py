"""Directed lane-graph recovery from a feature map.

Stages: skeletonize -> pixel graph -> entry/exit labeling of terminals and
their branching neighbors -> directed approach edges -> cubic bezier fitting
across the residual intersection regions, gated by rasterized IoU and max
curvature -> world-coordinate centerlines.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import cv2
import numpy as np

from .errors import EmptyMap, MissingDirection
from .raster import FeatureMap, LANE_PRESENCE_THRESHOLD
from .scenario import Centerline, Scenario
from .skeleton import PixelGraph, PixelVertex, extract_edges_vertices, skeletonize

log = logging.getLogger(__name__)


@dataclass
class VectorizeConfig:
    stroke: int = 3
    presence_threshold: float = LANE_PRESENCE_THRESHOLD
    spur_min_px: int = 5
    k_thresh: float = 0.2      # 1/m, max accepted curvature (5 m turning radius)
    iou_thresh: float = 0.5
    resample_m: float = 0.5
    v_max: float = 30.0


@dataclass
class LaneVertex:
    position: np.ndarray            # world (x, y)
    direction: np.ndarray | None    # decoded unit direction, if any
    label: str | None               # "entry" / "exit" / None
    source_idx: int = -1            # index of the originating pixel vertex


@dataclass
class DirectedEdge:
    u: int
    v: int
    geometry: Centerline


@dataclass
class LaneGraph:
    vertices: list = field(default_factory=list)
    edges: list = field(default_factory=list)

    def add_vertex(self, v: LaneVertex) -> int:
        self.vertices.append(v)
        return len(self.vertices) - 1

    def out_edges(self, i: int):
        return [e for e in self.edges if e.u == i]


@dataclass
class BezierFit:
    control_points: np.ndarray  # (4, 2)
    iou: float
    max_curvature: float


# ---------------------------------------------------------------------------
# bezier helpers

def fit_cubic_bezier(path: np.ndarray) -> np.ndarray:
    """Least-squares cubic bezier through `path` with pinned endpoints.

    Chord-length parameterization; solves only for the two inner control
    points. Degenerate/short paths fall back to an evenly spaced straight
    control polygon.
    """
    p0, p3 = path[0], path[-1]
    if path.shape[0] < 4:
        return np.array([p0, p0 + (p3 - p0) / 3, p0 + 2 * (p3 - p0) / 3, p3])
    seg = np.diff(path, axis=0)
    d = np.hypot(seg[:, 0], seg[:, 1])
    s = np.concatenate([[0.0], np.cumsum(d)])
    if s[-1] <= 0:
        return np.array([p0, p0, p3, p3])
    t = s / s[-1]
    b0 = (1 - t) ** 3
    b1 = 3 * (1 - t) ** 2 * t
    b2 = 3 * (1 - t) * t ** 2
    b3 = t ** 3
    A = np.column_stack([b1, b2])
    rhs = path - np.outer(b0, p0) - np.outer(b3, p3)
    sol, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    return np.array([p0, sol[0], sol[1], p3])


def bezier_points(ctrl: np.ndarray, n: int = 100) -> np.ndarray:
    t = np.linspace(0.0, 1.0, n)[:, None]
    p0, p1, p2, p3 = ctrl
    return ((1 - t) ** 3 * p0 + 3 * (1 - t) ** 2 * t * p1
            + 3 * (1 - t) * t ** 2 * p2 + t ** 3 * p3)


def bezier_max_curvature(ctrl: np.ndarray, n: int = 200) -> float:
    t = np.linspace(0.0, 1.0, n)[:, None]
    p0, p1, p2, p3 = ctrl
    d1 = (3 * (1 - t) ** 2 * (p1 - p0) + 6 * (1 - t) * t * (p2 - p1)
          + 3 * t ** 2 * (p3 - p2))
    d2 = 6 * (1 - t) * (p2 - 2 * p1 + p0) + 6 * t * (p3 - 2 * p2 + p1)
    speed = np.hypot(d1[:, 0], d1[:, 1])
    cross = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    ok = speed > 1e-9
    if not ok.any():
        return math.inf
    return float(np.max(np.abs(cross[ok]) / speed[ok] ** 3))


def _raster_iou(poly_a: np.ndarray, poly_b: np.ndarray, fm: FeatureMap,
                stroke: int) -> float:
    """IoU of two world polylines stroked at the feature-map resolution."""
    tf = fm.transform()
    shift, mul = 4, 16
    masks = []
    for poly in (poly_a, poly_b):
        m = np.zeros((fm.height, fm.width), dtype=np.uint8)
        px = np.round(tf.apply(poly) * mul).astype(np.int64)
        cv2.polylines(m, [px], False, 1, thickness=stroke,
                      lineType=cv2.LINE_8, shift=shift)
        masks.append(m.astype(bool))
    union = np.logical_or(*masks).sum()
    if union == 0:
        return 0.0
    return float(np.logical_and(*masks).sum() / union)


# ---------------------------------------------------------------------------
# stage 1: terminal labeling

def _decode_at(fm: FeatureMap, col: int, row: int, threshold: float):
    """Decoded direction at a pixel, falling back to a 3x3 average."""
    vec = 2.0 * fm.channels[row, col, :2] - 1.0
    if np.hypot(vec[0], vec[1]) >= threshold:
        return vec / np.hypot(vec[0], vec[1])
    r0, r1 = max(0, row - 1), min(fm.height, row + 2)
    c0, c1 = max(0, col - 1), min(fm.width, col + 2)
    win = 2.0 * fm.channels[r0:r1, c0:c1, :2] - 1.0
    norms = np.hypot(win[:, :, 0], win[:, :, 1])
    sel = norms >= threshold
    if not sel.any():
        return None
    avg = win[sel].mean(axis=0)
    n = np.hypot(avg[0], avg[1])
    if n < 1e-9:
        return None
    return avg / n


def _edge_geometry(pg: PixelGraph, e, start_idx: int) -> np.ndarray:
    """Pixel polyline of an edge oriented to begin at vertex `start_idx`."""
    u, v = pg.vertices[e.u], pg.vertices[e.v]
    chain = e.chain
    if start_idx == e.u:
        pts = [u.position] + list(chain) + [v.position]
    else:
        pts = [v.position] + list(chain[::-1]) + [u.position]
    return np.array(pts)


def label_terminals(pg: PixelGraph, fm: FeatureMap,
                    threshold: float = LANE_PRESENCE_THRESHOLD) -> PixelGraph:
    """Assign entry/exit labels to terminal vertices and their branch neighbors.

    A terminal is an entry when the decoded flow direction at its pixel points
    along the edge toward the branching vertex (traffic flows inward).
    """
    deg = [pg.degree(i) for i in range(len(pg.vertices))]
    for e in pg.edges:
        for t_idx, b_idx in ((e.u, e.v), (e.v, e.u)):
            if deg[t_idx] != 1 or pg.vertices[t_idx].is_junction:
                continue
            tv = pg.vertices[t_idx]
            col, row = int(round(tv.position[0])), int(round(tv.position[1]))
            d = _decode_at(fm, col, row, threshold)
            if d is None:
                raise MissingDirection(
                    f"no decodable direction at terminal pixel ({col}, {row})")
            geom = _edge_geometry(pg, e, t_idx)
            k = min(4, geom.shape[0] - 1)
            tangent = geom[k] - geom[0]
            n = np.hypot(tangent[0], tangent[1])
            if n < 1e-9:
                continue
            tangent = tangent / n
            label = "entry" if float(np.dot(d, tangent)) > 0 else "exit"
            tv.label = label
            tv.labels.add(label)
            bv = pg.vertices[b_idx]
            if deg[b_idx] != 1:
                bv.labels.add(label)
                if bv.label is None:
                    bv.label = label
    return pg


# ---------------------------------------------------------------------------
# stage 2: approach-edge extraction

def extract_approach_edges(pg: PixelGraph, fm: FeatureMap,
                           terminal_ext_px: float = 1.5):
    """Pull terminal-to-branch edges into a directed graph.

    Returns (lane_graph, residual). Directed edges follow the driving
    direction implied by the entry/exit labels; consumed edges and terminal
    vertices leave the residual, which then holds only intersection regions.
    Terminal ends are extended by `terminal_ext_px` along the local tangent
    to undo the end erosion of morphological thinning.
    """
    tf = fm.transform()
    deg = [pg.degree(i) for i in range(len(pg.vertices))]
    g = LaneGraph()
    vmap: dict[int, int] = {}

    def lane_vertex(pix_idx: int, position=None) -> int:
        if pix_idx not in vmap:
            pv = pg.vertices[pix_idx]
            pos = tf.invert(pv.position) if position is None else position
            vmap[pix_idx] = g.add_vertex(
                LaneVertex(pos, None, pv.label, source_idx=pix_idx))
        return vmap[pix_idx]

    consumed = set()
    removed_vertices = set()
    for ei, e in enumerate(pg.edges):
        ends = [(e.u, e.v), (e.v, e.u)]
        for t_idx, b_idx in ends:
            if ei in consumed:
                break
            if deg[t_idx] != 1 or pg.vertices[t_idx].label is None:
                continue
            label = pg.vertices[t_idx].label
            geom_px = _edge_geometry(pg, e, t_idx)
            if terminal_ext_px > 0 and geom_px.shape[0] >= 2:
                k = min(4, geom_px.shape[0] - 1)
                tang = geom_px[0] - geom_px[k]
                n = np.hypot(tang[0], tang[1])
                if n > 1e-9:
                    tip = geom_px[0] + tang / n * terminal_ext_px
                    h, w = fm.height, fm.width
                    tip = np.clip(tip, 0.0, [w - 1.0, h - 1.0])
                    geom_px = np.vstack([tip[None, :], geom_px])
            if label == "entry":
                src, dst, pts = t_idx, b_idx, geom_px
            else:
                src, dst, pts = b_idx, t_idx, geom_px[::-1]
            world = tf.invert(pts)
            world = _dedupe(world)
            if world.shape[0] < 2:
                continue
            u = lane_vertex(src, world[0] if src == t_idx else None)
            v = lane_vertex(dst, world[-1] if dst == t_idx else None)
            g.edges.append(DirectedEdge(u, v, Centerline(world)))
            consumed.add(ei)
            removed_vertices.add(t_idx)
            if deg[b_idx] == 1:
                removed_vertices.add(b_idx)

    residual_edges = [e for ei, e in enumerate(pg.edges)
                      if ei not in consumed
                      and e.u not in removed_vertices
                      and e.v not in removed_vertices]
    residual = PixelGraph(pg.vertices, residual_edges)
    # stash the vertex map so curve fitting reuses lane vertices
    residual_map = vmap
    g._residual_map = residual_map  # type: ignore[attr-defined]
    return g, residual


def _dedupe(pts: np.ndarray) -> np.ndarray:
    if pts.shape[0] < 2:
        return pts
    seg = np.diff(pts, axis=0)
    keep = np.concatenate([[True], np.hypot(seg[:, 0], seg[:, 1]) > 1e-9])
    return pts[keep]


# ---------------------------------------------------------------------------
# stage 3: intersection curve fitting

def _dijkstra_path(residual: PixelGraph, src: int, dst: int):
    """Shortest residual path by pixel arc length; list of (edge, forward)."""
    import heapq
    adj: dict[int, list] = {}
    for ei, e in enumerate(residual.edges):
        geom = _edge_geometry(residual, e, e.u)
        seg = np.diff(geom, axis=0)
        w = float(np.hypot(seg[:, 0], seg[:, 1]).sum())
        adj.setdefault(e.u, []).append((e.v, w, ei, True))
        adj.setdefault(e.v, []).append((e.u, w, ei, False))
    dist = {src: 0.0}
    prev: dict[int, tuple] = {}
    heap = [(0.0, src)]
    while heap:
        d, u = heapq.heappop(heap)
        if u == dst:
            break
        if d > dist.get(u, math.inf):
            continue
        for v, w, ei, fwd in adj.get(u, []):
            nd = d + w
            if nd < dist.get(v, math.inf):
                dist[v] = nd
                prev[v] = (u, ei, fwd)
                heapq.heappush(heap, (nd, v))
    if dst not in dist:
        return None
    path = []
    cur = dst
    while cur != src:
        u, ei, fwd = prev[cur]
        path.append((ei, fwd))
        cur = u
    return path[::-1]


def fit_intersection_curves(residual: PixelGraph, g: LaneGraph, fm: FeatureMap,
                            cfg: VectorizeConfig | None = None) -> LaneGraph:
    """Connect entry/exit ports across intersection regions with cubic beziers.

    Every (entry, exit) vertex pair joined by a residual path gets a
    least-squares cubic fit to that path; the curve is accepted when its
    stroked IoU against the path is >= cfg.iou_thresh and its max curvature
    stays below cfg.k_thresh.
    """
    cfg = cfg or VectorizeConfig()
    tf = fm.transform()
    vmap = getattr(g, "_residual_map", {})
    deg = {}
    for e in residual.edges:
        deg[e.u] = deg.get(e.u, 0) + 1
        deg[e.v] = deg.get(e.v, 0) + 1
    entries = [i for i, v in enumerate(residual.vertices)
               if "entry" in v.labels and deg.get(i, 0) > 0]
    exits = [i for i, v in enumerate(residual.vertices)
             if "exit" in v.labels and deg.get(i, 0) > 0]
    for vi in entries:
        for vj in exits:
            if vi == vj:
                continue
            path = _dijkstra_path(residual, vi, vj)
            if path is None:
                continue
            pts = [residual.vertices[vi].position[None, :]]
            for ei, fwd in path:
                e = residual.edges[ei]
                geom = _edge_geometry(residual, e, e.u if fwd else e.v)
                pts.append(geom[1:])
            path_px = np.vstack(pts)
            path_world = _dedupe(tf.invert(path_px))
            if path_world.shape[0] < 2:
                continue
            ctrl = fit_cubic_bezier(path_world)
            maxk = bezier_max_curvature(ctrl)
            curve = bezier_points(ctrl, n=max(20, path_world.shape[0]))
            iou = _raster_iou(path_world, curve, fm, cfg.stroke)
            fit = BezierFit(ctrl, iou, maxk)
            if fit.iou >= cfg.iou_thresh and fit.max_curvature <= cfg.k_thresh:
                u = vmap.get(vi)
                if u is None:
                    pv = residual.vertices[vi]
                    u = g.add_vertex(LaneVertex(tf.invert(pv.position), None,
                                                pv.label, source_idx=vi))
                    vmap[vi] = u
                w = vmap.get(vj)
                if w is None:
                    pv = residual.vertices[vj]
                    w = g.add_vertex(LaneVertex(tf.invert(pv.position), None,
                                                pv.label, source_idx=vj))
                    vmap[vj] = w
                geom = _dedupe(curve)
                if geom.shape[0] >= 2:
                    g.edges.append(DirectedEdge(u, w, Centerline(geom)))
            else:
                log.debug("rejected curve %d->%d (iou=%.2f, k=%.3f)",
                          vi, vj, fit.iou, fit.max_curvature)
    return g


# ---------------------------------------------------------------------------
# full pipeline

def vectorize_graph(fm: FeatureMap, cfg: VectorizeConfig | None = None) -> LaneGraph:
    """Run the full vectorization pipeline, returning the directed lane graph."""
    cfg = cfg or VectorizeConfig()
    sk = skeletonize(fm, cfg.presence_threshold)
    if not sk.mask.any():
        raise EmptyMap("no lane pixels in feature map")
    pg = extract_edges_vertices(sk, cfg.spur_min_px)
    pg = label_terminals(pg, fm, cfg.presence_threshold)
    g, residual = extract_approach_edges(pg, fm)
    g = fit_intersection_curves(residual, g, fm, cfg)
    return g


def vectorize(fm: FeatureMap, cfg: VectorizeConfig | None = None) -> Scenario:
    """Recover the map part of a scenario from a feature map.

    Directed lane-graph edges become world-coordinate centerlines resampled at
    cfg.resample_m spacing.
    """
    cfg = cfg or VectorizeConfig()
    g = vectorize_graph(fm, cfg)
    lanes = []
    for e in g.edges:
        try:
            lanes.append(e.geometry.resampled(cfg.resample_m))
        except Exception:
            continue
    if not lanes:
        raise EmptyMap("vectorization produced no lanes")
    return Scenario(lanes, [], fm.range_m, cfg.v_max)
