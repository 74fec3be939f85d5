"""Skeletonize the lane raster and extract a pixel-level undirected graph.

Pipeline: lane mask -> morphological thinning (Zhang-Suen) -> vertex pixels
(neighbor count != 2), junction clusters merged, maximal vertex-free pixel
chains traced as edges. Short spurs left by thinning are pruned before the
final graph is built.

Pixel coordinates throughout are (col, row) = (x, y), matching the raster
codec's world axes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from skimage.morphology import skeletonize as _sk_skeletonize

from .raster import FeatureMap, LANE_PRESENCE_THRESHOLD

SPUR_MIN_PX = 5

_NB8 = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]


@dataclass
class SkeletonMask:
    mask: np.ndarray  # (H, W) bool

    @property
    def width(self) -> int:
        return self.mask.shape[1]

    @property
    def height(self) -> int:
        return self.mask.shape[0]


@dataclass
class PixelVertex:
    position: np.ndarray          # (x, y) pixel coords, float (cluster centroid)
    pixels: list                  # [(row, col), ...]
    is_junction: bool
    label: str | None = None      # "entry" / "exit" / None; may hold both as "entry|exit"
    labels: set = field(default_factory=set)


@dataclass
class PixelEdge:
    u: int                        # vertex index
    v: int
    chain: np.ndarray             # (N, 2) interior pixel coords (x, y); may be empty

    def pixel_length(self) -> int:
        return self.chain.shape[0]


@dataclass
class PixelGraph:
    vertices: list
    edges: list

    def degree(self, i: int) -> int:
        return sum(1 for e in self.edges if e.u == i or e.v == i)


def skeletonize(fm: FeatureMap, threshold: float = LANE_PRESENCE_THRESHOLD) -> SkeletonMask:
    """Thin the lane-presence mask to one-pixel width (Zhang-Suen fixpoint)."""
    mask = fm.lane_mask(threshold)
    if not mask.any():
        return SkeletonMask(np.zeros_like(mask))
    return SkeletonMask(_sk_skeletonize(mask, method="zhang"))


def skeletonize_mask(mask: np.ndarray) -> SkeletonMask:
    if not mask.any():
        return SkeletonMask(np.zeros_like(mask, dtype=bool))
    return SkeletonMask(_sk_skeletonize(mask.astype(bool), method="zhang"))


def _neighbor_count(mask: np.ndarray) -> np.ndarray:
    m = mask.astype(np.uint8)
    p = np.pad(m, 1)
    out = np.zeros_like(m, dtype=np.int32)
    for dr, dc in _NB8:
        out += p[1 + dr:1 + dr + m.shape[0], 1 + dc:1 + dc + m.shape[1]]
    return out


def _trace_chain(mask, vertex_map, start, prev, start_cluster):
    """Walk a degree-2 pixel chain from `start` until hitting a vertex pixel.

    Returns (chain_pixels, end_vertex_pixel) with pixels as (row, col); end is
    None for dangling chains. The start cluster only terminates the walk after
    the first step, so chains brushing their own junction blob keep going.
    """
    h, w = mask.shape
    chain = []
    cur = start
    while True:
        chain.append(cur)
        nxt = None
        own = None
        for dr, dc in _NB8:
            r, c = cur[0] + dr, cur[1] + dc
            if (r, c) == prev or not (0 <= r < h and 0 <= c < w):
                continue
            vm = vertex_map[r, c]
            if vm >= 0:
                if vm != start_cluster or len(chain) > 1:
                    return chain, (r, c)
                own = (r, c)
            elif mask[r, c] and nxt is None:
                nxt = (r, c)
        if nxt is None:
            return chain, own
        prev, cur = cur, nxt


def _build_graph(mask: np.ndarray) -> PixelGraph:
    h, w = mask.shape
    nb = _neighbor_count(mask)
    vertex_px = mask & (nb != 2)
    # isolated pixels are dropped outright
    iso = mask & (nb == 0)
    mask = mask & ~iso
    vertex_px = vertex_px & ~iso

    # cluster vertex pixels (8-connected); junction blobs collapse to one vertex
    from scipy.ndimage import label as cc_label
    lab, ncl = cc_label(vertex_px, structure=np.ones((3, 3), dtype=int))
    vertex_map = lab.astype(np.int64) - 1  # -1 = not a vertex pixel
    vertices: list[PixelVertex] = []
    for i in range(ncl):
        rows, cols = np.nonzero(lab == i + 1)
        pos = np.array([cols.mean(), rows.mean()])
        is_j = bool(np.any(nb[rows, cols] >= 3))
        vertices.append(PixelVertex(pos, list(zip(rows.tolist(), cols.tolist())), is_j))

    edges: list[PixelEdge] = []
    visited = np.zeros_like(mask, dtype=bool)
    chain_px = mask & (vertex_map < 0)

    for vi, vtx in enumerate(vertices):
        for (r, c) in vtx.pixels:
            for dr, dc in _NB8:
                rr, cc = r + dr, c + dc
                if not (0 <= rr < h and 0 <= cc < w):
                    continue
                if chain_px[rr, cc] and not visited[rr, cc]:
                    chain, end = _trace_chain(chain_px & ~visited, vertex_map,
                                              (rr, cc), (r, c), vi)
                    for (pr, pc) in chain:
                        visited[pr, pc] = True
                    if end is None:
                        # dangling chain: synthesize a terminal vertex at its tip
                        tip = chain[-1]
                        vertices.append(PixelVertex(
                            np.array([tip[1], tip[0]], dtype=float), [tip], False))
                        end_idx = len(vertices) - 1
                    else:
                        end_idx = int(vertex_map[end])
                    arr = np.array([[pc, pr] for (pr, pc) in chain], dtype=float)
                    edges.append(PixelEdge(vi, end_idx, arr))
                elif vertex_map[rr, cc] >= 0 and vertex_map[rr, cc] != vi:
                    # directly adjacent clusters: zero-interior edge, add once
                    vj = int(vertex_map[rr, cc])
                    if vj > vi and not any(
                            e.chain.shape[0] == 0 and {e.u, e.v} == {vi, vj}
                            for e in edges):
                        edges.append(PixelEdge(vi, vj, np.empty((0, 2))))
    return PixelGraph(vertices, edges)


def extract_edges_vertices(sk: SkeletonMask, spur_min_px: int = SPUR_MIN_PX) -> PixelGraph:
    """Vertices (terminals + merged junction clusters) and pixel-chain edges.

    Spur edges shorter than `spur_min_px` that hang off a junction are removed
    from the mask and the graph is rebuilt, so thinning artifacts at stroke
    ends do not create false terminals.
    """
    mask = sk.mask.copy()
    if not mask.any():
        return PixelGraph([], [])
    g = _build_graph(mask)
    if spur_min_px > 0:
        deg = [g.degree(i) for i in range(len(g.vertices))]
        dirty = False
        for e in g.edges:
            for (t, b) in ((e.u, e.v), (e.v, e.u)):
                tv, bv = g.vertices[t], g.vertices[b]
                if (deg[t] == 1 and not tv.is_junction and bv.is_junction
                        and e.pixel_length() < spur_min_px):
                    for (r, c) in tv.pixels:
                        mask[r, c] = False
                    for (x, y) in e.chain:
                        mask[int(y), int(x)] = False
                    dirty = True
                    break
        if dirty:
            mask = _sk_skeletonize(mask, method="zhang")
            g = _build_graph(mask)
    return g


def debug_image(sk: SkeletonMask, pg: PixelGraph) -> np.ndarray:
    """RGB overlay: skeleton white, terminals green, junctions red."""
    img = np.zeros((sk.height, sk.width, 3), dtype=np.uint8)
    img[sk.mask] = (255, 255, 255)
    for v in pg.vertices:
        color = (255, 0, 0) if v.is_junction else (0, 255, 0)
        for (r, c) in v.pixels:
            img[r, c] = color
    return img
