"""GEO and TOPO precision/recall between interpolated lane graphs.

Both graphs are densified to fixed-interval vertices along every lane. GEO
scores count one-to-one matched vertices within a distance threshold. TOPO
scores average per-pair GEO scores over path-distance-limited subgraphs
around each matched pair, which penalizes missing or spurious connectivity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra
from scipy.spatial import cKDTree

from .errors import EmptyGraph
from .scenario import Scenario

INTERP_SPACING_M = 0.5
MATCH_THRESHOLD_M = 1.5
SUBGRAPH_RADIUS_M = 50.0
CONNECT_TOL_M = 0.2  # lane endpoints closer than this are treated as joined


@dataclass
class InterpolatedGraph:
    points: np.ndarray        # (N, 2) densified vertices
    adjacency: "coo_matrix"   # sparse symmetric edge-length matrix
    spacing: float

    def __len__(self) -> int:
        return self.points.shape[0]

    def path_distances(self) -> np.ndarray:
        """All-pairs shortest path lengths along the graph (dense, meters)."""
        return dijkstra(self.adjacency.tocsr(), directed=False)


def interpolate_graph(s: Scenario, spacing: float = INTERP_SPACING_M,
                      connect_tol: float = CONNECT_TOL_M) -> InterpolatedGraph:
    """Densify scenario lanes at a fixed interval and link them into a graph.

    Consecutive samples along one lane are exactly `spacing` apart (except at
    the lane end); samples from different lanes are joined when within
    `connect_tol`, which stitches shared junction endpoints back together.
    """
    pts_list = []
    rows, cols, w = [], [], []
    offset = 0
    for lane in s.lanes:
        p = lane.points
        seg = np.diff(p, axis=0)
        d = np.hypot(seg[:, 0], seg[:, 1])
        arclen = np.concatenate([[0.0], np.cumsum(d)])
        total = arclen[-1]
        n_full = int(np.floor(total / spacing + 1e-9))
        st = [spacing * i for i in range(n_full + 1)]
        if total - st[-1] > 1e-9:
            st.append(total)
        st = np.asarray(st)
        x = np.interp(st, arclen, p[:, 0])
        y = np.interp(st, arclen, p[:, 1])
        n = st.shape[0]
        for i in range(n - 1):
            rows.append(offset + i)
            cols.append(offset + i + 1)
            w.append(float(st[i + 1] - st[i]))
        pts_list.append(np.column_stack([x, y]))
        offset += n
    if not pts_list:
        raise EmptyGraph("scenario has no lanes to interpolate")
    points = np.vstack(pts_list)
    if connect_tol > 0 and points.shape[0] > 1:
        tree = cKDTree(points)
        for i, j in tree.query_pairs(connect_tol):
            rows.append(i)
            cols.append(j)
            w.append(float(np.hypot(*(points[i] - points[j]))))
    n = points.shape[0]
    adj = coo_matrix((w, (rows, cols)), shape=(n, n))
    return InterpolatedGraph(points, adj, spacing)


@dataclass
class GeoTopoScore:
    geo: tuple      # (precision, recall, f1)
    topo: tuple
    matched_count: int


def _f1(p: float, r: float) -> float:
    return 0.0 if p + r == 0 else 2.0 * p * r / (p + r)


def match_vertices(gt: InterpolatedGraph, pred: InterpolatedGraph,
                   threshold: float = MATCH_THRESHOLD_M) -> list:
    """Greedy one-to-one matching by ascending pair distance below threshold.

    Ties break lexicographically on (distance, gt index, pred index), making
    the matching deterministic and input-order independent.
    """
    if len(gt) == 0 or len(pred) == 0:
        return []
    tree = cKDTree(pred.points)
    cand = []
    neighborhoods = tree.query_ball_point(gt.points, threshold)
    for i, js in enumerate(neighborhoods):
        for j in js:
            d = float(np.hypot(*(gt.points[i] - pred.points[j])))
            cand.append((d, i, j))
    cand.sort()
    used_gt = set()
    used_pred = set()
    matching = []
    for d, i, j in cand:
        if i in used_gt or j in used_pred:
            continue
        used_gt.add(i)
        used_pred.add(j)
        matching.append((i, j))
    return matching


def geo_score(gt: InterpolatedGraph, pred: InterpolatedGraph,
              threshold: float = MATCH_THRESHOLD_M,
              matching: list | None = None) -> tuple:
    """(precision, recall): matched count over predicted / ground-truth size."""
    if len(gt) == 0 or len(pred) == 0:
        raise EmptyGraph("cannot score an empty interpolated graph")
    if matching is None:
        matching = match_vertices(gt, pred, threshold)
    m = len(matching)
    return m / len(pred), m / len(gt)


def topo_score(gt: InterpolatedGraph, pred: InterpolatedGraph,
               threshold: float = MATCH_THRESHOLD_M,
               subgraph_radius: float = SUBGRAPH_RADIUS_M,
               matching: list | None = None) -> tuple:
    """Subgraph-averaged GEO scores around every matched vertex pair.

    For a matched pair, the subgraphs contain all vertices within
    `subgraph_radius` path distance; the pair's GEO terms use the global
    matching restricted to those subgraphs. Precision is normalized by the
    predicted vertex count, recall by the ground-truth count.
    """
    if len(gt) == 0 or len(pred) == 0:
        raise EmptyGraph("cannot score an empty interpolated graph")
    if subgraph_radius <= 0:
        raise ValueError("subgraph_radius must be positive")
    if matching is None:
        matching = match_vertices(gt, pred, threshold)
    if not matching:
        return 0.0, 0.0
    dist_gt = gt.path_distances()
    dist_pred = pred.path_distances()
    gt_idx = np.array([i for i, _ in matching])
    pred_idx = np.array([j for _, j in matching])
    prec_sum = 0.0
    rec_sum = 0.0
    for i, j in matching:
        in_gt = dist_gt[i, gt_idx] <= subgraph_radius
        in_pred = dist_pred[j, pred_idx] <= subgraph_radius
        matched_in_both = int(np.sum(in_gt & in_pred))
        sub_pred_size = int(np.sum(dist_pred[j] <= subgraph_radius))
        sub_gt_size = int(np.sum(dist_gt[i] <= subgraph_radius))
        if sub_pred_size:
            prec_sum += matched_in_both / sub_pred_size
        if sub_gt_size:
            rec_sum += matched_in_both / sub_gt_size
    return prec_sum / len(pred), rec_sum / len(gt)


def evaluate(gt: Scenario, pred: Scenario,
             spacing: float = INTERP_SPACING_M,
             threshold: float = MATCH_THRESHOLD_M,
             subgraph_radius: float = SUBGRAPH_RADIUS_M) -> GeoTopoScore:
    """Full GEO/TOPO comparison between two scenarios' lane sets."""
    g = interpolate_graph(gt, spacing)
    p = interpolate_graph(pred, spacing)
    matching = match_vertices(g, p, threshold)
    gp, gr = geo_score(g, p, threshold, matching)
    tp, tr = topo_score(g, p, threshold, subgraph_radius, matching)
    return GeoTopoScore(
        geo=(gp, gr, _f1(gp, gr)),
        topo=(tp, tr, _f1(tp, tr)),
        matched_count=len(matching),
    )
