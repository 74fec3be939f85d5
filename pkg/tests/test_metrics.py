import heapq

import numpy as np
import pytest

from scenekit.errors import EmptyGraph
from scenekit.metrics import (GeoTopoScore, evaluate, geo_score,
                              interpolate_graph, match_vertices, topo_score)
from scenekit.scenario import Centerline, Scenario


def scen(lanes):
    return Scenario([Centerline(p) for p in lanes], [], 80, 30)


def straight(shift=0.0, x0=-30, x1=30, y=0.0):
    return scen([[(x0, y + shift), (x1, y + shift)]])


# ---------------------------------------------------------------------------
# oracles

def brute_force_matching(a, b, threshold):
    """Greedy one-to-one matching, quadratic reference implementation."""
    cand = []
    for i, p in enumerate(a):
        for j, q in enumerate(b):
            d = float(np.hypot(*(p - q)))
            if d < threshold:
                cand.append((d, i, j))
    cand.sort()
    used_a, used_b, out = set(), set(), []
    for d, i, j in cand:
        if i not in used_a and j not in used_b:
            used_a.add(i)
            used_b.add(j)
            out.append((i, j))
    return out


def brute_force_dijkstra(adj_coo, src):
    """Plain-Python Dijkstra over the symmetric sparse adjacency."""
    n = adj_coo.shape[0]
    nbrs = {i: [] for i in range(n)}
    for i, j, w in zip(adj_coo.row, adj_coo.col, adj_coo.data):
        nbrs[int(i)].append((int(j), float(w)))
        nbrs[int(j)].append((int(i), float(w)))
    dist = [float("inf")] * n
    dist[src] = 0.0
    heap = [(0.0, src)]
    while heap:
        d, u = heapq.heappop(heap)
        if d > dist[u]:
            continue
        for v, w in nbrs[u]:
            if d + w < dist[v]:
                dist[v] = d + w
                heapq.heappush(heap, (d + w, v))
    return np.array(dist)


# ---------------------------------------------------------------------------
# interpolation

def test_interpolation_spacing():
    ig = interpolate_graph(straight(), spacing=0.5)
    # 60 m lane -> 121 samples exactly 0.5 m apart
    assert len(ig) == 121
    d = np.hypot(*np.diff(ig.points, axis=0).T)
    np.testing.assert_allclose(d, 0.5, atol=1e-9)


def test_interpolation_keeps_endpoint():
    ig = interpolate_graph(scen([[(0, 0), (10.3, 0)]]), spacing=0.5)
    np.testing.assert_allclose(ig.points[-1], [10.3, 0], atol=1e-9)


def test_endpoint_joining_connects_lanes():
    two = scen([[(-30, 0), (0, 0)], [(0, 0), (30, 0)]])
    ig = interpolate_graph(two)
    d = brute_force_dijkstra(ig.adjacency, 0)
    assert np.all(np.isfinite(d))  # one connected component
    ig_apart = interpolate_graph(scen([[(-30, 0), (0, 0)], [(1, 0), (30, 0)]]))
    d2 = brute_force_dijkstra(ig_apart.adjacency, 0)
    assert np.any(np.isinf(d2))  # 1 m gap > connect tolerance


def test_path_distances_match_oracle():
    ig = interpolate_graph(scen([[(-10, 0), (10, 0)], [(0, 0), (0, 15)]]))
    ours = ig.path_distances()
    for src in (0, len(ig) // 2, len(ig) - 1):
        np.testing.assert_allclose(ours[src], brute_force_dijkstra(ig.adjacency, src),
                                   atol=1e-9)


def test_empty_graph_raises():
    with pytest.raises(EmptyGraph):
        interpolate_graph(scen([]))


# ---------------------------------------------------------------------------
# matching + GEO

def test_identity_perfect_score():
    r = evaluate(straight(), straight())
    assert r.geo == pytest.approx((1.0, 1.0, 1.0), abs=1e-12)
    assert r.topo == pytest.approx((1.0, 1.0, 1.0), abs=1e-12)


def test_shift_beyond_threshold_empty():
    g = interpolate_graph(straight())
    p = interpolate_graph(straight(shift=2.0))
    assert match_vertices(g, p, 1.5) == []
    assert geo_score(g, p, 1.5) == (0.0, 0.0)
    assert topo_score(g, p, 1.5) == (0.0, 0.0)


def test_small_shift_full_matching_vs_oracle():
    g = interpolate_graph(straight())
    p = interpolate_graph(straight(shift=1.0))
    m = match_vertices(g, p, 1.5)
    oracle = brute_force_matching(g.points, p.points, 1.5)
    assert sorted(m) == sorted(oracle)
    assert len(m) == len(g)  # every vertex pairs up at distance 1.0
    assert geo_score(g, p, 1.5) == (1.0, 1.0)


def test_half_graph_precision_recall():
    gt = scen([[(-30, 0), (30, 0)], [(-30, 20), (30, 20)]])
    pred = scen([[(-30, 0), (30, 0)]])
    r = evaluate(gt, pred)
    assert r.geo[0] == pytest.approx(1.0)
    # both lanes are the same length, so recall is half by construction
    assert r.geo[1] == pytest.approx(0.5, abs=0.01)


def test_swap_symmetry():
    a = scen([[(-30, 0), (30, 0)], [(-30, 10), (30, 10)]])
    b = scen([[(-30, 0.8), (30, 0.8)]])
    r1 = evaluate(a, b)
    r2 = evaluate(b, a)
    assert r1.geo[0] == pytest.approx(r2.geo[1])
    assert r1.geo[1] == pytest.approx(r2.geo[0])
    assert r1.geo[2] == pytest.approx(r2.geo[2])


def test_recall_monotone_in_threshold():
    g = interpolate_graph(straight())
    p = interpolate_graph(straight(shift=1.0))
    recalls = [geo_score(g, p, th)[1] for th in (0.5, 1.1, 1.5)]
    assert recalls[0] <= recalls[1] <= recalls[2]
    assert recalls[0] == 0.0 and recalls[2] == 1.0


# ---------------------------------------------------------------------------
# TOPO

def test_topo_penalizes_broken_connectivity():
    # same geometry, but the prediction severs the junction: GEO is near
    # perfect while TOPO recall drops
    gt = scen([[(-30, 0), (0, 0)], [(0, 0), (30, 0)]])
    pred = scen([[(-30, 0), (0, 0)], [(1.2, 0), (30, 0)]])
    r = evaluate(gt, pred, subgraph_radius=20.0)
    assert r.geo[2] >= 0.95
    assert r.topo[1] < r.geo[1] - 0.05


def test_topo_matches_brute_force_oracle():
    gt = scen([[(-10, 0), (10, 0)], [(0, 0), (0, 12)]])
    pred = scen([[(-10, 0.6), (10, 0.6)]])
    radius = 8.0
    g = interpolate_graph(gt)
    p = interpolate_graph(pred)
    matching = match_vertices(g, p, 1.5)
    dg = np.stack([brute_force_dijkstra(g.adjacency, i) for i in range(len(g))])
    dp = np.stack([brute_force_dijkstra(p.adjacency, j) for j in range(len(p))])
    prec = rec = 0.0
    for i, j in matching:
        both = sum(1 for a, b in matching
                   if dg[i, a] <= radius and dp[j, b] <= radius)
        prec += both / int(np.sum(dp[j] <= radius))
        rec += both / int(np.sum(dg[i] <= radius))
    ours = topo_score(g, p, 1.5, radius, matching)
    assert ours[0] == pytest.approx(prec / len(p), abs=1e-12)
    assert ours[1] == pytest.approx(rec / len(g), abs=1e-12)


def test_topo_radius_validation():
    g = interpolate_graph(straight())
    with pytest.raises(ValueError):
        topo_score(g, g, subgraph_radius=0.0)
