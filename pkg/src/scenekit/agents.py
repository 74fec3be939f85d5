"""Decode agent initial states from the agent channel of a feature map."""

from __future__ import annotations

import math
from dataclasses import dataclass

import cv2
import numpy as np
from scipy.ndimage import label as cc_label

from .raster import FeatureMap, LANE_PRESENCE_THRESHOLD
from .scenario import Waypoint, wrap_angle

PRESENCE_THRESHOLD = 0.25   # channel-2 background is 0, v=0 encodes 0.5
MIN_AREA_PX = 6
SPLIT_FILL_RATIO = 0.6


@dataclass
class ExtractConfig:
    v_max: float = 30.0
    presence_threshold: float = PRESENCE_THRESHOLD
    min_area: int = MIN_AREA_PX
    split_fill_ratio: float = SPLIT_FILL_RATIO


@dataclass
class AgentDetection:
    center: Waypoint
    heading: float
    length: float
    width: float
    speed: float
    pixel_count: int
    heading_ambiguous: bool = False  # True when no lane direction resolved the axis


def _min_area_rect(rows: np.ndarray, cols: np.ndarray):
    """Min-area oriented rectangle of a pixel set; (cx, cy, w, h, angle_rad)."""
    pts = np.column_stack([cols, rows]).astype(np.float32)
    (cx, cy), (w, h), angle_deg = cv2.minAreaRect(pts)
    return float(cx), float(cy), float(w), float(h), math.radians(angle_deg)


def _two_means_split(rows: np.ndarray, cols: np.ndarray):
    """Deterministic 2-means on pixel coordinates, seeded by the two points
    farthest apart along the principal axis."""
    pts = np.column_stack([cols, rows]).astype(float)
    centered = pts - pts.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    proj = centered @ vt[0]
    c = np.array([pts[np.argmin(proj)], pts[np.argmax(proj)]])
    for _ in range(20):
        d = np.linalg.norm(pts[:, None, :] - c[None, :, :], axis=2)
        assign = d.argmin(axis=1)
        newc = np.array([pts[assign == k].mean(axis=0) if np.any(assign == k) else c[k]
                         for k in (0, 1)])
        if np.allclose(newc, c):
            break
        c = newc
    return assign


def _nearest_lane_direction(fm: FeatureMap, cx_px: float, cy_px: float,
                            max_radius: int = 40):
    """Decoded direction of the lane pixel nearest to (cx, cy), if any."""
    lane = fm.lane_mask()
    if not lane.any():
        return None
    rows, cols = np.nonzero(lane)
    d2 = (cols - cx_px) ** 2 + (rows - cy_px) ** 2
    i = int(np.argmin(d2))
    if d2[i] > max_radius ** 2:
        return None
    vec = 2.0 * fm.channels[rows[i], cols[i], :2] - 1.0
    n = np.hypot(vec[0], vec[1])
    if n < LANE_PRESENCE_THRESHOLD:
        return None
    return vec / n


def extract_agents(fm: FeatureMap, cfg: ExtractConfig | None = None) -> list:
    """Connected components of the agent channel -> oriented box detections.

    Each component above the area floor is fitted with a minimum-area
    rectangle; the mean channel value inverts to the agent speed, and the
    rectangle's long axis gives the heading, with the 180-degree ambiguity
    resolved toward the nearest decoded lane direction. Components whose
    rectangle fill ratio is low are split once by 2-means (adjacent agents
    merged by rasterization).
    """
    cfg = cfg or ExtractConfig()
    ch = fm.channels[:, :, 2]
    mask = ch > cfg.presence_threshold
    if not mask.any():
        return []
    lab, ncl = cc_label(mask, structure=np.ones((3, 3), dtype=int))
    components = []
    for i in range(ncl):
        rows, cols = np.nonzero(lab == i + 1)
        if rows.size < cfg.min_area:
            continue
        cx, cy, w, h, ang = _min_area_rect(rows, cols)
        rect_area = max(w * h, 1.0)
        if rows.size / rect_area < cfg.split_fill_ratio and rows.size >= 2 * cfg.min_area:
            assign = _two_means_split(rows, cols)
            for k in (0, 1):
                if np.sum(assign == k) >= cfg.min_area:
                    components.append((rows[assign == k], cols[assign == k]))
        else:
            components.append((rows, cols))

    mpp = fm.meters_per_pixel
    out = []
    for rows, cols in components:
        cx, cy, w, h, ang = _min_area_rect(rows, cols)
        # +1 px: minAreaRect measures between pixel centers, boxes cover
        # a half-pixel margin on each side
        w_m, h_m = (w + 1.0) * mpp, (h + 1.0) * mpp
        if w >= h:
            length, width = w_m, h_m
            heading = ang
        else:
            length, width = h_m, w_m
            heading = ang + math.pi / 2.0
        lane_dir = _nearest_lane_direction(fm, cx, cy)
        ambiguous = lane_dir is None
        if lane_dir is not None:
            if math.cos(heading) * lane_dir[0] + math.sin(heading) * lane_dir[1] < 0:
                heading += math.pi
        speed = float(np.clip((2.0 * ch[rows, cols].mean() - 1.0) * cfg.v_max,
                              0.0, cfg.v_max))
        wx = fm.origin.x + cx * mpp
        wy = fm.origin.y + cy * mpp
        out.append(AgentDetection(
            center=Waypoint(wx, wy),
            heading=wrap_angle(heading),
            length=length,
            width=width,
            speed=speed,
            pixel_count=int(rows.size),
            heading_ambiguous=ambiguous,
        ))
    return out
