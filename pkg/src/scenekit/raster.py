"""Raster codec: scenario -> W x H x 3 feature map, and per-pixel inverse decoders.

Channel layout (values in [0, 1]):
  0, 1  lane direction, 0.5 * (1 + d) for unit direction d; background 0.5
  2     agent boxes, 0.5 * (1 + v / v_max) inside each oriented box; background 0

Pixel convention: channels array has shape (H, W, 3), indexed [row, col].
World x maps to columns, world y to rows. The center of pixel (col=0, row=0)
sits at `origin`; world coordinates grow with pixel indices.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import cv2
import numpy as np
from PIL import Image

from .errors import OutOfRange, ParseError
from .scenario import Centerline, Scenario, Waypoint, polyline_directions

MAGIC = b"DSGF"
DEFAULT_STROKE_PX = 3
DEFAULT_V_MAX = 30.0
LANE_PRESENCE_THRESHOLD = 0.3  # min |2C-1| norm for a pixel to count as lane


@dataclass(frozen=True)
class WorldToPixel:
    """Affine world->pixel transform: px = scale * xy + translation."""

    scale: float           # pixels per meter
    translation: np.ndarray  # 2-vector, pixel units

    def apply(self, xy: np.ndarray) -> np.ndarray:
        return np.asarray(xy, dtype=float) * self.scale + self.translation

    def invert(self, px: np.ndarray) -> np.ndarray:
        return (np.asarray(px, dtype=float) - self.translation) / self.scale


@dataclass
class FeatureMap:
    channels: np.ndarray       # (H, W, 3) float
    meters_per_pixel: float
    origin: Waypoint           # world coordinate of pixel (0, 0) center

    @property
    def width(self) -> int:
        return self.channels.shape[1]

    @property
    def height(self) -> int:
        return self.channels.shape[0]

    @property
    def range_m(self) -> float:
        return self.width * self.meters_per_pixel

    def transform(self) -> WorldToPixel:
        scale = 1.0 / self.meters_per_pixel
        t = -np.array([self.origin.x, self.origin.y]) * scale
        return WorldToPixel(scale=scale, translation=t)

    def lane_mask(self, threshold: float = LANE_PRESENCE_THRESHOLD) -> np.ndarray:
        """Boolean mask of pixels whose direction channels encode a lane."""
        d = 2.0 * self.channels[:, :, :2] - 1.0
        return np.hypot(d[:, :, 0], d[:, :, 1]) >= threshold


def _centered_feature_map(w: int, h: int, range_m: float) -> FeatureMap:
    mpp = range_m / w
    origin = Waypoint(-range_m / 2.0 + mpp / 2.0, -range_m / 2.0 + mpp / 2.0)
    ch = np.zeros((h, w, 3), dtype=np.float64)
    ch[:, :, 0] = 0.5
    ch[:, :, 1] = 0.5
    return FeatureMap(ch, mpp, origin)


def rasterize(s: Scenario, w: int = 256, h: int = 256,
              stroke: int = DEFAULT_STROKE_PX) -> FeatureMap:
    """Render a normalized scenario into a 3-channel feature map.

    Lane segments are drawn with the given stroke width; direction channels
    hold 0.5*(1+d) per segment, later-drawn lanes overwriting earlier ones at
    shared pixels. Agent boxes fill channel 2 with 0.5*(1+v/v_max).
    """
    if w != h:
        raise ValueError("feature map must be square")
    if stroke < 1 or stroke % 2 == 0:
        raise ValueError("stroke must be odd and >= 1")
    fm = _centered_feature_map(w, h, s.range_m)
    tf = fm.transform()
    half = s.range_m / 2.0
    eps = 1e-6
    for c in s.lanes:
        if np.any(np.abs(c.points) > half + eps):
            raise OutOfRange("lane outside range square; normalize the scenario first")
    for a in s.agents:
        if abs(a.initial_state.x) > half + eps or abs(a.initial_state.y) > half + eps:
            raise OutOfRange("agent outside range square; normalize the scenario first")

    shift = 4
    mul = 1 << shift
    seg_mask = np.zeros((h, w), dtype=np.uint8)
    for c in s.lanes:
        dirs = polyline_directions(c)
        px = tf.apply(c.points)
        for i in range(px.shape[0] - 1):
            seg_mask[:] = 0
            p0 = tuple(np.round(px[i] * mul).astype(int))
            p1 = tuple(np.round(px[i + 1] * mul).astype(int))
            cv2.line(seg_mask, p0, p1, 1, thickness=stroke,
                     lineType=cv2.LINE_8, shift=shift)
            on = seg_mask.astype(bool)
            fm.channels[on, 0] = 0.5 * (1.0 + dirs[i, 0])
            fm.channels[on, 1] = 0.5 * (1.0 + dirs[i, 1])

    box_mask = np.zeros((h, w), dtype=np.uint8)
    for a in s.agents:
        st = a.initial_state
        cos_h, sin_h = np.cos(st.heading), np.sin(st.heading)
        half_l, half_w = a.length / 2.0, a.width / 2.0
        corners = np.array([
            [half_l, half_w], [half_l, -half_w],
            [-half_l, -half_w], [-half_l, half_w],
        ])
        rot = np.array([[cos_h, -sin_h], [sin_h, cos_h]])
        world = corners @ rot.T + np.array([st.x, st.y])
        pts = np.round(tf.apply(world) * mul).astype(np.int64)
        box_mask[:] = 0
        cv2.fillPoly(box_mask, [pts], 1, lineType=cv2.LINE_8, shift=shift)
        fm.channels[box_mask.astype(bool), 2] = 0.5 * (1.0 + st.speed / s.v_max)
    return fm


def decode_direction(fm: FeatureMap, px: tuple[int, int],
                     threshold: float = LANE_PRESENCE_THRESHOLD):
    """Decode the unit lane direction at pixel (col, row); None on background."""
    col, row = px
    vec = 2.0 * fm.channels[row, col, :2] - 1.0
    n = float(np.hypot(vec[0], vec[1]))
    if n < threshold:
        return None
    return vec / n


def decode_speed(fm: FeatureMap, px: tuple[int, int], v_max: float) -> float:
    """Inverse of the agent-channel encoding at one pixel."""
    col, row = px
    return float(np.clip((2.0 * fm.channels[row, col, 2] - 1.0) * v_max, 0.0, v_max))


def render_png(fm: FeatureMap, path) -> None:
    """Write an 8-bit RGB image, byte = round(255 * channel)."""
    arr = np.round(np.clip(fm.channels, 0.0, 1.0) * 255.0).astype(np.uint8)
    try:
        Image.fromarray(arr, mode="RGB").save(path, format="PNG")
    except OSError as e:
        raise IOError(f"cannot write {path}: {e}") from e


def load_png(path, meters_per_pixel: float, origin: Waypoint | None = None) -> FeatureMap:
    """Read an RGB PNG back into a feature map (1/255 quantization)."""
    try:
        arr = np.asarray(Image.open(path).convert("RGB"), dtype=np.float64) / 255.0
    except OSError as e:
        raise IOError(f"cannot read {path}: {e}") from e
    h, w = arr.shape[:2]
    if origin is None:
        r = w * meters_per_pixel
        origin = Waypoint(-r / 2 + meters_per_pixel / 2, -r / 2 + meters_per_pixel / 2)
    return FeatureMap(arr, meters_per_pixel, origin)


def write_raster(fm: FeatureMap, path) -> None:
    """Binary raster: 16-byte header (magic, u16 W/H/C/reserved, f32 m/px)
    followed by channel-major row-major little-endian f32 planes."""
    h, w, c = fm.channels.shape
    header = MAGIC + struct.pack("<HHHHf", w, h, c, 0, fm.meters_per_pixel)
    planes = np.ascontiguousarray(np.moveaxis(fm.channels, 2, 0), dtype="<f4")
    with open(path, "wb") as f:
        f.write(header)
        f.write(planes.tobytes())


def read_raster(path) -> FeatureMap:
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < 16 or data[:4] != MAGIC:
        raise ParseError(f"{path}: not a scenekit raster file")
    w, h, c, _, mpp = struct.unpack("<HHHHf", data[4:16])
    expected = 16 + w * h * c * 4
    if len(data) != expected:
        raise ParseError(f"{path}: truncated raster payload")
    planes = np.frombuffer(data, dtype="<f4", offset=16).reshape(c, h, w)
    channels = np.moveaxis(planes, 0, 2).astype(np.float64)
    r = w * mpp
    origin = Waypoint(-r / 2 + mpp / 2, -r / 2 + mpp / 2)
    return FeatureMap(channels, float(mpp), origin)
