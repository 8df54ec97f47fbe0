"""Box -> cubic Bezier centerline -> buffered text polygon.

Internal coordinates use mathematical y-up axes, so "left of the travel
direction" is the counterclockwise side. Image data with y pointing down
should go through :func:`flip_y` before entering this module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEFAULT_S = 8

# Bernstein coefficients C(3, j)
_BINOM3 = np.array([1.0, 3.0, 3.0, 1.0])


class DegenerateGeometryError(ValueError):
    """Raised when a polyline has no usable tangent direction."""


@dataclass(frozen=True)
class Box:
    """Axis-aligned box in center/size form (pixels)."""

    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self):
        vals = (self.cx, self.cy, self.w, self.h)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"non-finite box {vals}")
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"box size must be positive, got w={self.w}, h={self.h}")

    def as_array(self) -> np.ndarray:
        return np.array([self.cx, self.cy, self.w, self.h], dtype=float)

    @classmethod
    def from_corners(cls, x0: float, y0: float, x1: float, y1: float) -> "Box":
        return cls((x0 + x1) / 2, (y0 + y1) / 2, x1 - x0, y1 - y0)

    @classmethod
    def bounding(cls, points: np.ndarray) -> "Box":
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        return cls.from_corners(lo[0], lo[1], hi[0], hi[1])

    def corners(self) -> tuple[float, float, float, float]:
        return (self.cx - self.w / 2, self.cy - self.h / 2,
                self.cx + self.w / 2, self.cy + self.h / 2)


@dataclass(frozen=True)
class BezierCurve:
    """Cubic Bezier curve, ``ctrl`` has shape (4, 2)."""

    ctrl: np.ndarray

    def __post_init__(self):
        ctrl = np.array(self.ctrl, dtype=float)
        if ctrl.shape != (4, 2):
            raise ValueError(f"expected 4 control points, got shape {ctrl.shape}")
        if not np.all(np.isfinite(ctrl)):
            raise ValueError("non-finite control point")
        ctrl.setflags(write=False)
        object.__setattr__(self, "ctrl", ctrl)

    def evaluate(self, t) -> np.ndarray:
        """Points at parameters ``t`` (scalar or 1-d array), shape (n, 2)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return _bernstein_matrix(t) @ self.ctrl

    def derivative(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        d = 3.0 * np.diff(self.ctrl, axis=0)
        u = 1.0 - t
        basis = np.stack([u * u, 2 * u * t, t * t], axis=1)
        return basis @ d


@dataclass(frozen=True)
class BezierDelta:
    """Control-point offsets relative to a box plus the log width factor.

    ``dp`` has shape (4, 2); offsets are multiplied by (w, h) of the box.
    """

    dp: np.ndarray
    dwp: float = 0.0

    def __post_init__(self):
        dp = np.array(self.dp, dtype=float)
        if dp.shape != (4, 2):
            raise ValueError(f"expected 4 offset pairs, got shape {dp.shape}")
        if not (np.all(np.isfinite(dp)) and math.isfinite(self.dwp)):
            raise ValueError("non-finite Bezier delta")
        dp.setflags(write=False)
        object.__setattr__(self, "dp", dp)
        object.__setattr__(self, "dwp", float(self.dwp))

    @classmethod
    def zeros(cls) -> "BezierDelta":
        return cls(np.zeros((4, 2)), 0.0)


@dataclass(frozen=True)
class TextPolygon:
    """``S`` paired boundary vertices; ``top`` lies left of travel.

    Both arrays have shape (S, 2) and are stored read-only.
    """

    top: np.ndarray
    bot: np.ndarray

    def __post_init__(self):
        top = np.array(self.top, dtype=float)
        bot = np.array(self.bot, dtype=float)
        if top.ndim != 2 or top.shape[1] != 2 or top.shape != bot.shape:
            raise ValueError(f"top/bot shape mismatch: {top.shape} vs {bot.shape}")
        if top.shape[0] < 2:
            raise ValueError("a text polygon needs at least 2 vertex pairs")
        top.setflags(write=False)
        bot.setflags(write=False)
        object.__setattr__(self, "top", top)
        object.__setattr__(self, "bot", bot)

    @property
    def S(self) -> int:
        return self.top.shape[0]

    @property
    def centerline(self) -> np.ndarray:
        return (self.top + self.bot) / 2

    def ring(self) -> np.ndarray:
        """Closed boundary: top in order, then bottom reversed."""
        return np.concatenate([self.top, self.bot[::-1]], axis=0)

    def stacked(self) -> np.ndarray:
        """Array of shape (2, S, 2): [top, bot]."""
        return np.stack([self.top, self.bot])

    @classmethod
    def from_stacked(cls, arr: np.ndarray) -> "TextPolygon":
        arr = np.asarray(arr, dtype=float)
        return cls(arr[0], arr[1])

    def to_json(self) -> dict:
        return {"top": self.top.tolist(), "bot": self.bot.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "TextPolygon":
        return cls(np.asarray(obj["top"], dtype=float), np.asarray(obj["bot"], dtype=float))

    def __eq__(self, other):
        if not isinstance(other, TextPolygon):
            return NotImplemented
        return np.array_equal(self.top, other.top) and np.array_equal(self.bot, other.bot)

    __hash__ = None


def flip_y(points: np.ndarray, image_h: float) -> np.ndarray:
    """Convert between image (y-down) and internal (y-up) coordinates."""
    pts = np.array(points, dtype=float)
    pts[..., 1] = image_h - pts[..., 1]
    return pts


def _bernstein_matrix(t: np.ndarray) -> np.ndarray:
    t = t[:, None]
    j = np.arange(4)[None, :]
    return _BINOM3 * t**j * (1.0 - t) ** (3 - j)


def bernstein_basis(t: float) -> np.ndarray:
    """Cubic Bernstein basis values ``B_j(t)`` for j = 0..3."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    return _bernstein_matrix(np.array([float(t)]))[0]


def bezier_from_box(box: Box, delta: BezierDelta) -> BezierCurve:
    scale = np.array([box.w, box.h])
    return BezierCurve(np.array([box.cx, box.cy]) + delta.dp * scale)


def sample_polyline(curve: BezierCurve, S: int = DEFAULT_S) -> np.ndarray:
    """Parameter-uniform samples ``t_s = s / (S - 1)``, shape (S, 2).

    Endpoints are copied from the control polygon so they are exact. The sum
    is taken relative to the first control point (the weights sum to one), so
    a collapsed control polygon yields exactly coincident samples.
    """
    if S < 2:
        raise ValueError(f"S must be >= 2, got {S}")
    t = np.arange(S) / (S - 1)
    origin = curve.ctrl[0]
    pts = origin + _bernstein_matrix(t) @ (curve.ctrl - origin)
    pts[0] = curve.ctrl[0]
    pts[-1] = curve.ctrl[3]
    return pts


def polygon_width(box: Box, dwp: float) -> float:
    return math.sqrt(box.w * box.h) * math.exp(dwp)


def polyline_tangents(line: np.ndarray) -> np.ndarray:
    """Unit tangents at every vertex of a polyline.

    Central differences inside, one-sided at the ends. A zero difference
    falls back to the nearest non-zero segment (ties go backward).
    """
    line = np.asarray(line, dtype=float)
    n = line.shape[0]
    if n < 2:
        raise ValueError("polyline needs at least 2 vertices")
    seg = np.diff(line, axis=0)
    seg_len = np.hypot(seg[:, 0], seg[:, 1])
    nonzero = np.flatnonzero(seg_len > 0)
    if nonzero.size == 0:
        raise DegenerateGeometryError("all polyline segments have zero length")

    tan = np.empty_like(line)
    tan[0] = line[1] - line[0]
    tan[-1] = line[-1] - line[-2]
    if n > 2:
        tan[1:-1] = line[2:] - line[:-2]
    norms = np.hypot(tan[:, 0], tan[:, 1])
    for s in np.flatnonzero(norms == 0):
        # segments adjacent to vertex s are s-1 and s
        k = nonzero[np.argmin(np.abs(nonzero - (s - 0.5)))]
        tan[s] = seg[k]
        norms[s] = seg_len[k]
    return tan / norms[:, None]


def left_normals(tangents: np.ndarray) -> np.ndarray:
    """Rotate unit tangents by +90 degrees."""
    return np.stack([-tangents[:, 1], tangents[:, 0]], axis=1)


def buffer_polyline(line: np.ndarray, wp: float) -> TextPolygon:
    """Offset a polyline by ``wp / 2`` on both sides along its normals."""
    if not wp > 0:
        raise ValueError(f"polygon width must be positive, got {wp}")
    line = np.asarray(line, dtype=float)
    offset = 0.5 * wp * left_normals(polyline_tangents(line))
    return TextPolygon(line + offset, line - offset)


def box_to_poly(box: Box, delta: BezierDelta, S: int = DEFAULT_S) -> TextPolygon:
    curve = bezier_from_box(box, delta)
    return buffer_polyline(sample_polyline(curve, S), polygon_width(box, delta.dwp))


def default_bezier_delta(box: Box) -> BezierDelta:
    """Straight centerline along the longer box axis, width 0.5 * min(w, h)."""
    along = np.array([-0.5, -1.0 / 6.0, 1.0 / 6.0, 0.5])
    dp = np.zeros((4, 2))
    dp[:, 0 if box.w >= box.h else 1] = along
    wp = 0.5 * min(box.w, box.h)
    return BezierDelta(dp, math.log(wp / math.sqrt(box.w * box.h)))


def bezier_delta_for(box: Box, ctrl: np.ndarray, width: float) -> BezierDelta:
    """Offsets that make ``box_to_poly(box, .)`` rebuild a given curve and width."""
    ctrl = np.asarray(ctrl, dtype=float)
    dp = (ctrl - np.array([box.cx, box.cy])) / np.array([box.w, box.h])
    return BezierDelta(dp, math.log(width / math.sqrt(box.w * box.h)))
