"""Feature sampling on multi-level feature maps.

A value ``data[i, j]`` lives at image position ``((j + 0.5) * stride,
(i + 0.5) * stride)``. Samples outside the cell-center rectangle are clamped
onto it (replicate padding). Every sampler sums its result over pyramid
levels.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import BezierCurve, Box, TextPolygon

# Along-text offset of the two Bezier-variant samples, as a fraction of the
# cell extent on either side of the cell center.
BEZIER_SAMPLE_OFFSET = 0.25

VARIANTS = ("vertex", "grid", "bezier")


@dataclass(frozen=True)
class FeatureMap:
    data: np.ndarray  # (H, W, C)
    stride: float

    def __post_init__(self):
        data = np.array(self.data, dtype=float)
        if data.ndim == 2:
            data = data[:, :, None]
        if data.ndim != 3 or min(data.shape) < 1:
            raise ValueError(f"feature data must be (H, W, C), got {data.shape}")
        if not self.stride > 0:
            raise ValueError(f"stride must be positive, got {self.stride}")
        if not np.all(np.isfinite(data)):
            raise ValueError("feature data must be finite")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "stride", float(self.stride))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class FeaturePyramid:
    levels: tuple[FeatureMap, ...]

    def __post_init__(self):
        levels = tuple(self.levels)
        if not levels:
            raise ValueError("a pyramid needs at least one level")
        strides = [lv.stride for lv in levels]
        if any(b <= a for a, b in zip(strides, strides[1:])):
            raise ValueError(f"strides must strictly increase, got {strides}")
        if len({lv.channels for lv in levels}) != 1:
            raise ValueError("all levels must share the channel count")
        object.__setattr__(self, "levels", levels)

    @property
    def channels(self) -> int:
        return self.levels[0].channels


def as_pyramid(obj) -> FeaturePyramid:
    if isinstance(obj, FeaturePyramid):
        return obj
    if isinstance(obj, FeatureMap):
        return FeaturePyramid((obj,))
    return FeaturePyramid(tuple(obj))


def bilinear_cell(data: np.ndarray, gx, gy) -> np.ndarray:
    """Bilinear interpolation in cell coordinates (cell centers at integers).

    ``gx`` indexes columns and ``gy`` rows. Returns shape (n, C).
    """
    h, w = data.shape[:2]
    gx = np.clip(np.atleast_1d(np.asarray(gx, dtype=float)), 0.0, w - 1)
    gy = np.clip(np.atleast_1d(np.asarray(gy, dtype=float)), 0.0, h - 1)
    x0 = np.minimum(np.floor(gx).astype(int), max(w - 2, 0))
    y0 = np.minimum(np.floor(gy).astype(int), max(h - 2, 0))
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    ax = (gx - x0)[:, None]
    ay = (gy - y0)[:, None]
    top = data[y0, x0] * (1 - ax) + data[y0, x1] * ax
    bottom = data[y1, x0] * (1 - ax) + data[y1, x1] * ax
    return top * (1 - ay) + bottom * ay


def bilinear(fmap: FeatureMap, x, y) -> np.ndarray:
    """Sample a map at image positions; scalar input gives shape (C,)."""
    scalar = np.ndim(x) == 0 and np.ndim(y) == 0
    out = bilinear_cell(fmap.data, np.asarray(x) / fmap.stride - 0.5,
                        np.asarray(y) / fmap.stride - 0.5)
    return out[0] if scalar else out


def sample_pyramid(pyramid, points: np.ndarray) -> np.ndarray:
    """Sum of bilinear samples over all levels; ``points`` (..., 2) -> (..., C)."""
    pyramid = as_pyramid(pyramid)
    pts = np.asarray(points, dtype=float)
    flat = pts.reshape(-1, 2)
    acc = np.zeros((flat.shape[0], pyramid.channels))
    for lv in pyramid.levels:
        acc += bilinear(lv, flat[:, 0], flat[:, 1])
    return acc.reshape(pts.shape[:-1] + (pyramid.channels,))


def polyalign_vertex(pyramid, poly: TextPolygon) -> np.ndarray:
    """Samples at top, center and bottom vertices: shape (S, 3, C)."""
    pts = np.stack([poly.top, (poly.top + poly.bot) / 2, poly.bot], axis=1)
    return sample_pyramid(pyramid, pts)


def grid_points(poly: TextPolygon) -> np.ndarray:
    """Centers of an S x 3 lattice spread over the polygon, shape (S, 3, 2).

    The strip is parameterized by u in [0, S-1] along the vertex pairs
    (linear between pairs) and v in [0, 1] from top to bottom; cell k covers
    an equal share of u and band b covers a third of v.
    """
    S = poly.S
    u = (np.arange(S) + 0.5) * (S - 1) / S
    seg = np.minimum(np.floor(u).astype(int), S - 2)
    a = (u - seg)[:, None]
    top = poly.top[seg] * (1 - a) + poly.top[seg + 1] * a
    bot = poly.bot[seg] * (1 - a) + poly.bot[seg + 1] * a
    v = (np.arange(3) + 0.5) / 3
    return top[:, None, :] * (1 - v)[None, :, None] + bot[:, None, :] * v[None, :, None]


def polyalign_grid(pyramid, poly: TextPolygon) -> np.ndarray:
    return sample_pyramid(pyramid, grid_points(poly))


def bezier_grid_samples(top: BezierCurve, bot: BezierCurve, S: int) -> np.ndarray:
    """Sample pairs for each of S x 3 cells, shape (S, 3, 2, 2).

    Two samples per cell sit on the text-orientation axis (tangent of the
    mean of both boundary curves) at +-BEZIER_SAMPLE_OFFSET of the cell's
    extent along that axis.
    """
    t = (np.arange(S) + 0.5) / S
    pt_top, pt_bot = top.evaluate(t), bot.evaluate(t)
    v = (np.arange(3) + 0.5) / 3
    centers = pt_top[:, None, :] * (1 - v)[None, :, None] + pt_bot[:, None, :] * v[None, :, None]
    # one cell spans dt = 1 / S, so its extent along the axis is |c'(t)| / S
    mid_tangent = (top.derivative(t) + bot.derivative(t)) / 2
    offset = BEZIER_SAMPLE_OFFSET * mid_tangent / S
    return np.stack([centers - offset[:, None, :], centers + offset[:, None, :]], axis=2)


def polyalign_bezier(pyramid, top: BezierCurve, bot: BezierCurve, S: int = 8) -> np.ndarray:
    return sample_pyramid(pyramid, bezier_grid_samples(top, bot, S)).mean(axis=2)


def fit_bezier(points: np.ndarray) -> BezierCurve:
    """Least-squares cubic through points at parameter-uniform t, endpoints pinned."""
    pts = np.asarray(points, dtype=float)
    n = pts.shape[0]
    if n < 2:
        raise ValueError("need at least 2 points")
    t = np.linspace(0.0, 1.0, n)
    u = 1 - t
    b0, b1, b2, b3 = u**3, 3 * u * u * t, 3 * u * t * t, t**3
    rhs = pts - np.outer(b0, pts[0]) - np.outer(b3, pts[-1])
    a = np.stack([b1, b2], axis=1)
    inner, *_ = np.linalg.lstsq(a, rhs, rcond=None)
    return BezierCurve(np.vstack([pts[0], inner, pts[-1]]))


def polyalign(pyramid, poly: TextPolygon, variant: str = "vertex") -> np.ndarray:
    """Dispatch to a PolyAlign variant; the Bezier variant fits boundary curves."""
    if variant == "vertex":
        return polyalign_vertex(pyramid, poly)
    if variant == "grid":
        return polyalign_grid(pyramid, poly)
    if variant == "bezier":
        return polyalign_bezier(pyramid, fit_bezier(poly.top), fit_bezier(poly.bot), poly.S)
    raise ValueError(f"unknown PolyAlign variant {variant!r}; expected one of {VARIANTS}")


def roialign_box(pyramid, box: Box, out_w: int, out_h: int, sampling: int) -> np.ndarray:
    """Classic RoIAlign averaged over ``sampling**2`` points per bin: (out_h, out_w, C)."""
    if min(out_w, out_h, sampling) < 1:
        raise ValueError("out_w, out_h and sampling must be >= 1")
    x0, y0, _, _ = box.corners()
    bw, bh = box.w / out_w, box.h / out_h
    sub = (np.arange(sampling) + 0.5) / sampling
    xs = x0 + (np.arange(out_w)[:, None] + sub[None, :]) * bw  # (out_w, sampling)
    ys = y0 + (np.arange(out_h)[:, None] + sub[None, :]) * bh
    gx = np.broadcast_to(xs[None, :, None, :], (out_h, out_w, sampling, sampling))
    gy = np.broadcast_to(ys[:, None, :, None], (out_h, out_w, sampling, sampling))
    vals = sample_pyramid(pyramid, np.stack([gx, gy], axis=-1))
    return vals.sum(axis=(2, 3)) / sampling**2


# ---------------------------------------------------------------------------
# file format: one JSON header line, then little-endian float32 H*W*C


def write_feature_map(fmap: FeatureMap, path) -> None:
    header = {"h": fmap.height, "w": fmap.width, "c": fmap.channels, "stride": fmap.stride}
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(np.ascontiguousarray(fmap.data, dtype="<f4").tobytes())


def read_feature_map(path) -> FeatureMap:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline())
        raw = fh.read()
    h, w, c = header["h"], header["w"], header["c"]
    if len(raw) != 4 * h * w * c:
        raise ValueError(f"{path}: expected {4 * h * w * c} payload bytes, got {len(raw)}")
    data = np.frombuffer(raw, dtype="<f4").reshape(h, w, c).astype(float)
    return FeatureMap(data, header["stride"])


def write_pyramid(pyramid: FeaturePyramid, directory, stem: str = "level") -> Path:
    """Write each level plus ``manifest.json`` listing them in order."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    names = []
    for i, lv in enumerate(pyramid.levels):
        name = f"{stem}_{i}.bin"
        write_feature_map(lv, directory / name)
        names.append(name)
    manifest = directory / "manifest.json"
    manifest.write_text(json.dumps({"levels": names}, indent=1) + "\n")
    return manifest


def read_pyramid(manifest) -> FeaturePyramid:
    manifest = Path(manifest)
    names = json.loads(manifest.read_text())["levels"]
    return FeaturePyramid(tuple(read_feature_map(manifest.parent / n) for n in names))


def pyramid_shape_for(image_w: int, image_h: int, stride: float) -> tuple[int, int]:
    return max(1, math.ceil(image_h / stride)), max(1, math.ceil(image_w / stride))
