"""Deterministic synthetic scenes of curved text instances.

Randomness comes from SplitMix64 (Steele, Lea & Flood 2014) so a seed gives
the same scene in any language:

    state += 0x9E3779B97F4A7C15
    z = state
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    out = z ^ (z >> 31)                      (all arithmetic mod 2**64)

Uniform floats are ``(out >> 11) * 2**-53``. Draw order per instance:
length, bend of ctrl 1, bend of ctrl 2, width fraction, rotation, then
(x, y) placement pairs until the instance fits.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import DEFAULT_S, BezierCurve, Box, TextPolygon, box_to_poly, bezier_delta_for
from .polyalign import FeatureMap, FeaturePyramid, pyramid_shape_for

MASK64 = (1 << 64) - 1

LENGTH_RANGE = (0.25, 0.55)  # centerline chord as a fraction of min(image_w, image_h)
WIDTH_RANGE = (0.08, 0.3)  # polygon width as a fraction of centerline length
PLACEMENT_RETRIES = 50


class SplitMix64:
    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        return lo + (hi - lo) * ((self.next_u64() >> 11) * 2.0**-53)


@dataclass(frozen=True)
class Instance:
    poly: TextPolygon
    ctrl: np.ndarray  # (4, 2) centerline control points
    width: float

    @property
    def box(self) -> Box:
        """Reference box: the polygon's axis-aligned bounds."""
        return Box.bounding(np.concatenate([self.poly.top, self.poly.bot]))

    def to_json(self) -> dict:
        d = self.poly.to_json()
        d["ctrl"] = np.asarray(self.ctrl).tolist()
        d["width"] = self.width
        return d

    @classmethod
    def from_json(cls, obj: dict) -> "Instance":
        return cls(TextPolygon.from_json(obj), np.asarray(obj["ctrl"], dtype=float), float(obj["width"]))


@dataclass(frozen=True)
class Scene:
    seed: int
    image_w: int
    image_h: int
    instances: tuple[Instance, ...]
    dropped: int = 0  # instances that could not be placed
    params: dict = field(default_factory=dict, compare=False)

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "size": [self.image_w, self.image_h],
            "instances": [inst.to_json() for inst in self.instances],
            "dropped": self.dropped,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=1) + "\n"

    @classmethod
    def from_json(cls, obj: dict) -> "Scene":
        w, h = obj["size"]
        return cls(int(obj["seed"]), int(w), int(h),
                   tuple(Instance.from_json(d) for d in obj["instances"]),
                   int(obj.get("dropped", 0)))


def _rotate(points: np.ndarray, degrees: float) -> np.ndarray:
    if degrees % 360 == 180:
        return -points  # exact
    a = math.radians(degrees)
    c, s = math.cos(a), math.sin(a)
    return points @ np.array([[c, s], [-s, c]])


def _arc_length(curve: BezierCurve, n: int = 64) -> float:
    pts = curve.evaluate(np.linspace(0, 1, n))
    return float(np.hypot(*np.diff(pts, axis=0).T).sum())


def _validate_range(name, rng):
    lo, hi = rng
    if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
        raise ValueError(f"{name} must be a non-empty [lo, hi] range, got {rng}")


def generate_scene(
    seed: int,
    image_w: int = 256,
    image_h: int = 256,
    n_instances: int = 4,
    curvature_range=(-0.3, 0.3),
    rotation_range=(0.0, 360.0),
    width_range=WIDTH_RANGE,
    S: int = DEFAULT_S,
) -> Scene:
    """Random curved text polygons that fit the image without overlapping.

    Curvature is the control-point bend as a fraction of the chord length;
    rotation is in degrees, about the polygon's bounding-box center, so a
    180 degree rotation leaves every bounding box (and placement) unchanged.
    """
    if n_instances < 0:
        raise ValueError("n_instances must be >= 0")
    if image_w < 1 or image_h < 1:
        raise ValueError("image size must be positive")
    for name, r in (("curvature_range", curvature_range), ("rotation_range", rotation_range),
                    ("width_range", width_range)):
        _validate_range(name, r)
    if width_range[0] <= 0:
        raise ValueError("width_range must be positive")

    rng = SplitMix64(seed)
    base = min(image_w, image_h)
    instances: list[Instance] = []
    taken: list[tuple[float, float, float, float]] = []
    dropped = 0
    for _ in range(n_instances):
        length = rng.uniform(*LENGTH_RANGE) * base
        b1 = rng.uniform(*curvature_range) * length
        b2 = rng.uniform(*curvature_range) * length
        frac = rng.uniform(*width_range)
        angle = rng.uniform(*rotation_range)

        ctrl = np.array([[-length / 2, 0.0], [-length / 6, b1], [length / 6, b2], [length / 2, 0.0]])
        width = frac * _arc_length(BezierCurve(ctrl))
        canon = _build(ctrl, width, S)
        ctrl = ctrl - Box.bounding(canon.ring()).as_array()[:2]
        ctrl = _rotate(ctrl, angle)
        local = _build(ctrl, width, S)
        x0, y0, x1, y1 = Box.bounding(local.ring()).corners()

        placed = None
        for _ in range(PLACEMENT_RETRIES):
            if x1 - x0 > image_w or y1 - y0 > image_h:
                break
            ox = rng.uniform(-x0, image_w - x1)
            oy = rng.uniform(-y0, image_h - y1)
            cand = (x0 + ox, y0 + oy, x1 + ox, y1 + oy)
            if not any(_overlaps(cand, t) for t in taken):
                placed = (ox, oy)
                break
        if placed is None:
            dropped += 1
            continue
        final_ctrl = ctrl + np.array(placed)
        instances.append(Instance(_build(final_ctrl, width, S), final_ctrl, width))
        taken.append(Box.bounding(instances[-1].poly.ring()).corners())

    params = dict(n_instances=n_instances, curvature_range=list(curvature_range),
                  rotation_range=list(rotation_range), width_range=list(width_range), S=S)
    return Scene(seed, image_w, image_h, tuple(instances), dropped, params)


def _build(ctrl: np.ndarray, width: float, S: int) -> TextPolygon:
    """Polygon from an absolute curve, routed through a reference box so the
    result is exactly what box_to_poly produces from that box."""
    box = Box.bounding(ctrl) if np.ptp(ctrl[:, 0]) > 0 and np.ptp(ctrl[:, 1]) > 0 else \
        Box(float(ctrl[:, 0].mean()), float(ctrl[:, 1].mean()), 1.0, 1.0)
    return box_to_poly(box, bezier_delta_for(box, ctrl, width), S)


def _overlaps(a, b) -> bool:
    return a[0] < b[2] and b[0] < a[2] and a[1] < b[3] and b[1] < a[3]


# ---------------------------------------------------------------------------
# analytic feature pyramids


def _segment_distance(px, py, a, b):
    ab = b - a
    denom = float(ab @ ab)
    t = np.zeros_like(px) if denom == 0 else np.clip(((px - a[0]) * ab[0] + (py - a[1]) * ab[1]) / denom, 0, 1)
    return np.hypot(px - (a[0] + t * ab[0]), py - (a[1] + t * ab[1]))


def _inside_even_odd(px, py, ring):
    inside = np.zeros(px.shape, dtype=bool)
    q = np.roll(ring, -1, axis=0)
    for (x0, y0), (x1, y1) in zip(ring, q):
        crosses = (y0 <= py) != (y1 <= py)
        with np.errstate(divide="ignore", invalid="ignore"):
            xc = x0 + (py - y0) / (y1 - y0) * (x1 - x0)
        inside ^= crosses & (px < xc)
    return inside


def signed_distance(scene: Scene, px: np.ndarray, py: np.ndarray) -> np.ndarray:
    """Distance to the nearest instance boundary, negative inside instances,
    clamped to the image diagonal."""
    diag = math.hypot(scene.image_w, scene.image_h)
    dist = np.full(px.shape, diag)
    inside = np.zeros(px.shape, dtype=bool)
    for inst in scene.instances:
        ring = inst.poly.ring()
        for a, b in zip(ring, np.roll(ring, -1, axis=0)):
            dist = np.minimum(dist, _segment_distance(px, py, a, b))
        inside |= _inside_even_odd(px, py, ring)
    return np.clip(np.where(inside, -dist, dist), -diag, diag)


def scene_features(scene: Scene, strides=(4, 8, 16, 32), C: int = 8) -> FeaturePyramid:
    """Pyramid whose channels cycle through [signed distance, x, y, 1]."""
    strides = list(strides)
    if any(b <= a for a, b in zip(strides, strides[1:])):
        raise ValueError(f"strides must strictly increase, got {strides}")
    if C < 1:
        raise ValueError("C must be >= 1")
    levels = []
    for stride in strides:
        h, w = pyramid_shape_for(scene.image_w, scene.image_h, stride)
        py, px = np.meshgrid((np.arange(h) + 0.5) * stride, (np.arange(w) + 0.5) * stride, indexing="ij")
        base = np.stack([signed_distance(scene, px, py), px, py, np.ones_like(px)], axis=-1)
        levels.append(FeatureMap(base[:, :, np.arange(C) % 4], stride))
    return FeaturePyramid(tuple(levels))
