"""Iterative box and polygon refinement.

Polygon stages work in the center/difference representation: per vertex pair
``(px, py, dxv, dyv)`` where ``(px, py)`` is the midpoint and ``(dxv, dyv)``
is top minus bottom. Arrays of that form have shape (S, 4); polygon deltas
use the same layout ``(ddx_c, ddy_c, ddxv, ddyv)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .geometry import (
    DEFAULT_S,
    BezierDelta,
    Box,
    TextPolygon,
    box_to_poly,
    default_bezier_delta,
)
from .polyalign import FeaturePyramid, polyalign, roialign_box

ZERO_DIFF_EPS = 1e-12


class NotRepresentableError(ValueError):
    """A target cannot be reached by one update step (sign flip or zero diff)."""


@dataclass(frozen=True)
class BoxDelta:
    dx: float = 0.0
    dy: float = 0.0
    dw: float = 0.0
    dh: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.dx, self.dy, self.dw, self.dh])


@dataclass(frozen=True)
class CascadeConfig:
    K: int = 3
    M: int = 3
    N: int = 300
    S: int = DEFAULT_S
    delta_clip: float = 4.0

    def __post_init__(self):
        if self.K < 1 or self.M < 1:
            raise ValueError(f"K and M must be >= 1, got K={self.K}, M={self.M}")
        if self.N < 1:
            raise ValueError(f"N must be >= 1, got {self.N}")
        if self.S < 2:
            raise ValueError(f"S must be >= 2, got {self.S}")
        if not self.delta_clip > 0:
            raise ValueError("delta_clip must be positive")


def apply_box_delta(box: Box, d: BoxDelta) -> Box:
    return Box(box.cx + d.dx * box.w, box.cy + d.dy * box.h,
               box.w * math.exp(d.dw), box.h * math.exp(d.dh))


def inverse_box_delta(box: Box, target: Box) -> BoxDelta:
    return BoxDelta((target.cx - box.cx) / box.w, (target.cy - box.cy) / box.h,
                    math.log(target.w / box.w), math.log(target.h / box.h))


def to_center_diff(poly: TextPolygon) -> np.ndarray:
    top, bot = poly.top, poly.bot
    return np.concatenate([(top + bot) / 2, top - bot], axis=1)


def from_center_diff(cd: np.ndarray) -> TextPolygon:
    cd = np.asarray(cd, dtype=float)
    center, diff = cd[:, :2], cd[:, 2:]
    return TextPolygon(center + diff / 2, center - diff / 2)


def apply_poly_delta(cd: np.ndarray, d: np.ndarray) -> np.ndarray:
    """One polygon refinement step.

    Center moves are scaled by the magnitude of the *previous* differences,
    differences are scaled by ``exp`` so their signs never change.
    """
    cd = np.asarray(cd, dtype=float)
    d = np.asarray(d, dtype=float)
    out = np.empty_like(cd)
    out[:, 0] = cd[:, 0] + d[:, 0] * np.abs(cd[:, 2])
    out[:, 1] = cd[:, 1] + d[:, 1] * np.abs(cd[:, 3])
    out[:, 2] = cd[:, 2] * np.exp(d[:, 2])
    out[:, 3] = cd[:, 3] * np.exp(d[:, 3])
    return out


def inverse_poly_delta(cd: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Exact delta taking ``cd`` to ``target`` in one step."""
    cd = np.asarray(cd, dtype=float)
    target = np.asarray(target, dtype=float)
    cur, tgt = cd[:, 2:], target[:, 2:]
    bad = (np.abs(cur) < ZERO_DIFF_EPS) | (np.abs(tgt) < ZERO_DIFF_EPS) | (np.sign(cur) != np.sign(tgt))
    if np.any(bad):
        s, c = np.argwhere(bad)[0]
        raise NotRepresentableError(
            f"vertex {s}: difference {'xy'[c]} goes {cur[s, c]:g} -> {tgt[s, c]:g}"
        )
    out = np.empty_like(cd)
    out[:, :2] = (target[:, :2] - cd[:, :2]) / np.abs(cur)
    out[:, 2:] = np.log(tgt / cur)
    return out


def reachable_poly_delta(cd: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Best-effort inverse: exact where representable, otherwise a partial move.

    Frozen coordinates (zero difference) stay put; a difference whose sign
    would have to flip only has its magnitude matched.
    """
    cd = np.asarray(cd, dtype=float)
    target = np.asarray(target, dtype=float)
    cur, tgt = cd[:, 2:], target[:, 2:]
    out = np.zeros_like(cd)
    movable = np.abs(cur) >= ZERO_DIFF_EPS
    safe = np.where(movable, np.abs(cur), 1.0)
    out[:, :2] = np.where(movable, (target[:, :2] - cd[:, :2]) / safe, 0.0)
    tgt_mag = np.maximum(np.abs(tgt), ZERO_DIFF_EPS)
    out[:, 2:] = np.where(movable, np.log(tgt_mag / safe), 0.0)
    return out


# ---------------------------------------------------------------------------
# cascade


class Regressor(Protocol):
    """Stand-in for the learned heads. ``index`` identifies the proposal.

    Implementations must tolerate concurrent read-only calls; they receive
    value snapshots and never share per-proposal state.
    """

    def box_delta(self, stage: int, index: int, box: Box, feat: np.ndarray) -> BoxDelta: ...

    def bezier_delta(self, index: int, box: Box, feat: np.ndarray) -> BezierDelta | None: ...

    def poly_delta(self, stage: int, index: int, cd: np.ndarray, feat: np.ndarray) -> np.ndarray: ...

    def score(self, index: int, poly: TextPolygon, feat: np.ndarray) -> float: ...


@dataclass
class StageRecord:
    stage: int
    kind: str  # "box" | "transition" | "poly"
    geometry: list

    def to_json(self) -> dict:
        if self.kind == "box":
            geom = [b.as_array().tolist() for b in self.geometry]
        else:
            geom = [p.to_json() for p in self.geometry]
        return {"stage": self.stage, "kind": self.kind, "geometry": geom}

    @classmethod
    def from_json(cls, obj: dict) -> "StageRecord":
        if obj["kind"] == "box":
            geom = [Box(*g) for g in obj["geometry"]]
        else:
            geom = [TextPolygon.from_json(g) for g in obj["geometry"]]
        return cls(obj["stage"], obj["kind"], geom)


@dataclass
class CascadeResult:
    polygons: list[TextPolygon]
    scores: np.ndarray
    trace: list[StageRecord] = field(default_factory=list)


BOX_ROI_SIZE = 7
BOX_ROI_SAMPLING = 2


def run_cascade(
    config: CascadeConfig,
    regressor: Regressor,
    pyramid: FeaturePyramid,
    init_boxes: list[Box],
    variant: str = "vertex",
) -> CascadeResult:
    """K box stages, one box -> polygon transition, M polygon stages.

    Every stage consumes the previous stage's geometry as a constant value;
    the trace holds an immutable snapshot after each stage.
    """
    if len(init_boxes) != config.N:
        raise ValueError(f"expected {config.N} initial boxes, got {len(init_boxes)}")
    trace: list[StageRecord] = []
    boxes = list(init_boxes)

    for k in range(config.K):
        new_boxes = []
        for i, box in enumerate(boxes):
            feat = roialign_box(pyramid, box, BOX_ROI_SIZE, BOX_ROI_SIZE, BOX_ROI_SAMPLING)
            d = np.clip(regressor.box_delta(k, i, box, feat).as_array(), -config.delta_clip, config.delta_clip)
            new_boxes.append(apply_box_delta(box, BoxDelta(*d)))
        boxes = new_boxes
        trace.append(StageRecord(k, "box", boxes))

    polys = []
    for i, box in enumerate(boxes):
        feat = roialign_box(pyramid, box, BOX_ROI_SIZE, BOX_ROI_SIZE, BOX_ROI_SAMPLING)
        delta = regressor.bezier_delta(i, box, feat)
        if delta is None:
            delta = default_bezier_delta(box)
        polys.append(box_to_poly(box, delta, config.S))
    trace.append(StageRecord(config.K, "transition", polys))

    for m in range(config.M):
        new_polys = []
        for i, poly in enumerate(polys):
            feat = polyalign(pyramid, poly, variant)
            cd = to_center_diff(poly)
            d = np.clip(regressor.poly_delta(m, i, cd.copy(), feat), -config.delta_clip, config.delta_clip)
            new_polys.append(from_center_diff(apply_poly_delta(cd, d)))
        polys = new_polys
        trace.append(StageRecord(config.K + 1 + m, "poly", polys))

    scores = np.array([
        regressor.score(i, p, polyalign(pyramid, p, variant)) for i, p in enumerate(polys)
    ])
    return CascadeResult(polys, scores, trace)
