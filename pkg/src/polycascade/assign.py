"""Orientation-equivalent matching of predicted polygons to ground truth."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .geometry import TextPolygon

FOCAL_ALPHA = 0.25
FOCAL_GAMMA = 2.0
SCORE_EPS = 1e-8

W_CLASS = 2.0
W_COORD = 5.0

FORWARD = "forward"
REVERSED = "reversed"


@dataclass(frozen=True)
class Prediction:
    poly: TextPolygon
    score: float


@dataclass(frozen=True)
class GroundTruth:
    poly: TextPolygon
    label: str = "text"


@dataclass(frozen=True)
class MatchPair:
    pred: int
    gt: int
    orientation: str
    cost: float


@dataclass(frozen=True)
class MatchResult:
    pairs: tuple[MatchPair, ...]

    def __post_init__(self):
        preds = [p.pred for p in self.pairs]
        gts = [p.gt for p in self.pairs]
        if len(set(preds)) != len(preds) or len(set(gts)) != len(gts):
            raise ValueError("match indices must be unique on each side")

    def to_json(self) -> list[dict]:
        return [{"pred": p.pred, "gt": p.gt, "orientation": p.orientation, "cost": p.cost}
                for p in self.pairs]

    @classmethod
    def from_json(cls, obj: list[dict]) -> "MatchResult":
        return cls(tuple(MatchPair(int(d["pred"]), int(d["gt"]), d["orientation"], float(d["cost"]))
                         for d in obj))


def reverse_polygon(poly: TextPolygon) -> TextPolygon:
    """Walk the vertex pairs backwards with top and bottom swapped."""
    return TextPolygon(poly.bot[::-1], poly.top[::-1])


def _check_same_s(a: TextPolygon, b: TextPolygon):
    if a.S != b.S:
        raise ValueError(f"polygons have different vertex counts: {a.S} vs {b.S}")


def l1_poly_cost(pred: TextPolygon, gt: TextPolygon) -> float:
    _check_same_s(pred, gt)
    return float(np.abs(pred.top - gt.top).sum() + np.abs(pred.bot - gt.bot).sum())


def oriented_l1_cost(pred: TextPolygon, gt: TextPolygon) -> tuple[float, str]:
    """Smaller L1 cost over the two orientations of ``gt``; ties pick forward."""
    fwd = l1_poly_cost(pred, gt)
    rev = l1_poly_cost(pred, reverse_polygon(gt))
    return (rev, REVERSED) if rev < fwd else (fwd, FORWARD)


def oriented_target(gt: TextPolygon, orientation: str) -> TextPolygon:
    return reverse_polygon(gt) if orientation == REVERSED else gt


def _clamp_score(p: float) -> float:
    return min(max(p, SCORE_EPS), 1.0 - SCORE_EPS)


def focal_class_cost(score: float) -> float:
    """Focal positive cost minus focal negative cost for one score."""
    if not 0.0 < score < 1.0:
        raise ValueError(f"score must lie in (0, 1), got {score}")
    p = _clamp_score(score)
    pos = FOCAL_ALPHA * (1 - p) ** FOCAL_GAMMA * -math.log(p)
    neg = (1 - FOCAL_ALPHA) * p**FOCAL_GAMMA * -math.log(1 - p)
    return pos - neg


def focal_loss(score: float, positive: bool) -> float:
    p = _clamp_score(score)
    if positive:
        return FOCAL_ALPHA * (1 - p) ** FOCAL_GAMMA * -math.log(p)
    return (1 - FOCAL_ALPHA) * p**FOCAL_GAMMA * -math.log(1 - p)


def build_cost_matrix(preds, gts, w_class: float = W_CLASS, w_coord: float = W_COORD,
                      oea: bool = True):
    """Return ``(cost, reversed_mask)``, both of shape (N, G).

    With ``oea=False`` only the forward orientation of each target is used.
    """
    n, g = len(preds), len(gts)
    cost = np.zeros((n, g))
    rev = np.zeros((n, g), dtype=bool)
    for i, p in enumerate(preds):
        cls_cost = w_class * focal_class_cost(_clamp_score(p.score))
        for j, gt in enumerate(gts):
            if oea:
                c, orient = oriented_l1_cost(p.poly, gt.poly)
            else:
                c, orient = l1_poly_cost(p.poly, gt.poly), FORWARD
            cost[i, j] = cls_cost + w_coord * c
            rev[i, j] = orient == REVERSED
    return cost, rev


def hungarian(cost: np.ndarray) -> np.ndarray:
    """Row assigned to each column, minimizing the total cost.

    Requires at least as many rows as columns.
    """
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2 or cost.shape[0] < cost.shape[1]:
        raise ValueError(f"need an N x G matrix with N >= G, got {cost.shape}")
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost matrix must be finite")
    rows, cols = linear_sum_assignment(cost)
    out = np.empty(cost.shape[1], dtype=int)
    out[cols] = rows
    return out


def match(preds, gts, w_class: float = W_CLASS, w_coord: float = W_COORD,
          oea: bool = True) -> MatchResult:
    if not gts or not preds:
        return MatchResult(())
    cost, rev = build_cost_matrix(preds, gts, w_class, w_coord, oea)
    rows = hungarian(cost)
    pairs = tuple(
        MatchPair(int(i), j, REVERSED if rev[i, j] else FORWARD, float(cost[i, j]))
        for j, i in enumerate(rows)
    )
    return MatchResult(pairs)


def matched_l1(preds, gts, match_result: MatchResult):
    """Coordinate L1 summed over matched pairs and its gradient.

    The gradient has shape (N, 2, S, 2) indexed [pred, top/bot, vertex, xy];
    kinks (exact equality) get a zero subgradient.
    """
    S = preds[0].poly.S if preds else 0
    grad = np.zeros((len(preds), 2, S, 2))
    total = 0.0
    for pair in match_result.pairs:
        pred = preds[pair.pred].poly
        target = oriented_target(gts[pair.gt].poly, pair.orientation)
        _check_same_s(pred, target)
        diff = pred.stacked() - target.stacked()
        total += float(np.abs(diff).sum())
        grad[pair.pred] = np.sign(diff)
    return total, grad


def set_prediction_loss(preds, gts, match_result: MatchResult,
                        w_class: float = W_CLASS, w_coord: float = W_COORD):
    """Focal classification over all predictions plus matched coordinate L1.

    Returns ``(loss, grad)`` where ``grad`` is the gradient of the loss with
    respect to every predicted coordinate (only the L1 term depends on them).
    """
    matched = {p.pred for p in match_result.pairs}
    cls = sum(focal_loss(p.score, i in matched) for i, p in enumerate(preds))
    l1, grad = matched_l1(preds, gts, match_result)
    return w_class * cls + w_coord * l1, w_coord * grad
