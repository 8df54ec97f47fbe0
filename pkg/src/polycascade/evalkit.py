"""Polygon-level precision / recall / F-score.

Protocol: predictions under ``score_thresh`` are dropped, the rest are
visited in descending score order (stable for ties) and each claims the
unclaimed ground truth with the highest raster IoU, provided it reaches
``iou_thresh``. Scores are micro-averaged over scenes.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .geometry import TextPolygon
from .polyiou import raster_iou

IOU_THRESH = 0.5
SCORE_THRESH = 0.3
EVAL_RESOLUTION = 512


def _ring(p) -> np.ndarray:
    return p.ring() if isinstance(p, TextPolygon) else np.asarray(p, dtype=float)


def _bounds(ring: np.ndarray):
    return ring.min(axis=0), ring.max(axis=0)


def polygon_iou(a, b, resolution: int = EVAL_RESOLUTION) -> float:
    ra, rb = _ring(a), _ring(b)
    (alo, ahi), (blo, bhi) = _bounds(ra), _bounds(rb)
    if np.any(ahi <= blo) or np.any(bhi <= alo):
        return 0.0
    return raster_iou(ra, rb, resolution)


@dataclass
class SceneCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    pairs: list = field(default_factory=list)  # (pred index, gt index, iou)

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def fscore(self) -> float:
        return f_measure(self.precision, self.recall)


def f_measure(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


def match_detections(preds, gts, iou_thresh: float = IOU_THRESH, score_thresh: float = SCORE_THRESH,
                     resolution: int = EVAL_RESOLUTION) -> SceneCounts:
    """Greedy score-ordered matching.

    ``preds`` is a sequence of (polygon, score); polygons may be TextPolygons
    or (n, 2) rings.
    """
    if not 0 < iou_thresh < 1:
        raise ValueError(f"iou_thresh must lie in (0, 1), got {iou_thresh}")
    kept = [(i, p, s) for i, (p, s) in enumerate(preds) if s >= score_thresh]
    kept.sort(key=lambda item: -item[2])
    claimed = set()
    counts = SceneCounts()
    for i, poly, _ in kept:
        best, best_iou = None, iou_thresh
        for j, gt in enumerate(gts):
            if j in claimed:
                continue
            iou = polygon_iou(poly, gt, resolution)
            if iou >= best_iou and (best is None or iou > best_iou):
                best, best_iou = j, iou
        if best is None:
            counts.fp += 1
        else:
            claimed.add(best)
            counts.tp += 1
            counts.pairs.append((i, best, best_iou))
    counts.fn = len(gts) - len(claimed)
    return counts


@dataclass
class EvalReport:
    precision: float
    recall: float
    fscore: float
    scenes: list = field(default_factory=list)  # (name, SceneCounts)

    def summary(self) -> dict:
        tp = sum(c.tp for _, c in self.scenes)
        fp = sum(c.fp for _, c in self.scenes)
        fn = sum(c.fn for _, c in self.scenes)
        return {"precision": self.precision, "recall": self.recall, "fscore": self.fscore,
                "tp": tp, "fp": fp, "fn": fn, "scenes": len(self.scenes)}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["scene", "tp", "fp", "fn", "p", "r", "f"])
        for name, c in self.scenes:
            w.writerow([name, c.tp, c.fp, c.fn, f"{c.precision:.6f}", f"{c.recall:.6f}", f"{c.fscore:.6f}"])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=1, sort_keys=True) + "\n"


def evaluate(scenes, iou_thresh: float = IOU_THRESH, score_thresh: float = SCORE_THRESH,
             resolution: int = EVAL_RESOLUTION) -> EvalReport:
    """Micro-averaged report over ``scenes``: iterable of (name, preds, gts)."""
    rows = [(name, match_detections(preds, gts, iou_thresh, score_thresh, resolution))
            for name, preds, gts in scenes]
    tp = sum(c.tp for _, c in rows)
    fp = sum(c.fp for _, c in rows)
    fn = sum(c.fn for _, c in rows)
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    return EvalReport(p, r, f_measure(p, r), rows)
