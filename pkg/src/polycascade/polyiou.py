"""Quadrilateral-decomposition IoU for paired text polygons.

Both polygons are sliced through corresponding top/bottom vertex pairs into
S-1 quads; the loss averages the IoU of quads with equal index. Twisted or
non-convex quads contribute IoU 0 and are flagged.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .geometry import TextPolygon

log = logging.getLogger(__name__)

CLIP_EPS = 1e-12
RASTER_FALLBACK_RES = 512


@dataclass(frozen=True)
class QuadDecomposition:
    quads: np.ndarray  # (S-1, 4, 2): top_s, top_s+1, bot_s+1, bot_s
    degenerate: np.ndarray  # (S-1,) bool, True where the quad is not convex


def signed_area(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def shoelace_area(poly: np.ndarray) -> float:
    return abs(signed_area(np.asarray(poly, dtype=float)))


def is_convex(poly: np.ndarray, eps: float = CLIP_EPS) -> bool:
    """True for convex (possibly degenerate) polygons with a single winding."""
    p = np.asarray(poly, dtype=float)
    e = np.roll(p, -1, axis=0) - p
    cross = e[:, 0] * np.roll(e[:, 1], -1) - e[:, 1] * np.roll(e[:, 0], -1)
    if np.all(cross >= -eps) or np.all(cross <= eps):
        # reject star-shaped windings such as a pentagram
        ang = np.arctan2(e[:, 1], e[:, 0])
        turn = np.angle(np.exp(1j * (np.roll(ang, -1) - ang)))
        nonzero = np.hypot(e[:, 0], e[:, 1]) > eps
        return abs(turn[nonzero & np.roll(nonzero, -1)].sum()) <= 2 * np.pi + 1e-9
    return False


def ccw(poly: np.ndarray) -> np.ndarray:
    p = np.asarray(poly, dtype=float)
    return p[::-1].copy() if signed_area(p) < 0 else p


def decompose(poly: TextPolygon) -> QuadDecomposition:
    top, bot = poly.top, poly.bot
    quads = np.stack([top[:-1], top[1:], bot[1:], bot[:-1]], axis=1)
    flags = np.array([not is_convex(q) for q in quads], dtype=bool)
    return QuadDecomposition(quads, flags)


def clip_convex(subject: np.ndarray, clipper: np.ndarray) -> np.ndarray:
    """Sutherland-Hodgman clipping of ``subject`` by a convex CCW ``clipper``."""
    out = [tuple(p) for p in subject]
    n = len(clipper)
    for k in range(n):
        if not out:
            break
        ax, ay = clipper[k]
        bx, by = clipper[(k + 1) % n]
        ex, ey = bx - ax, by - ay
        inp, out = out, []
        sx, sy = inp[-1]
        s_side = ex * (sy - ay) - ey * (sx - ax)
        for px, py in inp:
            p_side = ex * (py - ay) - ey * (px - ax)
            if p_side >= -CLIP_EPS:
                if s_side < -CLIP_EPS:
                    t = s_side / (s_side - p_side)
                    out.append((sx + t * (px - sx), sy + t * (py - sy)))
                out.append((px, py))
            elif s_side >= -CLIP_EPS:
                t = s_side / (s_side - p_side)
                out.append((sx + t * (px - sx), sy + t * (py - sy)))
            sx, sy, s_side = px, py, p_side
    return np.array(out, dtype=float).reshape(-1, 2)


def quad_intersection_area(a: np.ndarray, b: np.ndarray) -> float:
    """Area of the overlap of two quads.

    Convex inputs are clipped exactly; anything else falls back to the
    raster estimate and is logged.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if not (is_convex(a) and is_convex(b)):
        log.debug("non-convex quad pair, using raster fallback")
        return raster_intersection_area(a, b, RASTER_FALLBACK_RES)
    a, b = ccw(a), ccw(b)
    if shoelace_area(a) == 0 or shoelace_area(b) == 0:
        return 0.0
    # fixed argument order keeps the result bit-symmetric
    first, second = sorted((a, b), key=lambda q: q.tobytes())
    return shoelace_area(clip_convex(first, second))


def quad_iou(a: np.ndarray, b: np.ndarray) -> float:
    inter = quad_intersection_area(a, b)
    union = shoelace_area(a) + shoelace_area(b) - inter
    return inter / union if union > 0 else 0.0


def poly_iou_details(pred: TextPolygon, gt: TextPolygon):
    """Per-quad IoUs and the mask of flagged (degenerate) pairs."""
    if pred.S != gt.S:
        raise ValueError(f"polygons have different vertex counts: {pred.S} vs {gt.S}")
    dp, dg = decompose(pred), decompose(gt)
    flagged = dp.degenerate | dg.degenerate
    ious = np.array([0.0 if f else quad_iou(a, b)
                     for a, b, f in zip(dp.quads, dg.quads, flagged)])
    return ious, flagged


def poly_iou_loss(pred: TextPolygon, gt: TextPolygon) -> float:
    ious, _ = poly_iou_details(pred, gt)
    return float(1.0 - ious.mean())


def poly_iou_loss_grad(pred: TextPolygon, gt: TextPolygon, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient w.r.t. pred coordinates, shape (2, S, 2)."""
    base = pred.stacked()
    grad = np.zeros_like(base)
    for idx in np.ndindex(base.shape):
        plus, minus = base.copy(), base.copy()
        plus[idx] += h
        minus[idx] -= h
        grad[idx] = (poly_iou_loss(TextPolygon.from_stacked(plus), gt)
                     - poly_iou_loss(TextPolygon.from_stacked(minus), gt)) / (2 * h)
    return grad


# ---------------------------------------------------------------------------
# scanline rasterization oracle


def _raster_masks(polys, resolution: int):
    """Even-odd fill of each polygon on a shared resolution^2 grid over the
    union bounding box. Returns (masks, cell_area)."""
    pts = np.concatenate([np.asarray(p, dtype=float) for p in polys])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    span = hi - lo
    if span[0] <= 0 or span[1] <= 0:
        return [np.zeros((resolution, resolution), dtype=bool) for _ in polys], 0.0
    dx, dy = span / resolution
    ys = lo[1] + (np.arange(resolution) + 0.5) * dy
    masks = []
    for poly in polys:
        p = np.asarray(poly, dtype=float)
        q = np.roll(p, -1, axis=0)
        y0, y1 = p[:, 1][None, :], q[:, 1][None, :]
        yy = ys[:, None]
        crosses = (y0 <= yy) != (y1 <= yy)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (yy - y0) / (y1 - y0)
        xc = p[:, 0][None, :] + t * (q[:, 0] - p[:, 0])[None, :]
        # number of cell centers strictly left of each crossing
        col = np.ceil((xc - lo[0]) / dx - 0.5)
        col = np.clip(np.where(crosses, col, resolution), 0, resolution).astype(int)
        toggles = np.zeros((resolution, resolution + 1), dtype=np.int32)
        rows = np.broadcast_to(np.arange(resolution)[:, None], col.shape)
        np.add.at(toggles, (rows, col), 1)
        masks.append((np.cumsum(toggles[:, :-1], axis=1) & 1).astype(bool))
    return masks, dx * dy


def raster_iou(a, b, resolution: int = 1024) -> float:
    if resolution < 64:
        raise ValueError(f"resolution must be >= 64, got {resolution}")
    (ma, mb), _ = _raster_masks([a, b], resolution)
    union = np.count_nonzero(ma | mb)
    return np.count_nonzero(ma & mb) / union if union else 0.0


def raster_intersection_area(a, b, resolution: int = 1024) -> float:
    (ma, mb), cell = _raster_masks([a, b], resolution)
    return np.count_nonzero(ma & mb) * cell
