"""Regressors standing in for the learned box / polygon heads."""

from __future__ import annotations

import numpy as np

from .assign import oriented_l1_cost, oriented_target
from .geometry import BezierDelta, Box, DegenerateGeometryError, TextPolygon, bezier_delta_for, box_to_poly, default_bezier_delta
from .polyalign import polyalign, roialign_box
from .refine import (
    BOX_ROI_SAMPLING,
    BOX_ROI_SIZE,
    BoxDelta,
    CascadeConfig,
    apply_box_delta,
    apply_poly_delta,
    from_center_diff,
    inverse_box_delta,
    reachable_poly_delta,
    to_center_diff,
)

POSITIVE_SCORE = 0.99
NEGATIVE_SCORE = 0.02
RIDGE = 0.1  # relative to the sample count


class ZeroRegressor:
    """Emits zero deltas and abstains at the transition."""

    def box_delta(self, stage, index, box, feat):
        return BoxDelta()

    def bezier_delta(self, index, box, feat):
        return None

    def poly_delta(self, stage, index, cd, feat):
        return np.zeros_like(cd)

    def score(self, index, poly, feat):
        return NEGATIVE_SCORE


class OracleRegressor:
    """Emits the exact inverse deltas toward an assigned ground-truth instance.

    ``targets[i]`` is the instance assigned to proposal ``i`` (or None). With
    ``oea`` the polygon stages regress to whichever orientation of the target
    is closer in L1.
    """

    def __init__(self, targets, oea: bool = True):
        self.targets = list(targets)
        self.oea = oea

    def target(self, index):
        """Instance assigned to a proposal, or None."""
        return self.targets[index] if index < len(self.targets) else None

    def box_delta(self, stage, index, box, feat):
        inst = self.target(index)
        return BoxDelta() if inst is None else inverse_box_delta(box, inst.box)

    def bezier_delta(self, index, box, feat):
        inst = self.target(index)
        return None if inst is None else bezier_delta_for(box, inst.ctrl, inst.width)

    def target_polygon(self, index, current: TextPolygon) -> TextPolygon | None:
        inst = self.target(index)
        if inst is None:
            return None
        if not self.oea:
            return inst.poly
        _, orientation = oriented_l1_cost(current, inst.poly)
        return oriented_target(inst.poly, orientation)

    def poly_delta(self, stage, index, cd, feat):
        target = self.target_polygon(index, from_center_diff(cd))
        if target is None:
            return np.zeros_like(cd)
        return reachable_poly_delta(cd, to_center_diff(target))

    def score(self, index, poly, feat):
        return NEGATIVE_SCORE if self.target(index) is None else POSITIVE_SCORE


class NoisyOracleRegressor(OracleRegressor):
    """Oracle deltas plus i.i.d. Gaussian noise of scale ``sigma``.

    Noise is keyed on (seed, stage, proposal) so results do not depend on
    evaluation order; ``seed`` may be an int or a sequence of ints.
    """

    def __init__(self, targets, sigma: float, seed: int = 0, oea: bool = True):
        super().__init__(targets, oea)
        if sigma < 0:
            raise ValueError("sigma must be >= 0")
        self.sigma = sigma
        self.seed = seed

    def _noise(self, kind: int, stage: int, index: int, shape):
        if self.sigma == 0:
            return np.zeros(shape)
        rng = np.random.default_rng([*np.atleast_1d(self.seed).tolist(), kind, stage, index])
        return rng.normal(0.0, self.sigma, shape)

    def box_delta(self, stage, index, box, feat):
        d = super().box_delta(stage, index, box, feat).as_array() + self._noise(0, stage, index, 4)
        return BoxDelta(*d)

    def bezier_delta(self, index, box, feat):
        d = super().bezier_delta(index, box, feat)
        if d is None:
            return None
        n = self._noise(1, 0, index, 9)
        return BezierDelta(d.dp + n[:8].reshape(4, 2), d.dwp + n[8])

    def poly_delta(self, stage, index, cd, feat):
        return super().poly_delta(stage, index, cd, feat) + self._noise(2, stage, index, cd.shape)


class LeastSquaresRegressor:
    """Per-stage linear maps from RoI features (plus bias) to deltas.

    Features are made translation and scale free before the fit: each channel
    is centered on its RoI mean and divided by the RoI scale (square root of
    the box or polygon bounding-box area). Maps are fit by least squares with
    a small ridge term; fit with :meth:`fit` on oracle-labelled trajectories.
    """

    def __init__(self, ridge: float = RIDGE):
        self.ridge = ridge
        self.box_maps: list[np.ndarray] = []
        self.bezier_map: np.ndarray | None = None
        self.poly_maps: list[np.ndarray] = []
        self.score_map: np.ndarray | None = None

    @staticmethod
    def design(feat, scale: float) -> np.ndarray:
        f = np.asarray(feat, dtype=float)
        f = f.reshape(-1, f.shape[-1])
        return np.append(((f - f.mean(axis=0)) / scale).ravel(), 1.0)

    def _solve(self, xs, ys):
        x, y = np.array(xs), np.array(ys)
        if x.shape[0] == 0:
            raise ValueError("no training samples for a regression slot")
        # ridge on the weights only, not the bias column
        penalty = self.ridge * x.shape[0] * np.eye(x.shape[1])
        penalty[-1, -1] = 0.0
        return np.linalg.solve(x.T @ x + penalty, x.T @ y)

    def fit(self, samples: "TrainingSamples") -> "LeastSquaresRegressor":
        self.box_maps = [self._solve(x, y) for x, y in samples.box]
        self.bezier_map = self._solve(*samples.bezier)
        self.poly_maps = [self._solve(x, y) for x, y in samples.poly]
        self.score_map = self._solve(*samples.score)
        return self

    def box_delta(self, stage, index, box, feat):
        return BoxDelta(*(self.design(feat, box_scale(box)) @ self.box_maps[stage]))

    def bezier_delta(self, index, box, feat):
        out = self.design(feat, box_scale(box)) @ self.bezier_map
        return BezierDelta(out[:8].reshape(4, 2), out[8])

    def poly_delta(self, stage, index, cd, feat):
        scale = poly_scale(from_center_diff(cd))
        return (self.design(feat, scale) @ self.poly_maps[stage]).reshape(cd.shape)

    def score(self, index, poly, feat):
        raw = self.design(feat, poly_scale(poly)) @ self.score_map
        return float(np.clip(raw, NEGATIVE_SCORE, POSITIVE_SCORE)[0])


def box_scale(box: Box) -> float:
    return float(np.sqrt(box.w * box.h))


def poly_scale(poly: TextPolygon) -> float:
    return box_scale(Box.bounding(poly.ring()))


class TrainingSamples:
    """(features, target delta) pairs gathered along cascade trajectories."""

    def __init__(self, K: int, M: int):
        self.box = [([], []) for _ in range(K)]
        self.bezier = ([], [])
        self.poly = [([], []) for _ in range(M)]
        self.score = ([], [])

    def add_box(self, stage, feat, box: Box, delta: BoxDelta):
        self.box[stage][0].append(LeastSquaresRegressor.design(feat, box_scale(box)))
        self.box[stage][1].append(delta.as_array())

    def add_bezier(self, feat, box: Box, delta: BezierDelta):
        self.bezier[0].append(LeastSquaresRegressor.design(feat, box_scale(box)))
        self.bezier[1].append(np.append(delta.dp.ravel(), delta.dwp))

    def add_poly(self, stage, feat, poly: TextPolygon, delta):
        self.poly[stage][0].append(LeastSquaresRegressor.design(feat, poly_scale(poly)))
        self.poly[stage][1].append(np.asarray(delta).ravel())

    def add_score(self, feat, poly: TextPolygon, target: float):
        self.score[0].append(LeastSquaresRegressor.design(feat, poly_scale(poly)))
        self.score[1].append([target])


def canonical_bezier_label(box: Box, delta: BezierDelta) -> BezierDelta:
    """The orientation of a transition label nearer (L1) to the default spread.

    Reversing the control points yields the reversed polygon, so both
    orientations describe the same region; a fixed choice removes the
    start/end ambiguity a linear map cannot resolve. Ties keep the input.
    """
    ref = default_bezier_delta(box).dp
    flipped = BezierDelta(delta.dp[::-1].copy(), delta.dwp)
    if np.abs(flipped.dp - ref).sum() < np.abs(delta.dp - ref).sum():
        return flipped
    return delta


def collect_samples(samples: TrainingSamples, config: CascadeConfig, oracle: OracleRegressor,
                    pyramid, init_boxes, variant: str = "vertex", driver=None) -> None:
    """Replay a cascade on one scene and record every regression input.

    Labels always come from ``oracle`` (transition labels in canonical
    orientation when it uses OEA); the geometry is advanced with the deltas
    of ``driver`` (default: the oracle itself). A noisy driver visits
    imperfect states, so later stages see non-trivial corrections.
    """
    driver = oracle if driver is None else driver

    def box_feat(b: Box):
        return roialign_box(pyramid, b, BOX_ROI_SIZE, BOX_ROI_SIZE, BOX_ROI_SAMPLING)

    clip = config.delta_clip
    for i, box in enumerate(init_boxes):
        has_target = oracle.target(i) is not None
        for k in range(config.K):
            feat = box_feat(box)
            if has_target:
                samples.add_box(k, feat, box, oracle.box_delta(k, i, box, feat))
            step = np.clip(driver.box_delta(k, i, box, feat).as_array(), -clip, clip)
            box = apply_box_delta(box, BoxDelta(*step))
        feat = box_feat(box)
        label = oracle.bezier_delta(i, box, feat)
        if label is not None:
            if oracle.oea:
                label = canonical_bezier_label(box, label)
            samples.add_bezier(feat, box, label)
        bd = driver.bezier_delta(i, box, feat)
        try:
            poly = box_to_poly(box, bd if bd is not None else default_bezier_delta(box), config.S)
        except DegenerateGeometryError:
            continue
        for m in range(config.M):
            feat = polyalign(pyramid, poly, variant)
            cd = to_center_diff(poly)
            if has_target:
                label = np.clip(oracle.poly_delta(m, i, cd, feat), -clip, clip)
                samples.add_poly(m, feat, poly, label)
            step = np.clip(driver.poly_delta(m, i, cd, feat), -clip, clip)
            poly = from_center_diff(apply_poly_delta(cd, step))
        samples.add_score(polyalign(pyramid, poly, variant), poly,
                          POSITIVE_SCORE if has_target else NEGATIVE_SCORE)
