"""End-to-end runs on synthetic scenes: features, cascade, detections, losses."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assign import (
    GroundTruth,
    Prediction,
    l1_poly_cost,
    match,
    oriented_l1_cost,
    oriented_target,
    set_prediction_loss,
)
from .config import RunConfig
from .geometry import Box, TextPolygon
from .polyiou import poly_iou_loss
from .refine import CascadeResult, run_cascade
from .regressors import (
    LeastSquaresRegressor,
    NoisyOracleRegressor,
    OracleRegressor,
    TrainingSamples,
    ZeroRegressor,
    collect_samples,
)
from .synth import Scene, generate_scene, scene_features


def make_scene(cfg: RunConfig, seed: int) -> Scene:
    return generate_scene(seed, cfg.image_w, cfg.image_h, cfg.n_instances,
                          tuple(cfg.curvature_range), tuple(cfg.rotation_range),
                          tuple(cfg.width_range), cfg.S)


def make_pyramid(cfg: RunConfig, scene: Scene):
    return scene_features(scene, cfg.strides, cfg.channels)


def proposal_targets(cfg: RunConfig, scene: Scene) -> list:
    """Fixed assignment of instance j to proposal j; extra instances are missed."""
    return list(scene.instances[: cfg.N])


def initial_boxes(cfg: RunConfig, scene: Scene) -> list[Box]:
    """Whole-image boxes, or (``init="jitter"``) perturbed instance boxes for
    the assigned proposals."""
    image = Box(scene.image_w / 2, scene.image_h / 2, float(scene.image_w), float(scene.image_h))
    boxes = [image] * cfg.N
    if cfg.init == "jitter":
        rng = np.random.default_rng([scene.seed, 7])
        for j, inst in enumerate(proposal_targets(cfg, scene)):
            b = inst.box
            n = rng.normal(0.0, cfg.init_jitter, 4)
            boxes[j] = Box(b.cx + n[0] * b.w, b.cy + n[1] * b.h, b.w * np.exp(n[2]), b.h * np.exp(n[3]))
    return boxes


def train_lsq(cfg: RunConfig) -> LeastSquaresRegressor:
    samples = TrainingSamples(cfg.K, cfg.M)
    for seed in cfg.train_seeds:
        scene = make_scene(cfg, seed)
        targets = proposal_targets(cfg, scene)
        oracle = OracleRegressor(targets, cfg.oea_enabled)
        driver = NoisyOracleRegressor(targets, cfg.train_sigma, (cfg.noise_seed, seed), cfg.oea_enabled)
        # unassigned proposals only contribute negatives to the score map
        n = min(cfg.N, len(scene.instances) + 1)
        collect_samples(samples, cfg.cascade(), oracle, make_pyramid(cfg, scene),
                        initial_boxes(cfg, scene)[:n], cfg.variant, driver)
    return LeastSquaresRegressor().fit(samples)


def make_regressor(cfg: RunConfig, scene: Scene, lsq: LeastSquaresRegressor | None = None):
    targets = proposal_targets(cfg, scene)
    if cfg.regressor == "oracle":
        return OracleRegressor(targets, cfg.oea_enabled)
    if cfg.regressor == "noisy-oracle":
        return NoisyOracleRegressor(targets, cfg.noise_sigma, (cfg.noise_seed, scene.seed), cfg.oea_enabled)
    if cfg.regressor == "zero":
        return ZeroRegressor()
    if lsq is None:
        lsq = train_lsq(cfg)
    return lsq


@dataclass
class SceneRun:
    scene: Scene
    result: CascadeResult
    losses: dict

    def detections(self) -> list[tuple[TextPolygon, float]]:
        return list(zip(self.result.polygons, (float(s) for s in self.result.scores)))

    def detections_json(self) -> dict:
        return {"seed": self.scene.seed,
                "detections": [dict(p.to_json(), score=s) for p, s in self.detections()]}


def set_losses(cfg: RunConfig, scene: Scene, result: CascadeResult) -> dict:
    """Training-style losses of the final stage against the scene."""
    preds = [Prediction(p, float(s)) for p, s in zip(result.polygons, result.scores)]
    gts = [GroundTruth(inst.poly) for inst in scene.instances]
    if len(gts) > len(preds):
        gts = gts[: len(preds)]
    m = match(preds, gts, cfg.w_class, cfg.w_coord, cfg.oea_enabled)
    loss, _ = set_prediction_loss(preds, gts, m, cfg.w_class, cfg.w_coord)
    iou_terms = [poly_iou_loss(preds[p.pred].poly, oriented_target(gts[p.gt].poly, p.orientation))
                 for p in m.pairs]
    iou_loss = float(sum(iou_terms))
    return {"set_loss": loss, "poly_iou_loss": iou_loss,
            "total": loss + cfg.poly_iou_weight * iou_loss,
            "match": m.to_json()}


def run_scene(cfg: RunConfig, scene: Scene, pyramid=None, regressor=None) -> SceneRun:
    if pyramid is None:
        pyramid = make_pyramid(cfg, scene)
    if regressor is None:
        regressor = make_regressor(cfg, scene)
    result = run_cascade(cfg.cascade(), regressor, pyramid, initial_boxes(cfg, scene), cfg.variant)
    return SceneRun(scene, result, set_losses(cfg, scene, result))


def mean_l1_to_gt(scene: Scene, polys: list[TextPolygon], oea: bool = True) -> float:
    """Mean over instances of the (oriented) L1 distance from proposal j to instance j."""
    if not scene.instances:
        return 0.0
    costs = []
    for inst, poly in zip(scene.instances, polys):
        costs.append(oriented_l1_cost(poly, inst.poly)[0] if oea else l1_poly_cost(poly, inst.poly))
    return float(np.mean(costs))
