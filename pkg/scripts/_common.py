"""Shared helpers for the experiment scripts (in-memory, no files besides the CSV)."""

import csv
import sys
from pathlib import Path

import numpy as np

from polycascade.evalkit import evaluate
from polycascade.pipeline import make_pyramid, make_scene, mean_l1_to_gt, run_scene


def run_config(cfg, regressor=None):
    """Run every seed of ``cfg``; returns the eval report and per-stage mean L1."""
    rows, l1 = [], {}
    for seed in cfg.seeds:
        scene = make_scene(cfg, seed)
        run = run_scene(cfg, scene, make_pyramid(cfg, scene), regressor)
        rows.append((f"{seed:06d}", run.detections(), [inst.poly for inst in scene.instances]))
        for rec in run.result.trace:
            if rec.kind != "box":
                l1.setdefault(rec.stage, []).append(mean_l1_to_gt(scene, rec.geometry))
    report = evaluate(rows, cfg.iou_thresh, cfg.score_thresh, cfg.raster_resolution)
    return report, {k: float(np.mean(v)) for k, v in sorted(l1.items())}


def write_csv(path, header, rows):
    if path is None:
        out = csv.writer(sys.stdout)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        out = csv.writer(open(path, "w", newline=""))
    out.writerow(header)
    out.writerows(rows)
