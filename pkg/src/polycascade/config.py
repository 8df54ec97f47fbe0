"""Run configuration shared by the CLI and the experiment scripts."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields

from .polyalign import VARIANTS
from .refine import CascadeConfig

REGRESSORS = ("oracle", "noisy-oracle", "lsq", "zero")
INIT_MODES = ("image", "jitter")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    # cascade
    K: int = 3
    M: int = 3
    N: int = 300
    S: int = 8
    delta_clip: float = 4.0
    # ablation axes
    variant: str = "vertex"
    oea_enabled: bool = True
    poly_iou_weight: float = 1.0
    # regressor
    regressor: str = "oracle"
    noise_sigma: float = 0.0
    noise_seed: int = 0
    train_seeds: list = field(default_factory=lambda: list(range(1000, 1050)))
    train_sigma: float = 0.1  # noise on the trajectories the lsq regressor is fit on
    init: str = "image"
    init_jitter: float = 0.1
    # matching / loss weights
    w_class: float = 2.0
    w_coord: float = 5.0
    # evaluation
    iou_thresh: float = 0.5
    score_thresh: float = 0.3
    raster_resolution: int = 512
    sweep: list = field(default_factory=lambda: [round(0.1 * i, 1) for i in range(10)])
    # scenes
    seeds: list = field(default_factory=lambda: list(range(10)))
    image_w: int = 256
    image_h: int = 256
    n_instances: int = 4
    curvature_range: list = field(default_factory=lambda: [-0.3, 0.3])
    rotation_range: list = field(default_factory=lambda: [0.0, 360.0])
    width_range: list = field(default_factory=lambda: [0.08, 0.3])
    strides: list = field(default_factory=lambda: [4, 8, 16, 32])
    channels: int = 8
    out: str = "runs"

    def cascade(self) -> CascadeConfig:
        return CascadeConfig(self.K, self.M, self.N, self.S, self.delta_clip)

    def validate(self) -> "RunConfig":
        try:
            self._validate()
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        return self

    def _validate(self):
        self.cascade()
        _check(self.variant in VARIANTS, f"variant must be one of {VARIANTS}")
        _check(self.regressor in REGRESSORS, f"regressor must be one of {REGRESSORS}")
        _check(self.init in INIT_MODES, f"init must be one of {INIT_MODES}")
        _check(self.noise_sigma >= 0, "noise_sigma must be >= 0")
        _check(self.init_jitter >= 0, "init_jitter must be >= 0")
        _check(self.train_sigma >= 0, "train_sigma must be >= 0")
        _check(self.poly_iou_weight >= 0, "poly_iou_weight must be >= 0")
        _check(0 < self.iou_thresh < 1, "iou_thresh must lie in (0, 1)")
        _check(0 <= self.score_thresh <= 1, "score_thresh must lie in [0, 1]")
        _check(self.raster_resolution >= 64, "raster_resolution must be >= 64")
        _check(all(0 <= t <= 1 for t in self.sweep), "sweep thresholds must lie in [0, 1]")
        _check(self.image_w >= 1 and self.image_h >= 1, "image size must be positive")
        _check(self.n_instances >= 0, "n_instances must be >= 0")
        _check(self.channels >= 1, "channels must be >= 1")
        _check(len(self.strides) >= 1 and all(s > 0 for s in self.strides)
               and all(b > a for a, b in zip(self.strides, self.strides[1:])),
               "strides must be positive and strictly increasing")
        for name in ("curvature_range", "rotation_range", "width_range"):
            r = getattr(self, name)
            _check(len(r) == 2 and all(math.isfinite(v) for v in r) and r[0] <= r[1],
                   f"{name} must be [lo, hi] with lo <= hi")
        _check(self.width_range[0] > 0, "width_range must be positive")
        _check(len(self.seeds) == len(set(self.seeds)), "seeds must be unique")
        _check(not set(self.seeds) & set(self.train_seeds) or self.regressor != "lsq",
               "train_seeds must not overlap seeds")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, obj: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**obj)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid config JSON: {exc}") from exc
        if not isinstance(obj, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(obj)


def _check(cond: bool, msg: str):
    if not cond:
        raise ConfigError(msg)


def parse_seeds(text: str) -> list[int]:
    """``"0-9"``, ``"1,4,7"`` or a mix such as ``"0-2,10"``."""
    seeds = []
    try:
        for part in text.split(","):
            part = part.strip()
            if not part:
                continue
            if "-" in part:
                lo, hi = part.split("-", 1)
                seeds.extend(range(int(lo), int(hi) + 1))
            else:
                seeds.append(int(part))
    except ValueError as exc:
        raise ConfigError(f"cannot parse seeds {text!r}") from exc
    if not seeds:
        raise ConfigError("no seeds given")
    return seeds
