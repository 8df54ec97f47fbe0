"""Command-line entry point: ``polycascade {synth,run,eval,plot}``.

All commands share one working directory (``--out``)::

    out/scenes/scene_<seed>.json          synth
    out/scenes/pyramid_<seed>/            synth (manifest.json + level_*.bin)
    out/detections/det_<seed>.json        run
    out/traces/trace_<seed>.jsonl         run
    out/report.csv, out/summary.json      eval
    out/plots/*.svg                       plot

Exit codes: 0 ok, 2 configuration error, 3 data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import ConfigError, RunConfig, parse_seeds
from .evalkit import evaluate
from .geometry import TextPolygon
from .pipeline import make_pyramid, make_regressor, make_scene, run_scene, train_lsq
from .plot import pr_curve_svg, stage_svg
from .polyalign import read_pyramid, write_pyramid
from .refine import StageRecord
from .synth import Scene

log = logging.getLogger("polycascade")

EXIT_CONFIG = 2
EXIT_DATA = 3


class DataError(RuntimeError):
    pass


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _read_json(path: Path):
    try:
        return json.loads(path.read_text())
    except FileNotFoundError:
        raise DataError(f"missing input file: {path}") from None
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc


def scene_path(out: Path, seed: int) -> Path:
    return out / "scenes" / f"scene_{seed:06d}.json"


def pyramid_manifest(out: Path, seed: int) -> Path:
    return out / "scenes" / f"pyramid_{seed:06d}" / "manifest.json"


def load_scene(out: Path, seed: int) -> Scene:
    try:
        return Scene.from_json(_read_json(scene_path(out, seed)))
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed scene {scene_path(out, seed)}: {exc}") from exc


# ---------------------------------------------------------------------------
# commands


def cmd_synth(cfg: RunConfig) -> list[Path]:
    out = Path(cfg.out)
    written = []
    for seed in cfg.seeds:
        scene = make_scene(cfg, seed)
        path = scene_path(out, seed)
        _write(path, scene.dumps())
        write_pyramid(make_pyramid(cfg, scene), pyramid_manifest(out, seed).parent)
        written.append(path)
        if scene.dropped:
            log.info("seed %d: %d instance(s) could not be placed", seed, scene.dropped)
    _write(out / "synth_config.json", cfg.to_json())
    return written


def cmd_run(cfg: RunConfig) -> dict:
    out = Path(cfg.out)
    lsq = train_lsq(cfg) if cfg.regressor == "lsq" else None
    summary = {}
    for seed in cfg.seeds:
        scene = load_scene(out, seed)
        try:
            pyramid = read_pyramid(pyramid_manifest(out, seed))
        except FileNotFoundError:
            raise DataError(f"missing feature pyramid for seed {seed}: {pyramid_manifest(out, seed)}") from None
        except (OSError, ValueError, KeyError) as exc:
            raise DataError(f"bad feature pyramid for seed {seed}: {exc}") from exc
        regressor = make_regressor(cfg, scene, lsq)
        run = run_scene(cfg, scene, pyramid, regressor)
        _write(out / "detections" / f"det_{seed:06d}.json",
               json.dumps(run.detections_json(), sort_keys=True) + "\n")
        lines = [json.dumps(rec.to_json(), sort_keys=True) for rec in run.result.trace]
        _write(out / "traces" / f"trace_{seed:06d}.jsonl", "\n".join(lines) + "\n")
        summary[str(seed)] = run.losses
    _write(out / "run_config.json", cfg.to_json())
    _write(out / "run_summary.json", json.dumps(summary, sort_keys=True, indent=1) + "\n")
    return summary


def _load_eval_inputs(cfg: RunConfig):
    out = Path(cfg.out)
    scenes = []
    for seed in cfg.seeds:
        scene = load_scene(out, seed)
        det = _read_json(out / "detections" / f"det_{seed:06d}.json")
        try:
            preds = [(TextPolygon.from_json(d), float(d["score"])) for d in det["detections"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed detections for seed {seed}: {exc}") from exc
        scenes.append((f"{seed:06d}", preds, [inst.poly for inst in scene.instances]))
    return scenes


def cmd_eval(cfg: RunConfig):
    out = Path(cfg.out)
    scenes = _load_eval_inputs(cfg)
    report = evaluate(scenes, cfg.iou_thresh, cfg.score_thresh, cfg.raster_resolution)
    sweep = []
    for t in sorted(cfg.sweep):
        r = evaluate(scenes, cfg.iou_thresh, t, cfg.raster_resolution)
        sweep.append({"score_thresh": t, "p": r.precision, "r": r.recall, "f": r.fscore})
    summary = report.summary()
    summary.update(iou_thresh=cfg.iou_thresh, score_thresh=cfg.score_thresh, sweep=sweep)
    _write(out / "report.csv", report.to_csv())
    _write(out / "summary.json", json.dumps(summary, indent=1, sort_keys=True) + "\n")
    _write(out / "eval_config.json", cfg.to_json())
    return report, sweep


def cmd_plot(out: Path, trace: Path | None = None, report: Path | None = None,
             scene: Path | None = None) -> list[Path]:
    written = []
    if trace is not None:
        try:
            text = trace.read_text()
        except OSError as exc:
            raise DataError(f"cannot read trace {trace}: {exc}") from exc
        try:
            records = [StageRecord.from_json(json.loads(line)) for line in text.splitlines() if line.strip()]
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed trace {trace}: {exc}") from exc
        if not records:
            raise DataError(f"trace {trace} is empty; nothing to plot")
        gts, w, h = [], None, None
        if scene is not None:
            sc = Scene.from_json(_read_json(scene))
            gts, w, h = [i.poly for i in sc.instances], sc.image_w, sc.image_h
        if w is None:
            w, h = _extent(records)
        for rec in records:
            path = out / f"{trace.stem}_stage{rec.stage}.svg"
            _write(path, stage_svg(rec.kind, rec.stage, rec.geometry, w, h, gts))
            written.append(path)
    if report is not None:
        summary = _read_json(report)
        if "sweep" not in summary:
            raise DataError(f"{report} has no threshold sweep")
        path = out / "pr_curve.svg"
        _write(path, pr_curve_svg(summary["sweep"]))
        written.append(path)
    return written


def _extent(records) -> tuple[float, float]:
    xs, ys = [0.0], [0.0]
    for rec in records:
        for g in rec.geometry:
            if isinstance(g, TextPolygon):
                pts = g.ring()
                xs.extend(pts[:, 0])
                ys.extend(pts[:, 1])
            else:
                x0, y0, x1, y1 = g.corners()
                xs += [x0, x1]
                ys += [y0, y1]
    return float(max(xs)), float(max(ys))


# ---------------------------------------------------------------------------
# argument handling


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="polycascade", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, help="JSON run configuration")
        p.add_argument("--seeds", help='scene seeds, e.g. "0-9" or "1,4,7"')
        p.add_argument("--out", help="working directory")

    p = sub.add_parser("synth", help="generate scenes and feature pyramids")
    common(p)
    p.add_argument("--n-instances", type=int)

    p = sub.add_parser("run", help="run the cascade on generated scenes")
    common(p)
    p.add_argument("--variant", choices=["vertex", "grid", "bezier"])
    p.add_argument("--oea", dest="oea", action="store_true", default=None)
    p.add_argument("--no-oea", dest="oea", action="store_false")
    p.add_argument("--regressor", choices=["oracle", "noisy-oracle", "lsq", "zero"])
    p.add_argument("--sigma", type=float, help="noise scale for noisy-oracle")

    p = sub.add_parser("eval", help="precision / recall / F of detections")
    common(p)
    p.add_argument("--iou-thresh", type=float)
    p.add_argument("--score-thresh", type=float)

    p = sub.add_parser("plot", help="SVG plots of a trace or a report")
    p.add_argument("--trace", type=Path)
    p.add_argument("--report", type=Path)
    p.add_argument("--scene", type=Path, help="scene JSON to draw ground truth under a trace")
    p.add_argument("--out", type=Path, default=Path("plots"))
    return parser


def resolve_config(args) -> RunConfig:
    if args.config is not None:
        try:
            cfg = RunConfig.from_json(args.config.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
    else:
        cfg = RunConfig()
    overrides = {
        "seeds": parse_seeds(args.seeds) if args.seeds else None,
        "out": args.out,
        "n_instances": getattr(args, "n_instances", None),
        "variant": getattr(args, "variant", None),
        "oea_enabled": getattr(args, "oea", None),
        "regressor": getattr(args, "regressor", None),
        "noise_sigma": getattr(args, "sigma", None),
        "iou_thresh": getattr(args, "iou_thresh", None),
        "score_thresh": getattr(args, "score_thresh", None),
    }
    for key, value in overrides.items():
        if value is not None:
            setattr(cfg, key, value)
    return cfg.validate()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "plot":
            if args.trace is None and args.report is None:
                raise ConfigError("plot needs --trace and/or --report")
            for path in cmd_plot(args.out, args.trace, args.report, args.scene):
                print(path)
            return 0
        cfg = resolve_config(args)
        if args.command == "synth":
            for path in cmd_synth(cfg):
                print(path)
        elif args.command == "run":
            cmd_run(cfg)
            print(f"ran {len(cfg.seeds)} scene(s) -> {cfg.out}")
        elif args.command == "eval":
            report, _ = cmd_eval(cfg)
            print(f"P={report.precision:.4f} R={report.recall:.4f} F={report.fscore:.4f}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"data error: {exc.filename or ''}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_DATA
    return 0


if __name__ == "__main__":
    sys.exit(main())
