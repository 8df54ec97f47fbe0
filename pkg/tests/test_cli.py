import csv
import json
from pathlib import Path

import pytest

from polycascade.cli import main
from polycascade.config import ConfigError, RunConfig, parse_seeds


def write_config(tmp_path, **overrides) -> Path:
    cfg = {"N": 8, "out": str(tmp_path / "out"), "seeds": [0, 1, 2]}
    cfg.update(overrides)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return path


def run(*argv):
    return main([str(a) for a in argv])


def tree_bytes(root: Path) -> dict:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture
def oracle_run(tmp_path):
    cfg = write_config(tmp_path)
    assert run("synth", "--config", cfg) == 0
    assert run("run", "--config", cfg) == 0
    assert run("eval", "--config", cfg) == 0
    return cfg, tmp_path / "out"


def test_synth_writes_one_scene_per_seed(tmp_path):
    cfg = write_config(tmp_path, seeds=list(range(10)))
    assert run("synth", "--config", cfg) == 0
    scenes = sorted((tmp_path / "out" / "scenes").glob("scene_*.json"))
    assert len(scenes) == 10
    assert (tmp_path / "out" / "scenes" / "pyramid_000003" / "manifest.json").exists()


def test_invalid_range_fails_before_writing(tmp_path):
    cfg = write_config(tmp_path, width_range=[0.3, 0.1])
    assert run("synth", "--config", cfg) == 2
    assert not (tmp_path / "out").exists()


@pytest.mark.parametrize("bad", [{"M": 0}, {"K": 0}, {"variant": "ring"}, {"bogus": 1},
                                 {"iou_thresh": 1.5}, {"seeds": [1, 1]}])
def test_config_errors_exit_2(tmp_path, bad):
    cfg = write_config(tmp_path, **bad)
    assert run("run", "--config", cfg) == 2


def test_malformed_config_json(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text("{not json")
    assert run("synth", "--config", path) == 2
    assert run("synth", "--config", tmp_path / "missing.json") == 2


def test_oracle_run_is_perfect(oracle_run):
    _, out = oracle_run
    summary = json.loads((out / "summary.json").read_text())
    assert summary["precision"] == summary["recall"] == summary["fscore"] == 1.0
    rows = list(csv.DictReader((out / "report.csv").open()))
    assert [r["scene"] for r in rows] == ["000000", "000001", "000002"]
    assert all(r["f"] == "1.000000" for r in rows)
    trace = (out / "traces" / "trace_000000.jsonl").read_text().splitlines()
    assert [json.loads(line)["kind"] for line in trace] == ["box"] * 3 + ["transition"] + ["poly"] * 3
    saved = RunConfig.from_json((out / "run_config.json").read_text())
    assert saved.N == 8 and saved.regressor == "oracle"


def test_threshold_sweep_recall_monotone(oracle_run):
    _, out = oracle_run
    sweep = json.loads((out / "summary.json").read_text())["sweep"]
    assert [row["score_thresh"] for row in sweep] == sorted(row["score_thresh"] for row in sweep)
    recalls = [row["r"] for row in sweep]
    assert all(b <= a for a, b in zip(recalls, recalls[1:]))


def test_noisy_sigma_zero_equals_oracle(oracle_run, tmp_path):
    cfg, out = oracle_run
    noisy = tmp_path / "noisy"
    assert run("synth", "--config", cfg, "--out", noisy) == 0
    assert run("run", "--config", cfg, "--out", noisy, "--regressor", "noisy-oracle", "--sigma", 0) == 0
    for seed in range(3):
        name = f"detections/det_{seed:06d}.json"
        assert (noisy / name).read_bytes() == (out / name).read_bytes()


def test_empty_detections_give_zero(oracle_run):
    cfg, out = oracle_run
    for det in (out / "detections").glob("det_*.json"):
        obj = json.loads(det.read_text())
        obj["detections"] = []
        det.write_text(json.dumps(obj))
    assert run("eval", "--config", cfg) == 0
    assert json.loads((out / "summary.json").read_text())["fscore"] == 0.0


def test_missing_scene_is_data_error(tmp_path, capsys):
    cfg = write_config(tmp_path)
    assert run("synth", "--config", cfg) == 0
    assert run("run", "--config", cfg, "--seeds", "0,9") == 3
    assert "scene_000009.json" in capsys.readouterr().err


def test_corrupt_detections_are_data_error(oracle_run):
    cfg, out = oracle_run
    (out / "detections" / "det_000001.json").write_text('{"detections": [{"top": 1}]}')
    assert run("eval", "--config", cfg) == 3


def test_rerun_is_byte_identical(tmp_path):
    trees = []
    for name in ("a", "b"):
        cfg = write_config(tmp_path, out=str(tmp_path / name))
        for cmd in ("synth", "run", "eval"):
            assert run(cmd, "--config", cfg) == 0
        trees.append(tree_bytes(tmp_path / name))
    # output directories differ only in the recorded "out" path
    for key in trees[0]:
        if key.endswith("_config.json"):
            continue
        assert trees[0][key] == trees[1][key], key


def test_flags_override_config(tmp_path):
    cfg = write_config(tmp_path)
    assert run("synth", "--config", cfg, "--seeds", "4", "--n-instances", "2") == 0
    scene = json.loads((tmp_path / "out" / "scenes" / "scene_000004.json").read_text())
    assert len(scene["instances"]) + scene["dropped"] == 2
    assert run("run", "--config", cfg, "--seeds", "4", "--variant", "bezier", "--no-oea") == 0
    saved = json.loads((tmp_path / "out" / "run_config.json").read_text())
    assert saved["variant"] == "bezier" and saved["oea_enabled"] is False


# -- plot --------------------------------------------------------------------


def test_plot_one_svg_per_stage(tmp_path):
    cfg = write_config(tmp_path, n_instances=1, N=1, seeds=[5])
    for cmd in ("synth", "run", "eval"):
        assert run(cmd, "--config", cfg) == 0
    out = tmp_path / "out"
    plots = tmp_path / "plots"
    trace = out / "traces" / "trace_000005.jsonl"
    assert run("plot", "--trace", trace, "--scene", out / "scenes" / "scene_000005.json",
               "--report", out / "summary.json", "--out", plots) == 0
    svgs = sorted(p.name for p in plots.glob("*.svg"))
    assert svgs == sorted([f"trace_000005_stage{k}.svg" for k in range(7)] + ["pr_curve.svg"])
    first = (plots / "trace_000005_stage6.svg").read_bytes()
    assert first.startswith(b"<svg") and b"<polygon" in first
    assert run("plot", "--trace", trace, "--out", tmp_path / "again",
               "--scene", out / "scenes" / "scene_000005.json") == 0
    assert (tmp_path / "again" / "trace_000005_stage6.svg").read_bytes() == first


def test_plot_empty_trace(tmp_path, capsys):
    trace = tmp_path / "empty.jsonl"
    trace.write_text("")
    assert run("plot", "--trace", trace, "--out", tmp_path / "p") == 3
    assert "empty" in capsys.readouterr().err


def test_plot_needs_input(tmp_path):
    assert run("plot", "--out", tmp_path / "p") == 2


def test_lsq_regressor_runs(tmp_path):
    cfg = write_config(tmp_path, regressor="lsq", train_seeds=[100, 101, 102], seeds=[0])
    assert run("synth", "--config", cfg) == 0
    assert run("run", "--config", cfg) == 0
    assert run("eval", "--config", cfg) == 0
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert 0.0 <= summary["fscore"] <= 1.0


# -- config helpers ----------------------------------------------------------


def test_parse_seeds():
    assert parse_seeds("0-3,7") == [0, 1, 2, 3, 7]
    with pytest.raises(ConfigError):
        parse_seeds("a-b")
    with pytest.raises(ConfigError):
        parse_seeds(",")


def test_config_roundtrip():
    cfg = RunConfig(variant="grid", seeds=[3, 4], noise_sigma=0.2)
    assert RunConfig.from_json(cfg.to_json()) == cfg
