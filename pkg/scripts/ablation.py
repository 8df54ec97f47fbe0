"""Sampling variant x orientation-equivalent annotation, with a learned or noisy regressor.

    python3 scripts/ablation.py --regressor lsq --seeds 0-19
    python3 scripts/ablation.py --regressor noisy-oracle --sigma 0.3

With ``lsq`` a fresh least-squares head is fit per cell (OEA changes the
training labels); proposals start from jittered instance boxes.
"""

import argparse

from _common import run_config, write_csv
from polycascade.config import RunConfig, parse_seeds
from polycascade.pipeline import train_lsq
from polycascade.polyalign import VARIANTS


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--regressor", choices=["lsq", "noisy-oracle"], default="lsq")
    ap.add_argument("--sigma", type=float, default=0.3)
    ap.add_argument("--seeds", default="0-19")
    ap.add_argument("--train-seeds", default="1000-1049")
    ap.add_argument("--N", type=int, default=8)
    ap.add_argument("--csv", help="output file (default stdout)")
    args = ap.parse_args()

    rows = []
    for variant in VARIANTS:
        for oea in (True, False):
            cfg = RunConfig(N=args.N, variant=variant, oea_enabled=oea, regressor=args.regressor,
                            noise_sigma=args.sigma, init="jitter", seeds=parse_seeds(args.seeds),
                            train_seeds=parse_seeds(args.train_seeds)).validate()
            reg = train_lsq(cfg) if args.regressor == "lsq" else None
            report, l1 = run_config(cfg, reg)
            rows.append([variant, int(oea), f"{report.precision:.4f}", f"{report.recall:.4f}",
                         f"{report.fscore:.4f}"] + [f"{l1[k]:.2f}" for k in sorted(l1)])
    stages = sorted(l1)
    write_csv(args.csv, ["variant", "oea", "p", "r", "f"] + [f"l1_stage{k}" for k in stages], rows)


if __name__ == "__main__":
    main()
