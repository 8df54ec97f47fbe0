"""F-measure of the noisy-oracle cascade as the delta noise grows.

    python3 scripts/noise_sweep.py --sigmas 0,0.1,0.2,0.4,0.8 --seeds 0-19 --noise-seeds 3
"""

import argparse

import numpy as np

from _common import run_config, write_csv
from polycascade.config import RunConfig, parse_seeds


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sigmas", default="0,0.1,0.2,0.3,0.4,0.5,0.8")
    ap.add_argument("--seeds", default="0-19")
    ap.add_argument("--noise-seeds", type=int, default=3)
    ap.add_argument("--variant", default="vertex")
    ap.add_argument("--N", type=int, default=8)
    ap.add_argument("--csv", help="output file (default stdout)")
    args = ap.parse_args()

    rows = []
    for sigma in (float(s) for s in args.sigmas.split(",")):
        fs, l1s = [], []
        for ns in range(args.noise_seeds):
            cfg = RunConfig(N=args.N, regressor="noisy-oracle", noise_sigma=sigma, noise_seed=ns,
                            variant=args.variant, seeds=parse_seeds(args.seeds)).validate()
            report, l1 = run_config(cfg)
            fs.append(report.fscore)
            l1s.append(l1[max(l1)])
        rows.append([sigma, f"{np.mean(fs):.4f}", f"{np.std(fs):.4f}", f"{np.mean(l1s):.2f}"])
    write_csv(args.csv, ["sigma", "f_mean", "f_std", "final_l1"], rows)


if __name__ == "__main__":
    main()
