"""Error versus SNR for the blind multi-shift estimators; prints the summary table."""

import argparse
import os

from blindptycho._csv import read_table
from blindptycho.experiment import ExperimentConfig, run_sweep, validate_config


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--snr", default="10,20,30,40,50", help="comma-separated dB values")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="results/snr_sweep")
    a = p.parse_args()
    cfg = validate_config(ExperimentConfig(
        trials=a.trials, seed=a.seed, workers=a.workers, out_dir=a.out,
        snr_grid=tuple(float(s) for s in a.snr.split(","))))
    out = run_sweep(cfg)
    _, header, rows = read_table(os.path.join(out, "summary.csv"))
    print("\t".join(header))
    for r in rows:
        print("\t".join(r))


if __name__ == "__main__":
    main()
