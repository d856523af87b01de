"""How often each shift index wins the residual argmin, per SNR."""

import argparse
import os

from blindptycho._csv import read_table
from blindptycho.experiment import ExperimentConfig, run_sweep, validate_config


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--snr", default="10,30,50")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    p.add_argument("--out", default="results/index_histogram")
    a = p.parse_args()
    cfg = validate_config(ExperimentConfig(
        trials=a.trials, seed=a.seed, workers=a.workers, out_dir=a.out,
        snr_grid=tuple(float(s) for s in a.snr.split(","))))
    out = run_sweep(cfg)
    _, header, rows = read_table(os.path.join(out, "histogram.csv"))
    col = {h: i for i, h in enumerate(header)}
    for r in rows:
        print(f"snr={r[col['snr_db']]:>5} shift={r[col['shift']]:>3} "
              f"x {'#' * (int(r[col['count_x']]) * 50 // a.trials):<50} "
              f"m {'#' * (int(r[col['count_m']]) * 50 // a.trials)}")


if __name__ == "__main__":
    main()
