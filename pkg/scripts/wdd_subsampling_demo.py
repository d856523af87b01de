"""Known-mask WDD with full and frequency-subsampled measurements."""

import argparse
import math

import numpy as np

from blindptycho.blind_ptycho import relative_error
from blindptycho.measurement import add_noise, forward_full, forward_subsampled_freq, random_scene
from blindptycho.wdd import wdd_recover


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--d", type=int, default=64)
    p.add_argument("--delta", type=int, default=6)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--snr", type=float, default=math.inf)
    a = p.parse_args()
    Ks = [K for K in range(2 * a.delta - 1, a.d + 1) if a.d % K == 0]
    print("K\tmean_error\tmax_error")
    for K in Ks:
        errs = []
        for t in range(a.trials):
            sc = random_scene(a.d, a.delta, t)
            Y = forward_full(sc) if K == a.d else forward_subsampled_freq(sc, K)
            if not math.isinf(a.snr):
                Y = add_noise(Y, a.snr, 1000 + t)
            errs.append(relative_error(wdd_recover(Y, sc.m, kappa=a.delta), sc.x))
        print(f"{K}\t{np.mean(errs):.3e}\t{np.max(errs):.3e}")


if __name__ == "__main__":
    main()
