"""Thermal-photon fit pass rate versus the number of spectrum points.

Spectra are the Lorentzian-plus-floor model (kappa/2pi = 299 kHz,
nbar = 0.005) with 10% multiplicative Gaussian scatter on log-spaced
frequencies from 10 kHz to 3 MHz. A seed passes when kappa/2pi is within
8 kHz and nbar within 20%.

    python3 scripts/thermal_point_count.py --seeds 200 --points 40 100 200
"""
import argparse
import math
import warnings

import numpy as np

from qchar import noise
from qchar.errors import BandWarning, FitError

KAPPA, CHI2, NBAR = 2 * math.pi * 299e3, 2 * math.pi * 300e3, 0.005


def trial(n_points, seed, level):
    w = 2 * math.pi * np.geomspace(1e4, 3e6, n_points)
    s = noise.thermal_psd(w, noise.thermal_numerator(NBAR, KAPPA, CHI2), KAPPA, 50.0)
    s = s * (1 + level * np.random.default_rng(seed).standard_normal(n_points))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BandWarning)
        fit = noise.fit_thermal_photon((w, s), CHI2, 6.74e9)
    return fit.kappa_rad_s / (2 * math.pi), fit.nbar


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=200)
    ap.add_argument("--points", type=int, nargs="+", default=[40, 100, 200])
    ap.add_argument("--level", type=float, default=0.1)
    args = ap.parse_args(argv)
    print(f"{'points':>6s} {'pass':>6s} {'sd kappa/2pi (Hz)':>18s} {'sd nbar/nbar':>13s}")
    for n in args.points:
        kappas, nbars, ok = [], [], 0
        for seed in range(args.seeds):
            try:
                k, nb = trial(n, seed, args.level)
            except FitError:
                continue
            kappas.append(k)
            nbars.append(nb)
            ok += abs(k - 299e3) <= 8e3 and abs(nb / NBAR - 1) <= 0.2
        print(f"{n:6d} {ok / args.seeds:6.3f} {np.std(kappas):18.1f} {np.std(nbars) / NBAR:13.4f}")


if __name__ == "__main__":
    main()
