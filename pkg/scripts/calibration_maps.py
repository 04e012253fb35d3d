"""Amplitude, frequency and DRAG calibration maps for a Gaussian pi/2 pulse.

Writes one calibration_map report plus CSV per sweep kind into ``--out`` and
prints the optimum per repetition count.

    python3 scripts/calibration_maps.py --out runs/calibration --t-g-ns 24
"""
import argparse
import json
from pathlib import Path

from qchar.cli import main as qchar

SWEEPS = {
    "amplitude": "0.95:1.05:41",
    "frequency": "-5:5:81",  # MHz
    "drag": "-1:3:41",
}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/calibration")
    ap.add_argument("--t-g-ns", type=float, default=24.0)
    ap.add_argument("--beta", type=float, default=0.5)
    ap.add_argument("--n-reps", default="1,3,5,11")
    ap.add_argument("--samples", type=int, default=1024)
    args = ap.parse_args(argv)
    out = Path(args.out)
    for kind, grid in SWEEPS.items():
        code = qchar(["calibrate", "sweep", "--kind", kind, f"--grid={grid}", "--n-reps", args.n_reps,
                      "--t-g-s", str(args.t_g_ns * 1e-9), "--beta", str(args.beta),
                      "--samples", str(args.samples), "--name", kind, "--format", "csv",
                      "--out", str(out), "--workers", "4"])
        if code:
            raise SystemExit(code)
        payload = json.loads((out / f"{kind}.calibrate-sweep.json").read_text())["payload"]
        print(f"{kind:9s} optimum per N {dict(zip(payload['n_reps'], payload['optimum']))}")


if __name__ == "__main__":
    main()
