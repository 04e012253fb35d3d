"""Surface-loss regression: equal weights versus inverse-variance weights.

Each seed synthesizes the bundled spr_set spec (8 participation ratios,
15% log-normal scatter on Q_TLS,0) and checks whether the fitted loss tangent
lies within the tolerance set in spr_set.json.

    python3 scripts/surface_weighting.py --seeds 1000
"""
import argparse
import json
from pathlib import Path

import numpy as np

from qchar import datasets, loss, synth
from qchar.datasets import SprPoint

SPEC = Path(__file__).resolve().parent / "specs" / "spr_set.json"


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=1000)
    args = ap.parse_args(argv)
    spec = json.loads(SPEC.read_text())
    truth = spec["ground_truth"]["tan_delta_s"]
    tol = spec["grid"].get("tan_tolerance", 1.8e-4)
    err = {"weighted": [], "unweighted": []}
    bulk = {"weighted": [], "unweighted": []}
    for seed in range(args.seeds):
        spec["seed"] = seed
        pts = datasets.validate_dataset(synth.synth(spec)[0]).points
        for name, use in (("weighted", pts), ("unweighted", [SprPoint(p.p_ms, p.q_tls0) for p in pts])):
            fit = loss.fit_surface_loss(use)
            err[name].append(abs(fit.tan_delta_s - truth))
            bulk[name].append(fit.bulk_q_lower_bound)
    for name in err:
        e = np.array(err[name])
        print(f"{name:10s} within {tol:.1e}: {np.mean(e <= tol):.3f}  max err {e.max():.2e}  "
              f"median bulk bound {np.median(bulk[name]):.3e}")


if __name__ == "__main__":
    main()
