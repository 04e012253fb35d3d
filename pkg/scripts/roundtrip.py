"""Synthesize -> fit -> score round trips through the command-line front end.

For every spec in scripts/specs (or the ones named), run ``--seeds`` seeds and
print the pass rate of ``qchar score`` against the ground-truth sidecar.

    python3 scripts/roundtrip.py --seeds 20
    python3 scripts/roundtrip.py sweep decay --seeds 100
"""
import argparse
import contextlib
import io
import json
import sys
import tempfile
from pathlib import Path

from qchar.cli import main

SPECS = Path(__file__).resolve().parent / "specs"


def fit_argv(kind, data, spec):
    gt = spec["ground_truth"]
    if kind == "sweep":
        return ["resonator", "fit", data]
    if kind == "loss_grid":
        return ["loss", "fit", data]
    if kind == "decay":
        return ["decay", "fit", data]
    if kind == "spr_set":
        return ["spr", "fit", data]
    if kind == "qubit_record":
        return ["cohort", "report", data, "--quiet"]
    if kind == "rb":
        return ["rb", "fit", data]
    if kind == "cpmg_set":
        psd = gt["psd"]
        return ["noise", "fit-thermal", data, "--chi2-hz", str(psd["chi2_hz"]), "--f-res-hz", "6.74e9",
                "--quadrature", "full", "--f-min-hz", "1e4", "--f-max-hz", "2e6"]
    if kind == "xps":
        s = gt["strohmeier"]
        return ["xps", "fit", data, "--lambda-m-nm", str(s["lambda_m_nm"]),
                "--lambda-ox-nm", str(s["lambda_ox_nm"])]
    raise SystemExit(f"no fitter for kind {kind!r}")


def quiet(argv):
    with contextlib.redirect_stdout(io.StringIO()), contextlib.redirect_stderr(io.StringIO()):
        return main(argv)


def run_spec(name, seeds):
    spec = json.loads((SPECS / f"{name}.json").read_text())
    passed = 0
    with tempfile.TemporaryDirectory() as tmp:
        out = Path(tmp)
        spec_path = out / f"{name}.json"
        spec_path.write_text(json.dumps(spec))
        for seed in range(seeds):
            if quiet(["synth", str(spec_path), "--seed", str(seed), "--out", tmp]) != 0:
                continue
            data = str(out / f"{name}.data.json")
            argv = fit_argv(spec["kind"], data, spec) + ["--out", tmp]
            if quiet(argv) != 0:
                continue
            reports = [p for p in out.glob(f"{name}.data.*.json")
                       if not p.name.endswith((".truth.json", ".score.json")) and p.name != f"{name}.data.json"]
            side = str(out / f"{name}.data.truth.json")
            passed += quiet(["score", str(reports[0]), side, "--out", tmp]) == 0
            for p in reports:
                p.unlink()
    return passed


def cli(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("specs", nargs="*", help="spec names (default: all)")
    ap.add_argument("--seeds", type=int, default=10)
    args = ap.parse_args(argv)
    names = args.specs or sorted(p.stem for p in SPECS.glob("*.json"))
    for name in names:
        n = run_spec(name, args.seeds)
        print(f"{name:14s} {n:4d}/{args.seeds} passed")
        sys.stdout.flush()


if __name__ == "__main__":
    cli()
