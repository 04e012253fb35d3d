"""Batch command-line front end.

Every subcommand reads validated inputs, runs the owning analysis module and
writes ``<stem>.<command>-<subcommand>.json`` holding ``{"kind", "payload",
"meta"}``. The payload is a pure function of the inputs and flags; run
metadata (time, version, paths) lives in ``meta``.

Exit status: 0 success, 1 failed round-trip score, 2 validation error,
3 fit error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, bundled_path
from . import coherence, datasets, loss, noise, resonator, synth as synth_mod, xps
from .errors import FitError, QcharError, SchemaError, ValidationError
from .gates import calibration, pulses, qutrit, rb

EXIT_OK, EXIT_SCORE_FAIL, EXIT_VALIDATION, EXIT_FIT = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"qchar: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_VALIDATION)


# ---------------------------------------------------------------------------
# helpers


def _resolve(path):
    """``@name`` refers to a bundled data file."""
    if path.startswith("@"):
        return Path(str(bundled_path(path[1:])))
    return Path(path)


def _stem(path):
    name = Path(path).name
    if name.startswith("@"):
        return name[1:]
    for suffix in (".json", ".csv"):
        if name.endswith(suffix):
            return name[: -len(suffix)]
    return name


_DATASET_KIND = {
    datasets.FrequencySweep: "sweep", datasets.DecayTrace: "decay", datasets.LossGrid: "loss_grid",
    datasets.CpmgSet: "cpmg_set", datasets.RbDataset: "rb", datasets.XpsSpectrum: "xps",
    datasets.SprSet: "spr_set", datasets.QubitCohort: "qubit_record",
}


def _load_dataset(path, kinds):
    p = _resolve(path)
    if not p.exists():
        raise SchemaError(f"input {path} does not exist")
    data = datasets.load(p)
    kind = _DATASET_KIND[type(data)]
    if kind not in kinds:
        raise SchemaError(f"{path}: expected {' or '.join(kinds)} dataset, got {kind}")
    return data


def _load_json(path):
    p = _resolve(path)
    if not p.exists():
        raise SchemaError(f"input {path} does not exist")
    try:
        return json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: malformed JSON: {exc}") from None


def _parse_tolerances(items):
    out = {}
    for item in items or []:
        key, sep, val = item.partition("=")
        if not sep or not key:
            raise ValidationError(f"--tolerance expects KEY=VAL, got {item!r}")
        try:
            out[key] = float(val)
        except ValueError:
            raise ValidationError(f"--tolerance value for {key!r} is not a number") from None
    return out


def _reject_tolerances(args, allowed=()):
    tol = _parse_tolerances(args.tolerance)
    unknown = set(tol) - set(allowed)
    if unknown:
        raise ValidationError(f"unknown tolerance keys for this command: {sorted(unknown)}")
    return tol


def _csv_text(columns):
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    names = list(columns)
    w.writerow(names)
    for row in zip(*(columns[n] for n in names)):
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    return out.getvalue()


def _plain(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _dumps(obj):
    return json.dumps(obj, sort_keys=True, indent=1, allow_nan=True, default=_plain) + "\n"


def _with_warnings(fn, *a, **k):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        result = fn(*a, **k)
    msgs = [f"{w.category.__name__}: {w.message}" for w in caught]
    return result, msgs


class _Run:
    def __init__(self, args, command):
        self.args = args
        self.command = command
        self.out = Path(args.out)

    def write(self, stem, kind, payload, inputs, csv_columns=None, extra_meta=None):
        self.out.mkdir(parents=True, exist_ok=True)
        meta = {"tool": "qchar", "version": __version__, "command": self.command,
                "inputs": [str(i) for i in inputs],
                "created_utc": datetime.now(timezone.utc).isoformat(timespec="seconds")}
        if extra_meta:
            meta.update(extra_meta)
        report = {"kind": kind, "payload": payload, "meta": meta}
        path = self.out / f"{stem}.{self.command}.json"
        path.write_text(_dumps(report), encoding="utf-8")
        if self.args.format == "csv" and csv_columns:
            (self.out / f"{stem}.{self.command}.csv").write_text(_csv_text(csv_columns), encoding="utf-8")
        return path


def _batch(args, run, inputs, job):
    """Run ``job(path) -> (stem, kind, payload, csv)`` over inputs; collect exit status."""
    workers = max(1, min(args.workers or len(inputs), len(inputs), os.cpu_count() or 1))

    def guarded(path):
        try:
            return path, job(path), None
        except ValidationError as exc:
            return path, None, (EXIT_VALIDATION, exc)
        except FitError as exc:
            return path, None, (EXIT_FIT, exc)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(guarded, inputs))
    else:
        results = [guarded(p) for p in inputs]
    status = EXIT_OK
    for path, res, err in results:
        if err is not None:
            code, exc = err
            print(f"qchar: {path}: {type(exc).__name__}: {exc}", file=sys.stderr)
            status = max(status, code)
            continue
        stem, kind, payload, columns = res
        run.write(stem, kind, payload, [path], columns)
    return status


# ---------------------------------------------------------------------------
# commands


def cmd_resonator_fit(args, run):
    _reject_tolerances(args)

    def job(path):
        sweep = _load_dataset(path, ("sweep",))
        fit, warns = _with_warnings(resonator.fit_resonator, sweep)
        payload = fit.to_payload()
        payload["warnings"] = warns
        model = resonator.eval_s21(fit.params, sweep.freq_hz)
        cols = {"freq_hz": sweep.freq_hz, "s21_re": sweep.s21.real, "s21_im": sweep.s21.imag,
                "model_re": model.real, "model_im": model.imag}
        return _stem(path), "resonator_fit", payload, cols

    return _batch(args, run, args.inputs, job)


def _loss_payload(fit):
    return {"params": {k: v for k, v in fit.params.__dict__.items()}, "sigmas": fit.sigmas,
            "chi2_red": fit.chi2_red, "n_points": fit.n_points, "fixed": list(fit.fixed),
            "qp_temperatures": fit.qp_temperatures}


def cmd_loss_fit(args, run):
    _reject_tolerances(args)

    def job(path):
        grid = _load_dataset(path, ("loss_grid",))
        fit, warns = _with_warnings(loss.fit_loss_model, grid)
        payload = _loss_payload(fit)
        payload["warnings"] = warns
        model = loss.q_total(fit.params, grid.nbar, grid.temperature_k, grid.freq_hz)
        cols = {"temperature_k": grid.temperature_k, "nbar": grid.nbar, "q_int": grid.q_int,
                "q_model": np.atleast_1d(model)}
        return _stem(path), "loss_fit", payload, cols

    return _batch(args, run, args.inputs, job)


def cmd_spr_fit(args, run):
    _reject_tolerances(args)

    def job(path):
        pts = _load_dataset(path, ("spr_set",))
        fit, warns = _with_warnings(loss.fit_surface_loss, pts)
        payload = dict(fit.__dict__, warnings=warns)
        cols = {"p_ms": [p.p_ms for p in pts.points], "q_tls0": [p.q_tls0 for p in pts.points]}
        return _stem(path), "surface_fit", payload, cols

    return _batch(args, run, args.inputs, job)


def cmd_decay_fit(args, run):
    _reject_tolerances(args)

    def job(path):
        trace = _load_dataset(path, ("decay",))
        fit, warns = _with_warnings(coherence.fit_decay, trace)
        payload = dict(fit.__dict__, trace_kind=trace.kind, warnings=warns)
        if args.freq_hz is not None:
            payload["quality_factor"] = coherence.quality_factor(args.freq_hz, fit.tau_s)
        model = fit.amp * np.exp(-trace.delay_s / fit.tau_s) + fit.offset
        cols = {"delay_s": trace.delay_s, "population": trace.population, "model": model}
        return _stem(path), "decay_fit", payload, cols

    return _batch(args, run, args.inputs, job)


def cmd_cohort_report(args, run):
    _reject_tolerances(args)

    def job(path):
        cohort = _load_dataset(path, ("qubit_record",))
        rep = coherence.aggregate_table(cohort)
        payload = rep.to_payload()
        payload["table"] = coherence.render_table(rep)
        cols = {k: [getattr(r, k) if getattr(r, k) is not None else "" for r in rep.rows]
                for k in ("label", "freq_hz", "t1_avg_s", "t1_max_s", "q_avg", "q_max", "t2e_avg_s", "t2e_max_s")}
        return _stem(path), "cohort_report", payload, cols

    status = _batch(args, run, args.inputs, job)
    if status == EXIT_OK and not args.quiet:
        for path in args.inputs:
            rep = coherence.aggregate_table(_load_dataset(path, ("qubit_record",)))
            sys.stdout.write(coherence.render_table(rep))
    return status


def _cpmg_estimate(cset, args, refine_tol=1e-4):
    t1 = args.t1_s if getattr(args, "t1_s", None) is not None else cset.t1_s
    gp = args.gamma_p if getattr(args, "gamma_p", None) is not None else cset.gamma_p
    return noise.reconstruct_psd(cset, t1, 0.0 if gp is None else gp, quadrature=args.quadrature,
                                 noise_floor=args.noise_floor, workers=args.workers or 1,
                                 refine_tol=refine_tol)


def cmd_cpmg_reconstruct(args, run):
    tol = _reject_tolerances(args, ("refine_tol",))

    def job(path):
        cset = _load_dataset(path, ("cpmg_set",))
        est = _cpmg_estimate(cset, args, tol.get("refine_tol", 1e-4))
        cols = {"omega_rad_s": est.omega_rad_s, "f_hz": est.omega_rad_s / (2 * math.pi),
                "s_value": est.s_value}
        return _stem(path), "psd", est.to_payload(), cols

    return _batch(args, run, args.inputs, job)


def cmd_noise_fit_thermal(args, run):
    _reject_tolerances(args)
    chi2 = 2 * math.pi * args.chi2_hz

    def job(path):
        raw = _load_json(path)
        if isinstance(raw, dict) and raw.get("kind") == "psd":
            pl = raw["payload"]
            spectrum = (np.asarray(pl["omega_rad_s"], float), np.asarray(pl["s_value"], float))
        else:
            cset = datasets.validate_dataset(raw)
            if not isinstance(cset, datasets.CpmgSet):
                raise SchemaError(f"{path}: expected psd report or cpmg_set dataset")
            est = _cpmg_estimate(cset, args)
            spectrum = (est.omega_rad_s, est.s_value)
        w, s = spectrum
        band = np.ones(len(w), bool)
        if args.f_min_hz is not None:
            band &= w >= 2 * math.pi * args.f_min_hz
        if args.f_max_hz is not None:
            band &= w <= 2 * math.pi * args.f_max_hz
        fit, warns = _with_warnings(noise.fit_thermal_photon, (w[band], s[band]), chi2, args.f_res_hz)
        payload = dict(fit.to_payload(), chi2_rad_s=chi2, f_res_hz=args.f_res_hz, warnings=warns)
        model = noise.thermal_psd(w[band], fit.a_num, fit.kappa_rad_s, fit.b_floor)
        cols = {"omega_rad_s": w[band], "s_value": s[band], "model": model}
        return _stem(path), "thermal_fit", payload, cols

    return _batch(args, run, args.inputs, job)


def cmd_t2_scaling(args, run):
    _reject_tolerances(args)

    def job(path):
        cset = _load_dataset(path, ("cpmg_set",))
        pairs = noise.t2_per_curve(cset)
        n = [p[0] for p in pairs]
        t2 = [p[1] for p in pairs]
        fit = noise.fit_t2_scaling(n, t2, args.n_min, args.n_max)
        payload = {"exponent": fit.exponent, "prefactor_s": fit.prefactor_s,
                   "exponent_sigma": fit.exponent_sigma, "n_used": list(fit.n_used),
                   "n_pulses": n, "t2_s": t2}
        return _stem(path), "t2_scaling", payload, {"n_pulses": n, "t2_s": t2}

    return _batch(args, run, args.inputs, job)


def cmd_rb_fit(args, run):
    _reject_tolerances(args)

    def job(path):
        data = _load_dataset(path, ("rb",))
        fit = rb.rb_fit(data)
        payload = fit.to_payload(args.pulses_per_clifford)
        model = fit.a * fit.p ** data.lengths.astype(float) + fit.b
        cols = {"length": data.lengths, "survival": data.survival, "model": model}
        return _stem(path), "rb_fit", payload, cols

    return _batch(args, run, args.inputs, job)


def cmd_rb_limit(args, run):
    _reject_tolerances(args)
    if not (args.t_g_s > 0 and args.t1_s > 0):
        raise ValidationError("--t-g-s and --t1-s must be positive")
    payload = rb.limit_report(args.t_g_s, args.t1_s, args.pulses_per_clifford)
    run.write(args.name, "limit_report", payload, [])
    return EXIT_OK


def _pulse_from_args(args):
    cfg = qutrit.QutritConfig(_anharm(args))
    if args.omega0 is not None:
        om = args.omega0
    elif args.calibrate:
        om = calibration.calibrate_pi2(args.t_g_s, cfg, args.beta, args.samples)
    else:
        om = pulses.omega0_for_area(args.t_g_s, args.area)
    return pulses.gaussian_drag(args.t_g_s, om, args.beta, cfg.anharm_rad_s, args.samples), om, cfg


def _anharm(args):
    return -math.inf if args.two_level else 2 * math.pi * args.anharm_mhz * 1e6


def cmd_pulse_synth(args, run):
    _reject_tolerances(args)
    pulse, om, _ = _pulse_from_args(args)
    payload = dict(pulse.to_payload(), omega0=om, beta=args.beta)
    cols = {"t_s": pulse.times, "re": pulse.envelope.real, "im": pulse.envelope.imag}
    run.write(args.name, "pulse_shape", payload, [], cols)
    return EXIT_OK


def cmd_pulse_simulate(args, run):
    _reject_tolerances(args)
    if args.input:
        raw = _load_json(args.input)
        pl = raw.get("payload", raw)
        try:
            env = np.asarray(pl["re"], float) + 1j * np.asarray(pl["im"], float)
            pulse = pulses.PulseShape(float(pl["dt_s"]), env, float(pl["t_g_s"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"{args.input}: not a pulse_shape report ({exc})") from None
        cfg = qutrit.QutritConfig(_anharm(args), 2 * math.pi * args.detuning_mhz * 1e6)
        stem = _stem(args.input)
    else:
        pulse, _, cfg0 = _pulse_from_args(args)
        cfg = qutrit.QutritConfig(cfg0.anharm_rad_s, 2 * math.pi * args.detuning_mhz * 1e6)
        stem = args.name
    res = qutrit.simulate_qutrit(pulse, cfg)
    payload = {"populations": res.populations.tolist(),
               "unitary_re": res.unitary.real.tolist(), "unitary_im": res.unitary.imag.tolist(),
               "unitarity_error": qutrit.unitarity_error(res.unitary), "leakage": float(res.populations[2])}
    run.write(stem, "qutrit_result", payload, [args.input] if args.input else [])
    return EXIT_OK


def _parse_grid(text):
    parts = text.split(":")
    try:
        if len(parts) == 3:
            return np.linspace(float(parts[0]), float(parts[1]), int(parts[2]))
        return np.array([float(x) for x in text.split(",")])
    except ValueError:
        raise ValidationError(f"grid must be start:stop:n or a comma list, got {text!r}") from None


def cmd_calibrate_sweep(args, run):
    _reject_tolerances(args)
    cfg = qutrit.QutritConfig(_anharm(args))
    om = calibration.calibrate_pi2(args.t_g_s, cfg, args.beta, args.samples)
    spec = calibration.PulseSpec(args.t_g_s, om, args.beta, args.samples)
    grid = _parse_grid(args.grid)
    if args.kind == "frequency":
        grid = grid * 2 * math.pi * 1e6  # MHz on the command line
    try:
        reps = [int(x) for x in args.n_reps.split(",")]
    except ValueError:
        raise ValidationError("--n-reps must be a comma list of integers") from None
    cmap = calibration.calibration_sweep(args.kind, reps, grid, spec, cfg, workers=args.workers or 1)
    payload = dict(cmap.to_payload(), omega0=om, optimum=cmap.optimum().tolist())
    cols = {"sweep": np.repeat(cmap.sweep[None, :], len(reps), 0).ravel(),
            "n_reps": np.repeat(cmap.n_reps, len(cmap.sweep)),
            "population": cmap.population.ravel()}
    run.write(args.name, "calibration_map", payload, [], cols)
    return EXIT_OK


def cmd_xps_fit(args, run):
    _reject_tolerances(args)
    cfg = xps.StrohmeierConfig(args.lambda_m_nm, args.lambda_ox_nm, math.radians(args.theta_deg), args.n_ratio)

    def job(path):
        spec = _load_dataset(path, ("xps",))
        fit = xps.fit_si2p(spec, window=(args.lo_ev, args.hi_ev))
        payload = fit.to_payload()
        total = fit.metal.area + fit.oxide_area
        payload["fractions"] = {c.state: c.area / total for c in fit.components}
        d, warns = _with_warnings(xps.oxide_thickness, fit.metal.area, fit.oxide_area, cfg, args.orientation)
        payload.update(thickness_nm=d, orientation=args.orientation, warnings=warns,
                       strohmeier={"lambda_m_nm": cfg.lambda_m_nm, "lambda_ox_nm": cfg.lambda_ox_nm,
                                   "theta_rad": cfg.theta_rad, "n_ratio": cfg.n_ratio})
        cols = {"binding_ev": fit.binding_ev, "signal": fit.signal, "model": fit.model(),
                "background": fit.background}
        return _stem(path), "xps_fit", payload, cols

    return _batch(args, run, args.inputs, job)


def cmd_synth(args, run):
    _reject_tolerances(args)
    status = EXIT_OK
    for path in args.inputs:
        raw = _load_json(path)
        if args.seed is not None:
            raw = dict(raw, seed=args.seed)
        try:
            doc, side = synth_mod.synth(raw)
        except ValidationError as exc:
            print(f"qchar: {path}: {type(exc).__name__}: {exc}", file=sys.stderr)
            status = max(status, EXIT_VALIDATION)
            continue
        run.out.mkdir(parents=True, exist_ok=True)
        stem = _stem(path)
        (run.out / f"{stem}.data.json").write_text(datasets.dumps(doc), encoding="utf-8")
        (run.out / f"{stem}.data{synth_mod.SIDECAR_SUFFIX}").write_text(datasets.dumps(side), encoding="utf-8")
        if args.format == "csv":
            (run.out / f"{stem}.data.csv").write_text(datasets.to_csv(doc), encoding="utf-8")
    return status


def cmd_score(args, run):
    tol = _parse_tolerances(args.tolerance)
    report = _load_json(args.report)
    side = _load_json(args.sidecar)
    result = synth_mod.score_roundtrip(report, side, tol)
    run.write(_stem(args.report), "score", result.to_payload(), [args.report, args.sidecar])
    for r in result.rows:
        mark = "PASS" if r.passed else "FAIL"
        print(f"{mark} {r.name}: truth={r.truth:.6g} fit={r.fitted:.6g} {r.measure}-err={r.error:.3g} "
              f"tol={r.tolerance:.3g}")
    return EXIT_OK if result.passed else EXIT_SCORE_FAIL


# ---------------------------------------------------------------------------
# parser


def _common(p):
    p.add_argument("--out", default=os.environ.get("QCHAR_OUT", "."), help="output directory")
    p.add_argument("--format", choices=("json", "csv"), default="json",
                   help="csv additionally writes plot data next to the JSON report")
    p.add_argument("--workers", type=int, default=None, help="parallel workers over inputs")
    p.add_argument("--seed", type=int, default=None, help="RNG seed (synth)")
    p.add_argument("--tolerance", action="append", metavar="KEY=VAL", help="tolerance override")


def _pulse_args(p, with_area=True):
    p.add_argument("--t-g-s", type=float, default=24e-9, help="gate length (s)")
    p.add_argument("--beta", type=float, default=0.0, help="DRAG coefficient")
    p.add_argument("--anharm-mhz", type=float, default=-200.0, help="anharmonicity alpha/2pi (MHz)")
    p.add_argument("--two-level", action="store_true", help="drop the second excited level")
    p.add_argument("--samples", type=int, default=pulses.DEFAULT_SAMPLES)
    if with_area:
        p.add_argument("--omega0", type=float, default=None, help="peak parameter Omega0 (rad/s)")
        p.add_argument("--area", type=float, default=math.pi / 2, help="rotation area (rad)")
        p.add_argument("--calibrate", action="store_true",
                       help="solve Omega0 numerically for P1 = 0.5 in the simulator")
    p.add_argument("--name", default="pulse", help="output stem")


def build_parser():
    top = _Parser(prog="qchar", description="Characterization-data fitting toolkit")
    top.add_argument("--version", action="version", version=f"qchar {__version__}")
    groups = top.add_subparsers(dest="group", required=True, parser_class=_Parser)

    def sub(group, name, func, help_text):
        if group not in _GROUPS:
            g = groups.add_parser(group, help=f"{group} commands")
            _GROUPS[group] = g.add_subparsers(dest="action", required=True, parser_class=_Parser)
        p = _GROUPS[group].add_parser(name, help=help_text)
        _common(p)
        p.set_defaults(func=func, command=f"{group}-{name}")
        return p

    _GROUPS.clear()
    p = sub("resonator", "fit", cmd_resonator_fit, "fit notch-type S21 sweeps")
    p.add_argument("inputs", nargs="+")
    p = sub("loss", "fit", cmd_loss_fit, "fit the TLS/QP loss model to a (T, nbar) grid")
    p.add_argument("inputs", nargs="+")
    p = sub("spr", "fit", cmd_spr_fit, "surface-loss tangent from SPR points")
    p.add_argument("inputs", nargs="+")
    p = sub("decay", "fit", cmd_decay_fit, "exponential decay time of T1/echo traces")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--freq-hz", type=float, default=None, help="qubit frequency for Q = 2 pi f T1")
    p = sub("cohort", "report", cmd_cohort_report, "per-qubit and cohort statistics")
    p.add_argument("inputs", nargs="+", help="qubit_record files; @table1 / @table2 for bundled tables")
    p.add_argument("--quiet", action="store_true")
    for name, func in (("reconstruct", cmd_cpmg_reconstruct),):
        p = sub("cpmg", name, func, "noise spectrum from CPMG curves")
        p.add_argument("inputs", nargs="+")
        _cpmg_flags(p)
    p = sub("noise", "fit-thermal", cmd_noise_fit_thermal, "thermal-photon Lorentzian fit")
    p.add_argument("inputs", nargs="+", help="psd reports or cpmg_set datasets")
    p.add_argument("--chi2-hz", type=float, required=True, help="Stark shift per photon 2chi/2pi (Hz)")
    p.add_argument("--f-res-hz", type=float, required=True, help="readout resonator frequency (Hz)")
    p.add_argument("--f-min-hz", type=float, default=None)
    p.add_argument("--f-max-hz", type=float, default=None)
    _cpmg_flags(p)
    p = sub("t2", "scaling", cmd_t2_scaling, "power-law scaling of CPMG T2 with N")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--n-min", type=float, default=None)
    p.add_argument("--n-max", type=float, default=None)
    p = sub("rb", "fit", cmd_rb_fit, "randomized-benchmarking decay")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--pulses-per-clifford", type=float, default=None)
    p = sub("rb", "limit", cmd_rb_limit, "T1-limited gate infidelity")
    p.add_argument("--t-g-s", type=float, required=True)
    p.add_argument("--t1-s", type=float, required=True)
    p.add_argument("--pulses-per-clifford", type=float, default=None)
    p.add_argument("--name", default="t1_limit")
    p = sub("pulse", "synth", cmd_pulse_synth, "Gaussian/DRAG envelope")
    _pulse_args(p)
    p = sub("pulse", "simulate", cmd_pulse_simulate, "three-level propagation of one pulse")
    p.add_argument("input", nargs="?", default=None, help="pulse_shape report (optional)")
    _pulse_args(p)
    p.add_argument("--detuning-mhz", type=float, default=0.0)
    p = sub("calibrate", "sweep", cmd_calibrate_sweep, "amplitude/frequency/DRAG calibration map")
    p.add_argument("--kind", choices=calibration.KINDS, required=True)
    p.add_argument("--n-reps", default="1,3,5,7,9,11")
    p.add_argument("--grid", required=True, help="start:stop:n or comma list (frequency in MHz)")
    _pulse_args(p, with_area=False)
    p.set_defaults(name="calibration")
    p = sub("xps", "fit", cmd_xps_fit, "Si2p doublet fit and oxide thickness")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--lambda-m-nm", type=float, required=True)
    p.add_argument("--lambda-ox-nm", type=float, required=True)
    p.add_argument("--theta-deg", type=float, default=90.0)
    p.add_argument("--n-ratio", type=float, default=2.139)
    p.add_argument("--orientation", choices=("printed", "standard"), default="printed")
    p.add_argument("--lo-ev", type=float, default=xps.WINDOW_EV[0])
    p.add_argument("--hi-ev", type=float, default=xps.WINDOW_EV[1])

    s = groups.add_parser("synth", help="synthesize a dataset and its ground-truth sidecar")
    _common(s)
    s.add_argument("inputs", nargs="+", help="synth spec JSON files")
    s.set_defaults(func=cmd_synth, command="synth")
    s = groups.add_parser("score", help="score a fit report against a ground-truth sidecar")
    _common(s)
    s.add_argument("report")
    s.add_argument("sidecar")
    s.set_defaults(func=cmd_score, command="score")
    return top


_GROUPS = {}


def _cpmg_flags(p):
    p.add_argument("--quadrature", choices=("delta", "full"), default="delta")
    p.add_argument("--t1-s", type=float, default=None, help="override the dataset T1")
    p.add_argument("--gamma-p", type=float, default=None, help="override the dataset per-pulse decay")
    p.add_argument("--noise-floor", type=float, default=0.0, help="drop points with |ln P'| below this")


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_VALIDATION
    if args.workers is not None and args.workers < 1:
        print("qchar: error: --workers must be >= 1", file=sys.stderr)
        return EXIT_VALIDATION
    run = _Run(args, args.command)
    try:
        return args.func(args, run)
    except ValidationError as exc:
        print(f"qchar: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except FitError as exc:
        print(f"qchar: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FIT
    except (ValueError, QcharError) as exc:
        print(f"qchar: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
