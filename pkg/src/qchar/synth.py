"""Synthetic datasets from known ground truth, and round-trip scoring.

Every generator evaluates the forward model of the owning analysis module on
a grid and applies one of the noise models with a counter-based (Philox)
generator keyed by the spec's seed, so identical specs give byte-identical
documents. The ground truth and the checks a fit report is scored against go
into a separate sidecar document.
"""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import datasets as ds
from . import loss, noise, resonator, xps
from .coherence import lognormal_sigma_for_span
from .errors import KindMismatchError, SpecError

NOISE_MODELS = ("none", "gaussian_additive", "gaussian_multiplicative", "binomial_shots", "lognormal")
SIDECAR_SUFFIX = ".truth.json"


@dataclass(frozen=True)
class SynthSpec:
    kind: str
    ground_truth: dict
    noise: dict = field(default_factory=lambda: {"model": "none", "level": 0.0})
    grid: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in _GENERATORS:
            raise SpecError(f"unknown synth kind {self.kind!r}; expected one of {sorted(_GENERATORS)}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or not 0 <= self.seed < 2 ** 64:
            raise SpecError("seed must be an integer in [0, 2**64)")
        model = self.noise.get("model", "none")
        if model not in NOISE_MODELS:
            raise SpecError(f"unknown noise model {model!r}")
        level = self.noise.get("level", 0.0)
        if not isinstance(level, (int, float)) or level < 0 or not math.isfinite(level):
            raise SpecError("noise level must be a finite nonnegative number")

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise SpecError("synth spec must be a JSON object")
        extra = set(d) - {"kind", "ground_truth", "noise", "grid", "seed"}
        if extra:
            raise SpecError(f"unexpected synth spec fields {sorted(extra)}")
        try:
            return cls(d["kind"], dict(d["ground_truth"]), dict(d.get("noise", {"model": "none"})),
                       dict(d.get("grid", {})), d.get("seed", 0))
        except KeyError as exc:
            raise SpecError(f"synth spec missing {exc}") from None

    def to_dict(self):
        return {"kind": self.kind, "ground_truth": copy.deepcopy(self.ground_truth),
                "noise": dict(self.noise), "grid": copy.deepcopy(self.grid), "seed": self.seed}


def make_rng(seed):
    """Philox counter-based generator keyed by a 64-bit seed."""
    return np.random.Generator(np.random.Philox(key=int(seed)))


def _level(spec):
    return float(spec.noise.get("level", 0.0))


def _model(spec):
    return spec.noise.get("model", "none")


def _need(d, key, what):
    if key not in d:
        raise SpecError(f"{what} needs {key!r}")
    return d[key]


def _axis(grid, name, what):
    if name in grid:
        return np.asarray(grid[name], dtype=float)
    try:
        start, stop, n = grid["start"], grid["stop"], int(grid["n"])
    except KeyError:
        raise SpecError(f"{what} grid needs {name!r} or start/stop/n") from None
    if grid.get("spacing", "linear") == "log":
        return np.geomspace(start, stop, n)
    return np.linspace(start, stop, n)


def apply_noise(values, noise_spec, rng, scale=1.0):
    """Apply an additive, multiplicative or log-normal noise model.

    ``scale`` sets the reference magnitude for additive noise. Complex
    values receive circular noise of total standard deviation ``level*scale``.
    """
    model = noise_spec.get("model", "none")
    level = float(noise_spec.get("level", 0.0))
    v = np.asarray(values)
    if model == "none" or level == 0:
        return v.copy()
    if model == "gaussian_additive":
        if np.iscomplexobj(v):
            z = rng.standard_normal((2,) + v.shape)
            return v + level * scale * (z[0] + 1j * z[1]) / math.sqrt(2)
        return v + level * scale * rng.standard_normal(v.shape)
    if model == "gaussian_multiplicative":
        return v * (1 + level * rng.standard_normal(v.shape))
    if model == "lognormal":
        return v * np.exp(level * rng.standard_normal(v.shape))
    raise SpecError(f"noise model {model!r} does not apply to this kind")


def _check(name, path, truth, **tol):
    out = {"name": name, "path": path, "truth": truth}
    out.update(tol)
    return out


# ---------------------------------------------------------------------------
# generators: each returns (document, truth dict, report_kind, checks)


def _gen_sweep(spec, rng):
    gt = spec.ground_truth
    p = resonator.ResonatorParams(**{k: float(v) for k, v in gt.items()})
    g = spec.grid
    if "freq_hz" in g or "start" in g:
        f = _axis(g, "freq_hz", "sweep")
    else:
        half = 0.5 * float(g.get("span_linewidths", 10)) * p.f0_hz / p.q_l
        f = np.linspace(p.f0_hz - half, p.f0_hz + half, int(g.get("n", 401)))
    z = resonator.eval_s21(p, f)
    z = apply_noise(z, spec.noise, rng, scale=p.amp)
    q_int = resonator.internal_q(p.q_l, p.abs_qc, p.phi_rad)
    truth = dict(gt, q_int=q_int)
    checks = [_check("f0_hz", "params.f0_hz", p.f0_hz, rel=1e-7),
              _check("q_l", "params.q_l", p.q_l, rel=0.01),
              _check("q_int", "q_int", q_int, rel=0.03)]
    return ds.to_document(ds.FrequencySweep(f, z)), truth, "resonator_fit", checks


def _gen_loss(spec, rng):
    gt = spec.ground_truth
    p = loss.LossModelParams(**{k: float(v) for k, v in gt.items()})
    g = spec.grid
    temps = np.asarray(_need(g, "temperature_k", "loss_grid"), dtype=float)
    nbars = np.asarray(_need(g, "nbar", "loss_grid"), dtype=float)
    f = float(_need(g, "freq_hz", "loss_grid"))
    tt, nn = (a.ravel() for a in np.meshgrid(temps, nbars, indexing="ij"))
    q = np.asarray(loss.q_total(p, nn, tt, f), dtype=float)
    qm = apply_noise(q, spec.noise, rng)
    sigma = np.zeros_like(qm)
    grid_ds = ds.LossGrid(tt, nn, qm, sigma, f)
    checks = [_check("q_tls0", "params.q_tls0", p.q_tls0, rel=0.05),
              _check("beta1", "params.beta1", p.beta1, rel=0.10),
              _check("beta2", "params.beta2", p.beta2, rel=0.10)]
    return ds.to_document(grid_ds), dict(gt), "loss_fit", checks


def _gen_decay(spec, rng):
    gt = spec.ground_truth
    tau = float(_need(gt, "tau_s", "decay"))
    amp = float(gt.get("amp", 1.0))
    off = float(gt.get("offset", 0.0))
    t = _axis(spec.grid, "delay_s", "decay")
    y = amp * np.exp(-t / tau) + off
    y = apply_noise(y, spec.noise, rng)
    kind = spec.grid.get("trace_kind", "T1")
    checks = [_check("tau_s", "tau_s", tau, rel=0.05)]
    return ds.to_document(ds.DecayTrace(t, y, kind)), {"tau_s": tau, "amp": amp, "offset": off}, \
        "decay_fit", checks


def lorentzian_psd(psd_truth):
    """Thermal-photon PSD in rad/s from ``kappa_hz``, ``chi2_hz``, ``nbar``, ``b_floor``."""
    kappa = 2 * math.pi * float(psd_truth["kappa_hz"])
    chi2 = 2 * math.pi * float(psd_truth["chi2_hz"])
    a = noise.thermal_numerator(float(psd_truth["nbar"]), kappa, chi2)
    b = float(psd_truth.get("b_floor", 0.0))
    return lambda w: noise.thermal_psd(w, a, kappa, b)


def _cpmg_delays(g, n):
    if "delay_s" in g:
        d = g["delay_s"]
        return np.asarray(d[str(n)] if isinstance(d, dict) else d, dtype=float)
    f = _axis(g, "f_filter_hz", "cpmg_set")
    t = n / (2 * f)
    lo, hi = float(g.get("t_min_s", 0.0)), float(g.get("t_max_s", math.inf))
    return np.unique(t[(t >= lo) & (t <= hi)])


def _gen_cpmg(spec, rng):
    gt = spec.ground_truth
    psd = lorentzian_psd(_need(gt, "psd", "cpmg_set"))
    t_pi = float(gt.get("t_pi_s", 0.0))
    t1 = gt.get("t1_s")
    t1 = None if t1 is None else float(t1)
    gp = float(gt.get("gamma_p", 0.0))
    curves = []
    for n in _need(spec.grid, "n_pulses", "cpmg_set"):
        t = _cpmg_delays(spec.grid, int(n))
        if len(t) == 0:
            continue
        p = np.atleast_1d(noise.forward_population(psd, int(n), t, t_pi, t1, gp))
        p = apply_noise(p, spec.noise, rng)
        curves.append(ds.CpmgCurve(int(n), t_pi, ds.DecayTrace(t, p, "Cpmg")))
    doc = ds.to_document(ds.CpmgSet(tuple(curves), t1, gp))
    truth = copy.deepcopy(gt)
    checks = []
    pt = gt["psd"]
    checks.append(_check("kappa_hz", "kappa_hz", float(pt["kappa_hz"]), abs=8e3))
    checks.append(_check("nbar", "nbar", float(pt["nbar"]), rel=0.2))
    return doc, truth, "thermal_fit", checks


def _gen_rb(spec, rng):
    gt = spec.ground_truth
    g = spec.grid
    lengths = np.asarray(_need(g, "lengths", "rb"), dtype=np.int64)
    n_random = int(g.get("n_random", 1))
    n_shots = int(g.get("n_shots", 1))
    clifford_mode = g.get("mode", "analytic") == "clifford"
    if clifford_mode:
        per_seq = _clifford_survival(g, lengths, n_random, rng)
        truth, checks = copy.deepcopy(gt), []
    else:
        a = float(gt.get("a", 0.5))
        b = float(gt.get("b", 0.5))
        p = float(gt["p"]) if "p" in gt else 1 - 2 * float(_need(gt, "epg", "rb"))
        per_seq = np.broadcast_to(a * p ** lengths.astype(float) + b, (n_random, len(lengths)))
        truth = {"a": a, "b": b, "p": p, "epg": (1 - p) / 2}
        checks = [_check("epg", "epg", (1 - p) / 2, abs=float(g.get("epg_tolerance", 3e-6)))]
    per_seq = np.clip(per_seq, 0.0, 1.0)
    model = _model(spec)
    if model == "binomial_shots":
        frac = rng.binomial(n_shots, per_seq) / n_shots
    elif model == "none":
        frac = np.array(per_seq, dtype=float)
    else:
        frac = np.clip(apply_noise(per_seq, spec.noise, rng), 0.0, 1.0)
    survival = frac.mean(axis=0)
    sigma = frac.std(axis=0, ddof=1) / math.sqrt(n_random) if n_random > 1 else None
    data = ds.RbDataset(lengths, survival, n_random, n_shots, sigma)
    return ds.to_document(data), truth, "rb_fit", checks


def _clifford_survival(g, lengths, n_random, rng):
    from .gates import clifford, calibration
    from .gates.qutrit import QutritConfig

    cfg = QutritConfig(float(g.get("anharm_rad_s", -2 * math.pi * 200e6)))
    t_g = float(g.get("t_g_s", 24e-9))
    beta = float(g.get("beta", 0.0))
    omega0 = g.get("omega0")
    omega0 = calibration.calibrate_pi2(t_g, cfg, beta) if omega0 is None else float(omega0)
    gens = clifford.simulated_generators(calibration.PulseSpec(t_g, omega0, beta), cfg)
    out = np.empty((n_random, len(lengths)))
    for j, m in enumerate(lengths):
        for i in range(n_random):
            out[i, j] = clifford.sequence_survival(clifford.random_sequence(rng, int(m)), gens)
    return out


def _gen_xps(spec, rng):
    gt = spec.ground_truth
    e = _axis(spec.grid, "binding_ev", "xps")
    shift = float(gt.get("shift_ev", 0.0))
    scale = float(gt.get("scale", 1.0))
    comps = _need(gt, "components", "xps")
    sig = np.zeros_like(e)
    areas = {}
    for c in comps:
        state = c["state"]
        if state not in xps.STATES:
            raise SpecError(f"unknown Si2p state {state!r}")
        shape = "lorentzian" if state == "Si0" else "gaussian"
        sig = sig + scale * xps.doublet(e, float(c["position_ev"]) + shift, float(c["width_ev"]),
                                         float(c["area"]), shape)
        areas[state] = areas.get(state, 0.0) + float(c["area"])
    bgt = gt.get("background", {"lo": 0.0, "hi": 0.0})
    lo, hi = xps.WINDOW_EV
    bg = xps.shirley_from_peaks(e, sig, float(bgt["lo"]), float(bgt["hi"]))
    y = sig + bg
    if _model(spec) == "gaussian_additive":
        y = apply_noise(y, spec.noise, rng, scale=float(np.max(sig)) if np.max(sig) > 0 else 1.0)
    elif _model(spec) != "none":
        y = apply_noise(y, spec.noise, rng)
    y = np.clip(y, 0.0, None)
    truth = copy.deepcopy(gt)
    total = sum(areas.values())
    fractions = {k: v / total for k, v in areas.items()} if total > 0 else {}
    truth["fractions"] = fractions
    checks = [_check(f"fraction_{k}", f"fractions.{k}", v, rel=0.05)
              for k, v in sorted(fractions.items()) if v > 0]
    if "strohmeier" in gt:
        cfg = xps.StrohmeierConfig(**gt["strohmeier"])
        i_m = areas.get("Si0", 0.0)
        i_ox = total - i_m
        d = xps.oxide_thickness(i_m, i_ox, cfg, gt.get("orientation", "printed"))
        truth["thickness_nm"] = d
        checks.append(_check("thickness_nm", "thickness_nm", d, abs=0.05))
    return ds.to_document(ds.XpsSpectrum(e, y)), truth, "xps_fit", checks


def _gen_qubits(spec, rng):
    gt = spec.ground_truth
    n = int(spec.grid.get("n_samples", 100))
    labels, freqs, sl, so, st, sv = [], [], [], [], [], []
    spans = []
    for q in _need(gt, "qubits", "qubit_record"):
        labels.append(str(q["label"]))
        freqs.append(float(q["freq_hz"]))
        for obs, key in (("T1", "t1_mean_s"), ("T2E", "t2e_mean_s")):
            if key not in q:
                continue
            span = float(q.get("span", 0.36))
            s = lognormal_sigma_for_span(span) if span > 0 else 0.0
            mu = math.log(float(q[key])) - 0.5 * s * s
            vals = np.exp(mu + s * rng.standard_normal(n))
            sl += [labels[-1]] * n
            so += [obs] * n
            st += list(range(n))
            sv += vals.tolist()
            if obs == "T1":
                spans.append(span)
    doc = {"kind": "qubit_record", "units": {"freq": "Hz", "series_value": "s"},
           "data": {"label": labels, "freq": freqs}}
    if sl:
        doc["data"].update(series_label=sl, series_observable=so, series_time=st, series_value=sv)
    ds.validate_dataset(doc)
    truth = copy.deepcopy(gt)
    checks = []
    if spans:
        truth["mean_t1_span"] = float(np.mean(spans))
        checks.append(_check("mean_t1_span", "mean_t1_span", truth["mean_t1_span"], abs=0.02))
    return doc, truth, "cohort_report", checks


def _gen_spr(spec, rng):
    gt = spec.ground_truth
    tan = float(_need(gt, "tan_delta_s", "spr_set"))
    q_bulk = float(gt.get("q_bulk", math.inf))
    p = _axis(spec.grid, "p_ms", "spr_set")
    inv = p * tan + (0.0 if math.isinf(q_bulk) else 1.0 / q_bulk)
    q = apply_noise(1.0 / inv, spec.noise, rng)
    sigma = float(spec.grid.get("relative_sigma", 0.0)) * q
    data = ds.SprSet(tuple(ds.SprPoint(float(a), float(b), float(c)) for a, b, c in zip(p, q, sigma)))
    checks = [_check("tan_delta_s", "tan_delta_s", tan, abs=float(spec.grid.get("tan_tolerance", 1.8e-4)))]
    if math.isfinite(q_bulk):
        checks.append(_check("bulk_q_lower_bound", "bulk_q_lower_bound", q_bulk, factor=2.0))
    return ds.to_document(data), {"tan_delta_s": tan, "q_bulk": q_bulk}, "surface_fit", checks


_GENERATORS = {
    "sweep": _gen_sweep,
    "loss_grid": _gen_loss,
    "decay": _gen_decay,
    "cpmg_set": _gen_cpmg,
    "rb": _gen_rb,
    "xps": _gen_xps,
    "qubit_record": _gen_qubits,
    "spr_set": _gen_spr,
}


def synth(spec):
    """Generate ``(document, sidecar)`` for a :class:`SynthSpec` (or its dict form)."""
    if isinstance(spec, dict):
        spec = SynthSpec.from_dict(spec)
    rng = make_rng(spec.seed)
    try:
        doc, truth, report_kind, checks = _GENERATORS[spec.kind](spec, rng)
    except (TypeError, ValueError) as exc:
        raise SpecError(f"invalid {spec.kind} spec: {exc}") from None
    sidecar = {"kind": spec.kind, "report_kind": report_kind, "spec": spec.to_dict(),
               "truth": _plain(truth), "checks": _plain(checks)}
    return doc, sidecar


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def sidecar_path(path):
    p = Path(path)
    stem = p.name[:-5] if p.name.endswith(".json") else p.name
    return p.with_name(stem + SIDECAR_SUFFIX)


def write_synth(spec, path):
    """Write the dataset to ``path`` and the ground truth next to it; return both paths."""
    doc, sidecar = synth(spec)
    path = Path(path)
    side = sidecar_path(path)
    path.write_text(ds.dumps(doc), encoding="utf-8")
    side.write_text(ds.dumps(sidecar), encoding="utf-8")
    return path, side


# ---------------------------------------------------------------------------
# scoring


@dataclass(frozen=True)
class ScoreRow:
    name: str
    truth: float
    fitted: float
    error: float
    tolerance: float
    measure: str
    passed: bool


@dataclass(frozen=True)
class ScoreResult:
    rows: tuple
    passed: bool

    def to_payload(self):
        return {"passed": self.passed, "rows": [r.__dict__.copy() for r in self.rows],
                "failed": [r.name for r in self.rows if not r.passed]}


def _lookup(report, path):
    node = report.get("payload", report)
    for part in path.split("."):
        if not isinstance(node, dict) or part not in node:
            raise KindMismatchError(f"report lacks field {path!r}")
        node = node[part]
    return float(node)


def score_roundtrip(report, sidecar, tolerances=None):
    """Compare a fit report against a sidecar's ground truth.

    ``tolerances`` maps check names to replacement tolerance values.
    Relative checks use ``|fit - truth| / |truth|``, absolute checks
    ``|fit - truth|`` and factor checks ``max(fit/truth, truth/fit)``.
    """
    kind = report.get("kind")
    if kind != sidecar.get("report_kind"):
        raise KindMismatchError(f"report kind {kind!r} does not match sidecar {sidecar.get('report_kind')!r}")
    tolerances = dict(tolerances or {})
    unknown = set(tolerances) - {c["name"] for c in sidecar["checks"]}
    if unknown:
        raise KindMismatchError(f"tolerance overrides for unknown checks {sorted(unknown)}")
    rows = []
    for c in sidecar["checks"]:
        truth = float(c["truth"])
        fitted = _lookup(report, c["path"])
        if "rel" in c:
            measure = "rel"
            err = abs(fitted - truth) / abs(truth) if truth != 0 else abs(fitted)
        elif "abs" in c:
            measure = "abs"
            err = abs(fitted - truth)
        else:
            measure = "factor"
            err = max(fitted / truth, truth / fitted) if fitted > 0 and truth > 0 else math.inf
        tol = float(tolerances.get(c["name"], c[measure]))
        ok = bool(err <= tol) if math.isfinite(err) else False
        rows.append(ScoreRow(c["name"], truth, fitted, float(err), tol, measure, ok))
    return ScoreResult(tuple(rows), all(r.passed for r in rows))
