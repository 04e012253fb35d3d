import copy
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from conftest import SPECS, load_spec
from qchar import datasets, resonator, synth
from qchar.errors import KindMismatchError, SpecError


def test_noiseless_sweep_exact():
    spec = load_spec("sweep")
    spec["noise"] = {"model": "none"}
    doc, side = synth.synth(spec)
    sw = datasets.validate_dataset(doc)
    p = resonator.ResonatorParams(**spec["ground_truth"])
    np.testing.assert_array_equal(sw.s21, resonator.eval_s21(p, sw.freq_hz))
    assert side["truth"]["q_int"] == resonator.internal_q(p.q_l, p.abs_qc, p.phi_rad)


def hahn_chi(psd, t):
    # N = 1: g = 16 sin^4(wt/4) / (wt)^2, integrated panel by panel over 50 half-periods
    f = lambda w: float(psd(w)) * 16 * math.sin(w * t / 4) ** 4 / (w * t) ** 2 if w > 0 else 0.0
    edges = np.linspace(0.0, 50 * math.pi / t, 201)
    return t * t * sum(integrate.quad(f, a, b, epsabs=0, epsrel=1e-13, limit=200)[0]
                       for a, b in zip(edges[:-1], edges[1:]))


def test_cpmg_populations_match_quadrature():
    spec = load_spec("cpmg_set")
    spec["grid"] = {"n_pulses": [1], "delay_s": [2e-6, 2e-5, 1e-4]}
    cset = datasets.validate_dataset(synth.synth(spec)[0])
    psd = synth.lorentzian_psd(spec["ground_truth"]["psd"])
    curve = cset.curves[0]
    for t, p in zip(curve.trace.delay_s, curve.trace.population):
        assert p == pytest.approx(0.5 + 0.5 * math.exp(-hahn_chi(psd, t)), abs=1e-8)


def test_rb_binomial_errors():
    spec = load_spec("rb")
    rb = datasets.validate_dataset(synth.synth(spec)[0])
    p = 1 - 2 * spec["ground_truth"]["epg"]
    mean = 0.5 * p ** rb.lengths.astype(float) + 0.5
    theory = np.sqrt(mean * (1 - mean) / rb.n_shots / rb.n_random)
    np.testing.assert_allclose(rb.survival_sigma, theory, rtol=0.2)


@pytest.mark.parametrize("name", sorted(p.stem for p in SPECS.glob("*.json")))
def test_byte_identical(tmp_path, name):
    spec = load_spec(name)
    if name == "cpmg_set":
        spec["grid"]["n_pulses"] = [1, 4]
    a, sa = synth.write_synth(spec, tmp_path / "a.json")
    b, sb = synth.write_synth(copy.deepcopy(spec), tmp_path / "b.json")
    assert a.read_bytes() == b.read_bytes()
    assert sa.read_bytes() == sb.read_bytes()
    assert sa.name == "a.truth.json"


def test_seed_changes_output():
    spec = load_spec("decay")
    a = synth.synth(spec)[0]
    spec["seed"] += 1
    assert datasets.dumps(a) != datasets.dumps(synth.synth(spec)[0])


def test_sidecar_separate_from_document():
    doc, side = synth.synth(load_spec("decay"))
    assert "truth" not in datasets.dumps(doc)
    assert side["report_kind"] == "decay_fit" and side["truth"]["tau_s"] == 1.68e-3


@pytest.mark.parametrize("mutate", [
    lambda s: s.update(kind="laser"),
    lambda s: s.update(seed=-1),
    lambda s: s.update(seed=2 ** 64),
    lambda s: s.update(seed=1.5),
    lambda s: s["noise"].update(model="pink"),
    lambda s: s["noise"].update(level=-0.1),
    lambda s: s.update(colour="red"),
    lambda s: s.pop("ground_truth"),
    lambda s: s["ground_truth"].pop("tau_s"),
])
def test_spec_errors(mutate):
    spec = load_spec("decay")
    mutate(spec)
    with pytest.raises(SpecError):
        synth.synth(spec)


@pytest.mark.parametrize("model", ["gaussian_additive", "gaussian_multiplicative"])
def test_noise_mean_converges(model):
    n = 10_000
    truth = np.array([0.2, 1.0, 3.5])
    rng = synth.make_rng(5)
    draws = synth.apply_noise(np.tile(truth, (n, 1)), {"model": model, "level": 0.1}, rng)
    mean = draws.mean(axis=0)
    se = draws.std(axis=0, ddof=1) / math.sqrt(n)
    assert np.all(np.abs(mean - truth) <= 3 * se)


def test_binomial_mean_converges():
    spec = {"kind": "rb", "seed": 8, "ground_truth": {"a": 0.5, "b": 0.5, "p": 0.99},
            "noise": {"model": "binomial_shots"},
            "grid": {"lengths": [1, 10, 50, 100], "n_random": 10_000, "n_shots": 100}}
    rb = datasets.validate_dataset(synth.synth(spec)[0])
    mean = 0.5 * 0.99 ** rb.lengths.astype(float) + 0.5
    assert np.all(np.abs(rb.survival - mean) <= 3 * rb.survival_sigma)


def test_philox_independent_of_draw_history():
    a = synth.make_rng(2 ** 63 + 5).standard_normal(4)
    b = synth.make_rng(2 ** 63 + 5).standard_normal(4)
    assert np.array_equal(a, b)


# scoring

def decay_pair(tau):
    doc, side = synth.synth(load_spec("decay"))
    report = {"kind": "decay_fit", "payload": {"tau_s": tau}}
    return report, side


def test_score_identical():
    report, side = decay_pair(1.68e-3)
    res = synth.score_roundtrip(report, side)
    assert res.passed and res.rows[0].error == 0.0


def test_score_fails_listing_parameter():
    report, side = decay_pair(1.68e-3 * (1 + 2 * 0.05))
    res = synth.score_roundtrip(report, side)
    assert not res.passed and res.to_payload()["failed"] == ["tau_s"]


def test_score_tolerance_override():
    report, side = decay_pair(1.68e-3 * 1.08)
    assert synth.score_roundtrip(report, side, {"tau_s": 0.1}).passed
    with pytest.raises(KindMismatchError):
        synth.score_roundtrip(report, side, {"amp": 0.1})


def test_score_kind_mismatch():
    report, side = decay_pair(1.68e-3)
    report["kind"] = "rb_fit"
    with pytest.raises(KindMismatchError):
        synth.score_roundtrip(report, side)
    with pytest.raises(KindMismatchError):
        synth.score_roundtrip({"kind": "decay_fit", "payload": {}}, side)


def test_resonator_round_trip_score():
    spec = load_spec("sweep")
    passed = 0
    for seed in range(100):
        spec["seed"] = seed
        doc, side = synth.synth(spec)
        fit = resonator.fit_resonator(datasets.validate_dataset(doc))
        report = {"kind": "resonator_fit", "payload": fit.to_payload()}
        passed += synth.score_roundtrip(report, side).passed
    assert passed >= 95


@pytest.mark.filterwarnings("ignore::qchar.errors.PopulationRangeWarning")
@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2 ** 64 - 1))
def test_any_seed_deterministic(seed):
    spec = load_spec("decay")
    spec["seed"] = seed
    assert datasets.dumps(synth.synth(spec)[0]) == datasets.dumps(synth.synth(spec)[0])
