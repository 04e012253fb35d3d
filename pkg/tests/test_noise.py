import math
import warnings

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import load_spec
from qchar import datasets, noise, synth
from qchar.datasets import CpmgCurve, DecayTrace
from qchar.errors import AllPointsDroppedError, BandWarning, InsufficientNError


def g_direct(n, t, t_pi, w, dps=50):
    """Filter function from the explicit pulse sum in extended precision."""
    with mp.workdps(dps):
        n, t, t_pi, w = int(n), mp.mpf(t), mp.mpf(t_pi), mp.mpf(w)
        s = 1 + (-1) ** (1 + n) * mp.exp(1j * w * t)
        for j in range(1, n + 1):
            s += 2 * (-1) ** j * mp.exp(1j * w * (j - mp.mpf(1) / 2) / n * t) * mp.cos(w * t_pi / 2)
        return float(abs(s) ** 2 / (w * t) ** 2)


def test_hahn_value():
    assert noise.filter_g(1, 1.0, 0.0, 2 * math.pi) == pytest.approx(4 / math.pi ** 2, rel=1e-14)


def test_hahn_closed_form():
    x = np.geomspace(1e-2, 200, 300)
    np.testing.assert_allclose(noise.filter_gx(1, x), 16 * np.sin(x / 4) ** 4 / x ** 2, rtol=1e-11)


def test_low_frequency_limit():
    assert abs(noise.filter_g(1, 1e-3, 0.0, 1e-3)) < 1e-9
    assert noise.filter_gx(3, 0.0) == 0.0


# mpmath direct-sum values at 50 digits
@pytest.mark.parametrize("n, t, t_pi, w, ref", [
    (4, 1e-3, 80e-9, math.pi * 4 / 1e-3, 0.4052846321693597099671477),
    (16, 2e-4, 80e-9, 1.23e5, 0.00007010166267629618958517652),
    (7, 1e-5, 0.0, 3.3e2, 2.834748765154795479596415e-10),
])
def test_filter_frozen_oracle(n, t, t_pi, w, ref):
    assert noise.filter_g(n, t, t_pi, w) == pytest.approx(ref, rel=1e-10)


@settings(max_examples=60, deadline=None)
@given(n=st.integers(1, 40), x=st.floats(1e-2, 500.0), r=st.floats(0.0, 0.004))
def test_filter_against_direct_sum(n, x, r):
    t = 1.0
    ref = g_direct(n, t, 2 * r * t, x / t)
    got = noise.filter_gx(n, x, r)
    assert got == pytest.approx(ref, rel=1e-8, abs=1e-14 * max(1.0, n * n))


@settings(max_examples=200, deadline=None)
@given(n=st.integers(1, 300), x=st.floats(0.0, 5e3), r=st.floats(0.0, 0.01))
def test_filter_nonnegative(n, x, r):
    assert noise.filter_gx(n, x, r) >= 0.0


@settings(max_examples=100, deadline=None)
@given(n=st.integers(1, 64), x=st.floats(1e-4, 1e3), t=st.floats(1e-7, 1e-1), k=st.integers(-20, 20))
def test_filter_depends_on_product(n, x, t, k):
    # power-of-two rescaling keeps omega * t exact
    w = x / t
    assert noise.filter_g(n, t * 2.0 ** k, 0.0, w / 2.0 ** k) == noise.filter_g(n, t, 0.0, w)
    # otherwise omega * t carries a few ulps; allow for the local slope of g
    g_ref = noise.filter_gx(n, x)
    h = 1e-6 * x
    slope = abs(noise.filter_gx(n, x + h) - noise.filter_gx(n, x - h)) / (2 * h)
    tol = 1e-12 * g_ref + 4 * np.finfo(float).eps * x * slope
    assert abs(noise.filter_g(n, t, 0.0, w) - g_ref) <= tol + 1e-300


@pytest.mark.parametrize("n", [1, 2, 5, 16])
@pytest.mark.parametrize("r", [0.0, 1e-3])
def test_series_branch_joins(n, r):
    x0 = noise.SERIES_MAX_X
    below = noise.filter_gx(n, x0 * (1 - 1e-12), r)
    above = noise.filter_gx(n, x0 * (1 + 1e-12), r)
    assert below == pytest.approx(above, rel=1e-9)
    assert above == pytest.approx(g_direct(n, 1.0, 2 * r, x0, dps=60), rel=1e-9)


def test_forward_without_dephasing():
    t = np.array([1e-6, 1e-4, 1e-3])
    p = noise.forward_population(lambda w: np.zeros_like(w), 8, t, 0.0, 2e-3, 1e-4)
    np.testing.assert_allclose(p, 0.5 + 0.5 * np.exp(-t / 4e-3) * math.exp(-8e-4), rtol=1e-15)
    assert noise.forward_population(lambda w: np.ones_like(w), 8, 0.0, 0.0, 2e-3, 1e-4) == \
        pytest.approx(0.5 + 0.5 * math.exp(-8e-4), rel=1e-15)


def test_flat_spectrum_area_normalization():
    s0, n, t = 40.0, 16, 2e-4
    flat = lambda w: np.full_like(w, s0)
    chi = noise.coherence_integral(flat, n, t)
    assert noise.chi_delta(flat, n, t, quadrature="full") == pytest.approx(chi, rel=0.1)
    # the literal peak-value form sees only the filter maximum
    ratio = noise.filter_area(n) / noise.filter_gx(n, math.pi * n)
    assert noise.chi_delta(flat, n, t) == pytest.approx(chi / ratio, rel=1e-9)


def test_flat_filter_area_oracle():
    # mpmath quadrature of g_1 over [0, 50 pi] at 30 digits
    with mp.workdps(30):
        ref = mp.quad(lambda x: 16 * mp.sin(x / 4) ** 4 / x ** 2, mp.linspace(0, 50 * mp.pi, 51))
    assert noise.filter_area(1) == pytest.approx(float(ref), rel=1e-10)


@settings(max_examples=20, deadline=None)
@given(n=st.sampled_from([1, 4, 16, 64]), frac=st.floats(10.0, 100.0), t=st.floats(1e-5, 1e-3))
def test_delta_approximation_slow_spectrum(n, frac, t):
    # kappa well above the filter peak: S varies slowly across the filter band
    kappa = frac * math.pi * n / t
    psd = lambda w: kappa ** 2 / (kappa ** 2 + w ** 2)
    chi = noise.coherence_integral(psd, n, t)
    assert noise.chi_delta(psd, n, t, quadrature="full") == pytest.approx(chi, rel=0.1)


def test_delta_approximation_harmonic_bias():
    # kappa below the filter peak: odd harmonics see S / k^2, a ~pi^2/8 overestimate
    n, t = 64, 1e-4
    kappa = 0.03 * math.pi * n / t
    psd = lambda w: kappa ** 2 / (kappa ** 2 + w ** 2)
    ratio = noise.chi_delta(psd, n, t, quadrature="full") / noise.coherence_integral(psd, n, t)
    assert 1.15 < ratio < math.pi ** 2 / 8


def test_adaptive_quadrature_narrow_lorentzian():
    n, t = 1, 1e-5
    kappa = 0.01 * math.pi / t
    psd = lambda w: kappa ** 2 / (kappa ** 2 + w ** 2)
    with mp.workdps(30):
        k = mp.mpf(kappa) * mp.mpf(t)
        f = lambda x: k ** 2 / (k ** 2 + x ** 2) * 16 * mp.sin(x / 4) ** 4 / x ** 2
        ref = float(mp.mpf(t) * mp.quad(f, [0, k, 10 * k] + list(mp.linspace(1, 50 * mp.pi, 60))))
    assert noise.coherence_integral(psd, n, t) == pytest.approx(ref, rel=1e-9)


def curves_for(psd, ns, t1=None, gp=0.0, t_pi=0.0, n_t=10):
    out = []
    for n in ns:
        t = np.geomspace(2e-6, 1e-3, n_t) * max(1, n) ** 0.5
        p = noise.forward_population(psd, n, t, t_pi, t1, gp)
        out.append(CpmgCurve(n, t_pi, DecayTrace(t, p, "Cpmg")))
    return out


def test_flat_round_trip_full_mode():
    s0 = 30.0
    flat = lambda w: np.full_like(np.asarray(w, float), s0)
    est = noise.reconstruct_psd(curves_for(flat, [1, 4, 16], t1=3e-3, gp=1e-4), 3e-3, 1e-4,
                                quadrature="full")
    assert len(est.s_value) > 10
    np.testing.assert_allclose(est.s_value, s0, rtol=0.05)


def test_pprime_one_gives_zero():
    c = CpmgCurve(2, 0.0, DecayTrace(np.linspace(1e-6, 1e-5, 6), np.ones(6)))
    est = noise.reconstruct_psd([c], None, 0.0)
    np.testing.assert_array_equal(est.s_value, 0.0)


def test_saturated_points_dropped():
    good = CpmgCurve(2, 0.0, DecayTrace(np.linspace(1e-6, 1e-5, 6), np.full(6, 0.9)))
    dead = CpmgCurve(4, 0.0, DecayTrace(np.linspace(1e-6, 1e-5, 6), np.full(6, 0.5)))
    est = noise.reconstruct_psd([good, dead], None, 0.0)
    assert len(est.s_value) == 6
    assert {why for _, _, why in est.dropped} == {"non-positive P'"}
    with pytest.raises(AllPointsDroppedError):
        noise.reconstruct_psd([dead], None, 0.0)


def test_reconstruct_parallel_identical():
    psd = synth.lorentzian_psd({"kappa_hz": 288e3, "chi2_hz": 300e3, "nbar": 0.005, "b_floor": 50.0})
    curves = curves_for(psd, [1, 8, 64], n_t=6)
    a = noise.reconstruct_psd(curves, None, 0.0, quadrature="full", workers=1)
    b = noise.reconstruct_psd(curves, None, 0.0, quadrature="full", workers=3)
    np.testing.assert_array_equal(a.s_value, b.s_value)
    np.testing.assert_array_equal(a.omega_rad_s, b.omega_rad_s)
    assert np.all(np.diff(a.omega_rad_s) >= 0)


def thermal_data(noise_level=0.0, seed=0, n=200):
    kappa, chi2 = 2 * math.pi * 299e3, 2 * math.pi * 300e3
    a = noise.thermal_numerator(0.005, kappa, chi2)
    w = 2 * math.pi * np.geomspace(1e4, 3e6, n)
    s = noise.thermal_psd(w, a, kappa, 50.0)
    if noise_level:
        s = s * (1 + noise_level * np.random.default_rng(seed).standard_normal(w.size))
    return w, s, chi2


def test_thermal_noiseless_exact():
    w, s, chi2 = thermal_data()
    fit = noise.fit_thermal_photon((w, s), chi2, 6.74e9)
    assert fit.kappa_rad_s == pytest.approx(2 * math.pi * 299e3, rel=1e-9)
    assert fit.nbar == pytest.approx(0.005, rel=1e-9)
    assert fit.b_floor == pytest.approx(50.0, rel=1e-9)


def test_thermal_noisy_round_trip():
    # 10% multiplicative scatter on 200 log-spaced points: sd(kappa)/2pi ~ 3.4 kHz
    ok = 0
    for seed in range(40):
        w, s, chi2 = thermal_data(0.1, seed)
        fit = noise.fit_thermal_photon((w, s), chi2, 6.74e9)
        ok += abs(fit.kappa_rad_s / (2 * math.pi) - 299e3) <= 8e3 and abs(fit.nbar / 0.005 - 1) <= 0.2
    assert ok >= 38


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10 ** 6))
def test_thermal_unit_invariance(seed):
    w, s, chi2 = thermal_data(0.1, seed)
    rad = noise.fit_thermal_photon((w, s), chi2, 6.74e9)
    hz = noise.fit_thermal_photon((w / (2 * math.pi), s), chi2 / (2 * math.pi), 6.74e9, freq_unit="Hz")
    assert hz.nbar == pytest.approx(rad.nbar, rel=1e-9)
    assert hz.kappa_rad_s == pytest.approx(rad.kappa_rad_s, rel=1e-9)


def test_bose_einstein_endpoint():
    # h f / (k ln(1 + 1/n)) evaluated in mpmath with the exact SI constants
    with mp.workdps(30):
        ref = mp.mpf("6.62607015e-34") * mp.mpf("6.74e9") / (mp.mpf("1.380649e-23") * mp.log(1 + 1 / mp.mpf("0.005")))
    t = noise.bose_einstein_temperature(0.005, 6.74e9)
    assert t == pytest.approx(float(ref), rel=1e-13)
    assert abs(t - 0.061) < 1e-3
    assert noise.bose_einstein_temperature(0.0, 6.74e9) == 0.0


def test_thermal_flat_spectrum():
    w = 2 * math.pi * np.geomspace(1e4, 3e6, 30)
    s = np.full(w.size, 50.0) * (1 + 1e-3 * np.random.default_rng(2).standard_normal(w.size))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BandWarning)
        fit = noise.fit_thermal_photon((w, s), 2 * math.pi * 300e3, 6.74e9)
    assert fit.b_floor == pytest.approx(50.0, rel=0.01)
    assert fit.a_num / fit.kappa_rad_s ** 2 < 0.01 * 50.0
    assert fit.nbar < 1e-4
    assert fit.sigmas["kappa_rad_s"] == math.inf or fit.a_num > 0


def test_thermal_band_warning():
    w, s, chi2 = thermal_data()
    keep = w > 2 * math.pi * 250e3
    with pytest.warns(BandWarning):
        noise.fit_thermal_photon((w[keep], s[keep]), chi2, 6.74e9)


def gamma_p_set(gp, t1=None):
    # every curve starts near t = 0 so the zero-time extrapolation is short
    spec = load_spec("cpmg_set")
    spec["ground_truth"] = dict(spec["ground_truth"], gamma_p=gp, t1_s=t1)
    spec["grid"] = {"n_pulses": [1, 2, 4, 8, 16, 32, 64, 128, 256],
                    "delay_s": np.geomspace(2e-7, 2e-4, 12).tolist()}
    doc, _ = synth.synth(spec)
    return datasets.validate_dataset(doc)


def test_gamma_p_round_trip():
    fit = noise.fit_gamma_p(gamma_p_set(1 / 13000, t1=0.5e-3))
    assert fit.gamma_p == pytest.approx(1 / 13000, rel=0.1)


def test_gamma_p_zero():
    fit = noise.fit_gamma_p(gamma_p_set(0.0))
    assert abs(fit.gamma_p) < 3 * fit.gamma_p_sigma + 1e-7


def test_gamma_p_needs_three_n():
    c = CpmgCurve(4, 0.0, DecayTrace(np.linspace(1e-6, 1e-5, 6), np.full(6, 0.9)))
    with pytest.raises(InsufficientNError):
        noise.fit_gamma_p([c])


def test_power_law_exact():
    n = np.array([1, 2, 4, 8, 16, 64, 256])
    fit = noise.fit_t2_scaling(n, 1e-4 * n ** 0.6)
    assert fit.exponent == pytest.approx(0.6, abs=1e-6)
    assert fit.prefactor_s == pytest.approx(1e-4, rel=1e-9)


def test_power_law_segments():
    rng = np.random.default_rng(2024)
    n = np.array([1, 2, 4, 8, 16, 32, 64, 100, 150, 200, 300, 500, 700, 1000])
    t2 = 0.2e-3 * np.maximum(1, (n / 100) ** 0.6) * np.exp(0.03 * rng.standard_normal(n.size))
    plateau = noise.fit_t2_scaling(n, t2, n_max=64)
    rise = noise.fit_t2_scaling(n, t2, n_min=150)
    assert abs(plateau.exponent) < 0.05
    assert rise.exponent == pytest.approx(0.6, abs=0.05)


def test_power_law_needs_four():
    with pytest.raises(InsufficientNError):
        noise.fit_t2_scaling([1, 2, 4], [1.0, 2.0, 3.0])


@settings(max_examples=50)
@given(c=st.floats(1e-6, 1e-2), p=st.floats(-1.0, 2.0))
def test_power_law_property(c, p):
    n = np.array([2, 3, 5, 9, 17, 33])
    fit = noise.fit_t2_scaling(n, c * n.astype(float) ** p)
    assert fit.exponent == pytest.approx(p, abs=1e-9)
