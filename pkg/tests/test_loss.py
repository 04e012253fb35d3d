import math
import warnings
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import load_spec
from qchar import datasets, loss, synth
from qchar.datasets import LossGrid, SprPoint
from qchar.errors import IdentifiabilityWarning, InsufficientSpanError, NonPhysicalError
from qchar.loss import (LossModelParams, fit_loss_model, fit_surface_loss, q_qp, q_tls,
                        q_total)
from qchar.special import k0

TRUTH = LossModelParams(2e6, 300.0, 1.2, 0.4, 2.0, 7.392, 2e7)
F = 7e9


def grid_from(p, temps, nbars, noise=None, seed=0):
    t, n = np.meshgrid(temps, nbars, indexing="ij")
    t, n = t.ravel(), n.ravel()
    q = np.asarray(q_total(p, n, t, F))
    if noise:
        q = q * (1 + noise * np.random.default_rng(seed).standard_normal(q.size))
    return LossGrid(t, n, q, np.zeros_like(q), F)


SPEC = load_spec("loss_grid")
TEMPS = SPEC["grid"]["temperature_k"]
NBARS = SPEC["grid"]["nbar"]


def rel(a, b):
    return abs(a / b - 1)


def test_q_tls_low_temperature_single_photon():
    p = LossModelParams(1e6, 10.0, 1.2, 0.4, 1.0, 7.0)
    assert rel(q_tls(p, 0.0, 0.013, F), 1e6) < 1e-5


def test_q_tls_power_slope():
    p = LossModelParams(1e6, 10.0, 1.2, 0.4, 1.0, 7.0)
    n = np.array([1e6, 1e9])
    slope = np.diff(np.log(q_tls(p, n, 0.02, F))) / np.diff(np.log(n))
    assert abs(slope[0] - p.beta2 / 2) < 0.01


def test_q_tls_frozen_oracle():
    # mpmath closed form at 40 digits
    p = LossModelParams(1e7, 10.0, 1.2, 0.4, 1.0, 7.0)
    assert rel(q_tls(p, 100.0, 0.05, F), 49024865.00698161678) < 1e-13


def test_q_qp_frozen_oracle():
    p = LossModelParams(1e6, 10.0, 1.2, 0.4, 1e5, 2.2)
    assert rel(q_qp(p, 1.0, F), 2784710.1528525631821) < 1e-12


def test_k0_at_one():
    assert abs(k0(1.0) - 0.42102443824070833334) < 1e-15


@pytest.mark.parametrize("t, expected", [(0.02, 2091848.6004135923096), (0.5, 3398824.7588777672772)])
def test_q_total_frozen_oracle(t, expected):
    assert rel(q_total(TRUTH, 1.0, t, F), expected) < 1e-12


def test_q_qp_frozen_out():
    p = replace(TRUTH, delta0_k=50.0)
    assert q_qp(p, 1e-3, F) == loss.QP_SENTINEL
    assert q_total(p, 1.0, 1e-3, F) == pytest.approx(1 / (1 / q_tls(p, 1.0, 1e-3, F) + 1 / p.q_other),
                                                      rel=1e-15)


def test_q_total_equal_channels():
    p = LossModelParams(3e6, 1e300, 1.2, 0.4, 1.0, 1.0, 3e6)
    x = 0.5 * loss.H_OVER_KB * F / 0.05
    p = replace(p, q_tls0=3e6 * math.tanh(x))
    a_qp = 3e6 / math.exp(p.delta0_k / 0.05 - float(loss.log_sinh_k0(x)))
    p = replace(p, a_qp=a_qp)
    assert q_total(p, 0.0, 0.05, F) == pytest.approx(1e6, rel=1e-12)


def test_q_other_disabled():
    p = replace(TRUTH, q_other=math.inf)
    a, b = q_tls(p, 1.0, 0.3, F), q_qp(p, 0.3, F)
    assert q_total(p, 1.0, 0.3, F) == pytest.approx(a * b / (a + b), rel=1e-14)


def test_params_validated():
    with pytest.raises(NonPhysicalError):
        LossModelParams(1e6, 1.0, 4.5, 0.4, 1.0, 7.0)
    with pytest.raises(NonPhysicalError):
        LossModelParams(-1e6, 1.0, 1.0, 0.4, 1.0, 7.0)


@settings(max_examples=100, deadline=None)
@given(nbar=st.floats(0, 1e7), t=st.floats(5e-3, 1.5), f=st.floats(3e9, 9e9))
def test_reciprocal_sum_exact(nbar, t, f):
    inv = 1 / np.asarray(q_tls(TRUTH, nbar, t, f)) + np.exp(-np.asarray(loss.log_q_qp(TRUTH, t, f))) \
        + 1 / TRUTH.q_other
    assert 1 / q_total(TRUTH, nbar, t, f) == pytest.approx(float(inv), rel=4e-16)


def test_zero_photon_limit_from_below():
    p = replace(TRUTH, q_tls0=1e6)
    temps = np.geomspace(1e-3, 0.1, 30)[::-1]
    vals = np.array([q_tls(p, 0.0, t, F) for t in temps])
    assert np.all(np.diff(vals) <= 0) and vals[0] > vals[-1]  # nonincreasing toward q_tls0 as T falls
    assert rel(q_tls(p, 0.0, 1e-3, F), p.q_tls0) < 1e-4


def test_noiseless_round_trip():
    with warnings.catch_warnings():
        warnings.simplefilter("error", IdentifiabilityWarning)
        fit = fit_loss_model(grid_from(TRUTH, TEMPS, NBARS))
    for name in loss._NAMES:
        assert rel(getattr(fit.params, name), getattr(TRUTH, name)) < 1e-6, name
    assert fit.fixed == ()


def test_cold_grid_warns():
    grid = grid_from(TRUTH, np.geomspace(0.012, 0.09, 5), NBARS, noise=0.02, seed=3)
    with pytest.warns(IdentifiabilityWarning):
        fit = fit_loss_model(grid)
    assert fit.qp_temperatures == 0
    assert "a_qp" in fit.fixed and "delta0_k" in fit.fixed


def test_synth_grid_staged_fit():
    doc, side = synth.synth(SPEC)
    with pytest.warns(IdentifiabilityWarning):
        fit = fit_loss_model(datasets.validate_dataset(doc))
    assert fit.fixed == ("delta0_k",)
    assert rel(fit.params.q_tls0, TRUTH.q_tls0) < 0.05
    assert rel(fit.params.beta1, TRUTH.beta1) < 0.1 and rel(fit.params.beta2, TRUTH.beta2) < 0.1
    assert fit.sigmas["delta0_k"] == 0.0


@settings(max_examples=6, deadline=None)
@given(c=st.floats(1e-3, 1e3), seed=st.integers(0, 50))
def test_scale_consistency(c, seed):
    g = grid_from(TRUTH, TEMPS, NBARS, noise=0.02, seed=seed)
    scaled = LossGrid(g.temperature_k, g.nbar, c * g.q_int, g.q_int_sigma, F)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IdentifiabilityWarning)
        a = fit_loss_model(g)
        b = fit_loss_model(scaled, init=replace(loss.default_init(g), q_tls0=c * loss.default_init(g).q_tls0,
                                                a_qp=c * loss.default_init(g).a_qp,
                                                q_other=c * loss.default_init(g).q_other))
    assert a.fixed == b.fixed
    for name in ("q_tls0", "a_qp", "q_other"):
        assert rel(getattr(b.params, name), c * getattr(a.params, name)) < 1e-6, name
    for name in ("d_sat", "beta1", "beta2", "delta0_k"):
        assert rel(getattr(b.params, name), getattr(a.params, name)) < 1e-6, name


def test_default_init_scale_equivariant():
    g = grid_from(TRUTH, TEMPS, NBARS)
    a = loss.default_init(g)
    b = loss.default_init(LossGrid(g.temperature_k, g.nbar, 10 * g.q_int, g.q_int_sigma, F))
    assert rel(b.q_tls0, 10 * a.q_tls0) < 1e-14 and rel(b.a_qp, 10 * a.a_qp) < 1e-12
    assert a.delta0_k == pytest.approx(1.76 * 4.2)


def test_surface_exact_line():
    pts = [SprPoint(p, 1 / (p * 1e-3)) for p in (1e-4, 3e-4, 1e-3)]
    fit = fit_surface_loss(pts)
    assert fit.tan_delta_s == pytest.approx(1e-3, rel=1e-12)
    assert fit.residual_sigma == pytest.approx(0.0, abs=1e-18)


def test_surface_span_required():
    with pytest.raises(InsufficientSpanError):
        fit_surface_loss([SprPoint(p, 1e6) for p in (1e-4, 1.5e-4, 2e-4)])
    with pytest.raises(InsufficientSpanError):
        fit_surface_loss([SprPoint(1e-4, 1e6), SprPoint(1e-3, 1e5)])


def test_surface_weighting_fallback():
    rng = np.random.default_rng(4)
    p = np.geomspace(1e-4, 1e-3, 8)
    q = 1 / (p * 1.1e-3) * np.exp(0.15 * rng.standard_normal(8))
    unweighted = fit_surface_loss([SprPoint(a, b) for a, b in zip(p, q)])
    # equal relative sigmas: weights ~ 1/y^2
    weighted = fit_surface_loss([SprPoint(a, b, 0.15 * b) for a, b in zip(p, q)])
    x, y = p, 1 / q
    w = 1 / y ** 2
    assert weighted.tan_delta_s == pytest.approx(np.sum(w * x * y) / np.sum(w * x * x), rel=1e-12)
    assert unweighted.tan_delta_s == pytest.approx(np.sum(x * y) / np.sum(x * x), rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(tan=st.floats(1e-5, 1e-2), c=st.floats(0.1, 10.0))
def test_surface_scaling(tan, c):
    p = np.array([1e-4, 2e-4, 5e-4, 1e-3])
    q = 1 / (p * tan) * np.array([1.1, 0.9, 1.05, 0.97])
    a = fit_surface_loss([SprPoint(x, y) for x, y in zip(p, q)])
    b = fit_surface_loss([SprPoint(x, c * y) for x, y in zip(p, q)])
    assert b.tan_delta_s == pytest.approx(a.tan_delta_s / c, rel=1e-12)
    assert b.bulk_q_lower_bound == pytest.approx(a.bulk_q_lower_bound * c, rel=1e-10)
