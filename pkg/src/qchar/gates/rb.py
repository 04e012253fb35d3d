"""Randomized-benchmarking decay fit and the amplitude-damping fidelity limit."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from ..errors import ConvergenceError

DIM = 2


@dataclass(frozen=True)
class RbFit:
    p: float
    epg: float
    a: float
    b: float
    p_sigma: float
    epg_sigma: float
    a_sigma: float
    b_sigma: float
    chi2_red: float

    def to_payload(self, pulses_per_clifford=None):
        out = {"p": self.p, "epg": self.epg, "a": self.a, "b": self.b, "sigmas": {
            "p": self.p_sigma, "epg": self.epg_sigma, "a": self.a_sigma, "b": self.b_sigma},
            "chi2_red": self.chi2_red}
        if pulses_per_clifford is not None:
            out["epg_per_pulse"] = self.epg / pulses_per_clifford
            out["pulses_per_clifford"] = pulses_per_clifford
        return out


def _weights(data):
    sig = data.survival_sigma
    if sig is not None and np.all(np.isfinite(sig)) and np.all(np.asarray(sig) > 0):
        return 1.0 / np.asarray(sig, dtype=float)
    return np.ones(len(data.lengths))


def _linear(m, y, w, lam):
    design = np.column_stack([np.exp(-lam * m), np.ones_like(m)]) * w[:, None]
    coef, *_ = np.linalg.lstsq(design, y * w, rcond=None)
    r = y * w - design @ coef
    return coef, float(r @ r)


def rb_fit(data, n_grid=400):
    """Fit ``survival = a p^m + b`` and report ``EPG = (1 - p)(d - 1)/d``.

    ``a`` and ``b`` are eliminated linearly, so the fitted ``p`` depends on the
    data only through the shape of the decay; an affine change of the
    state-preparation and measurement envelope leaves it unchanged.
    """
    m = np.asarray(data.lengths, dtype=float)
    y = np.asarray(data.survival, dtype=float)
    if len(m) < 4:
        raise ConvergenceError("RB fit needs >= 4 sequence lengths")
    w = _weights(data)
    spread = float(np.max(y) - np.min(y))
    if spread <= 1e-12 * max(float(np.max(np.abs(y))), 1e-300):
        level = float(np.mean(y))
        if abs(level - 1.0 / DIM) <= 1e-9:
            raise ConvergenceError("survival is flat at 1/d: fully depolarized, p unidentifiable")
        # flat above the mixed-state level: no decay
        return RbFit(1.0, 0.0, level - 1.0 / DIM, 1.0 / DIM, 0.0, 0.0, 0.0, 0.0, 0.0)

    lam_lo, lam_hi = 1e-3 / np.max(m), 30.0 / np.min(m[m > 0]) if np.any(m > 0) else 30.0
    grid = np.linspace(math.log(lam_lo * 1e-3), math.log(lam_hi), n_grid)
    cost = np.array([_linear(m, y, w, math.exp(g))[1] for g in grid])
    i = int(np.argmin(cost))
    if i == n_grid - 1:
        raise ConvergenceError("RB decay faster than the shortest sequence resolves; p unidentifiable")
    if i == 0:
        # no resolvable decay: p = 1 within the data
        (a, b), _ = _linear(m, y, w, 0.0)
        return RbFit(1.0, 0.0, float(a), float(b), 0.0, 0.0, 0.0, 0.0, 0.0)
    res = optimize.minimize_scalar(lambda g: _linear(m, y, w, math.exp(g))[1],
                                   bounds=(grid[i - 1], grid[i + 1]), method="bounded",
                                   options={"xatol": 1e-12})
    g_best = res.x

    def resid(v):
        lam = math.exp(v[0])
        return (v[1] * np.exp(-lam * m) + v[2] - y) * w

    (a, b), _ = _linear(m, y, w, math.exp(g_best))
    sol = optimize.least_squares(resid, [g_best, a, b], method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15)
    if np.all(np.isfinite(sol.x)) and float(sol.fun @ sol.fun) <= _linear(m, y, w, math.exp(g_best))[1]:
        g_best = sol.x[0]
    lam = math.exp(g_best)
    (a, b), rss = _linear(m, y, w, lam)
    p = math.exp(-lam)
    e = np.exp(-lam * m)
    jac = np.column_stack([-a * m * e * lam, e, np.ones_like(m)]) * w[:, None]
    dof = max(len(m) - 3, 1)
    chi2_red = rss / dof
    try:
        cov = np.linalg.inv(jac.T @ jac) * chi2_red
    except np.linalg.LinAlgError:
        raise ConvergenceError("RB covariance singular")
    sd = np.sqrt(np.abs(np.diag(cov)))
    # jac column 0 is d/d(log lambda); dp = -p lambda d(log lambda)
    p_sigma = p * lam * sd[0]
    # the resolved decay a (1 - p^M) stays identifiable when a and p are not separately
    m_max = float(np.max(m))
    e_max = math.exp(-lam * m_max)
    grad = np.array([a * m_max * lam * e_max, 1 - e_max, 0.0])
    drop = a * (1 - e_max)
    drop_sd = math.sqrt(abs(grad @ cov @ grad))
    if not abs(drop) > 2 * drop_sd:
        raise ConvergenceError(f"RB decay over the data ({drop:.3g}) not significant (sigma {drop_sd:.3g})")
    epg = (1 - p) * (DIM - 1) / DIM
    return RbFit(p, epg, float(a), float(b), p_sigma, p_sigma * (DIM - 1) / DIM, float(sd[1]),
                 float(sd[2]), chi2_red)


def t1_limit_infidelity(t_g_s, t1_s):
    """Average infidelity of the amplitude-damping channel over one gate.

    ``gamma = 1 - exp(-t_g/T1)``, Kraus traces ``1 + sqrt(1 - gamma)`` and 0,
    ``F = (d + sum |Tr K|^2) / (d (d + 1))``. Evaluated as
    ``(1 - s)(3 + s)/6`` with ``s = sqrt(1 - gamma)`` to keep precision for
    small ``gamma``.
    """
    if t1_s <= 0 or t_g_s < 0:
        raise ValueError("t1 must be positive and t_g nonnegative")
    if math.isinf(t1_s):
        return 0.0
    gamma = -math.expm1(-t_g_s / t1_s)
    s = math.sqrt(1 - gamma)
    one_minus_s = gamma / (1 + s)
    return one_minus_s * (3 + s) / 6


def average_fidelity_kraus(kraus):
    """``(d + sum |Tr K_i|^2) / (d(d+1))`` for a list of Kraus matrices."""
    d = kraus[0].shape[0]
    return (d + sum(abs(np.trace(k)) ** 2 for k in kraus)) / (d * (d + 1))


def amplitude_damping_kraus(gamma):
    return [np.array([[1, 0], [0, math.sqrt(1 - gamma)]], dtype=complex),
            np.array([[0, math.sqrt(gamma)], [0, 0]], dtype=complex)]


def limit_report(t_g_s, t1_s, pulses_per_clifford=None):
    per_pulse = t1_limit_infidelity(t_g_s, t1_s)
    out = {"t_g_s": t_g_s, "t1_s": t1_s, "infidelity_per_pulse": per_pulse,
           "fidelity_per_pulse": 1 - per_pulse}
    if pulses_per_clifford is not None:
        out["pulses_per_clifford"] = pulses_per_clifford
        out["infidelity_per_clifford"] = 1 - (1 - per_pulse) ** pulses_per_clifford
    return out
