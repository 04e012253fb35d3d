"""CPMG filter functions, dephasing forward model and noise-spectrum reconstruction."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import constants, interpolate, optimize

from .errors import (AllPointsDroppedError, BandWarning, ConvergenceError, InsufficientNError,
                     QuadratureError)

SERIES_MAX_X = 1e-3


# ---------------------------------------------------------------------------
# filter function; everything is expressed in x = omega * t and r = t_pi / (2 t)
#
# With a = x / 2N the pulse sum is geometric and the whole amplitude factors as
#     F = (1 - (-1)^N e^{ix}) (cos a - cos rx) / cos a
# and |F|^2 = |1 - (-1)^N e^{ix}|^2 / cos^2 a * 4 sin^2((rx + a)/2) sin^2((rx - a)/2).
# The first factor equals 4 (sin Nu / sin u)^2 with u = a + pi/2, which is how it is
# evaluated where cos a is small.


def _dirichlet_sq(n, x):
    """``|1 - (-1)^n e^{ix}|^2 / cos^2(x / 2n)``, finite at the removable poles."""
    a = x / (2 * n)
    ca = np.cos(a)
    num = np.sin(0.5 * x) if n % 2 == 0 else np.cos(0.5 * x)
    far = np.abs(ca) > 0.5
    out = np.empty_like(x)
    out[far] = 4 * num[far] ** 2 / ca[far] ** 2
    # near cos a = 0: 2 |sin(n u) / sin u| with u = a + pi/2 reduced mod pi
    u = a[~far] + 0.5 * np.pi
    eps = u - np.pi * np.round(u / np.pi)
    se = np.sin(eps)
    ratio = np.where(se == 0, float(n), np.sin(n * eps) / np.where(se == 0, 1.0, se))
    out[~far] = 4 * ratio ** 2
    return out


def _g_closed(n, x, r):
    a = x / (2 * n)
    prod = np.sin(0.5 * (r * x + a)) * np.sin(0.5 * (r * x - a))
    return _dirichlet_sq(n, x) * 4 * prod ** 2 / (x * x)


def _sinc_half_sq_series(k, x2):
    # (sin(kx/2) / (kx/2))^2 through x^4 with x2 = x^2
    k2 = k * k
    return 1 - k2 * x2 / 12 + k2 * k2 * x2 * x2 / 360


def _g_series(n, x, r):
    """Fourth-order small-x expansion of the closed form."""
    p, m = r + 0.5 / n, r - 0.5 / n
    x2 = x * x
    a2 = x2 / (4 * n * n)
    inv_cos2 = 1 + a2 + 2 * a2 * a2 / 3
    core = (p * m) ** 2 * x2 * _sinc_half_sq_series(p, x2) * _sinc_half_sq_series(m, x2) * inv_cos2
    if n % 2:
        cos_sq = 1 - x2 / 4 + x2 * x2 / 48
        return core * cos_sq
    return core * 0.25 * x2 * _sinc_half_sq_series(1.0, x2)


def filter_gx(n, x, r=0.0):
    """Filter function in the dimensionless variable ``x = omega t``.

    Parameters
    ----------
    n : int
        Number of pi pulses.
    x : array_like
        ``omega * t`` (nonnegative).
    r : float
        ``t_pi / (2 t)``.
    """
    n = int(n)
    if n < 1:
        raise ValueError("n must be >= 1")
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("omega must be nonnegative")
    flat = x.reshape(-1)
    out = np.empty_like(flat)
    small = flat < SERIES_MAX_X
    if np.any(small):
        out[small] = _g_series(n, flat[small], r)
    big = ~small
    if np.any(big):
        xb = flat[big]
        out[big] = _g_closed(n, xb, r)
    out = out.reshape(x.shape)
    return out if out.ndim else float(out)


def filter_g(n, t, t_pi, omega):
    """CPMG filter function ``g_N(omega, t)`` for pulses of duration ``t_pi``."""
    if not t > 0:
        raise ValueError("t must be positive")
    omega = np.asarray(omega, dtype=float)
    return filter_gx(n, omega * t, 0.5 * t_pi / t)


# ---------------------------------------------------------------------------
# coherence integral

_GL_LOW = np.polynomial.legendre.leggauss(16)
_GL_HIGH = np.polynomial.legendre.leggauss(32)
QUAD_RTOL = 1e-10
_MAX_PASSES = 40
_MAX_PANELS = 1 << 20
CUTOFF_PERIODS = 50  # upper limit 50 * pi * N in x


def _panel_sums(func, n, r, a, b, rule):
    nodes, weights = rule
    half = 0.5 * (b - a)[:, None]
    x = half * nodes + 0.5 * (a + b)[:, None]
    vals = func(x.ravel()) * filter_gx(n, x.ravel(), r)
    return np.sum((half * weights) * vals.reshape(x.shape), axis=1)


def integrate_filter(func, n, r, x_max=None, rtol=QUAD_RTOL):
    """``int_0^x_max func(x) g_N(x) dx`` by locally adaptive Gauss-Legendre.

    Panels start one half-period (pi) wide. Each pass compares the 16- and
    32-point rules per panel, keeps panels whose difference is within their
    share (by width) of ``rtol`` times the running total, and bisects the rest.
    """
    if x_max is None:
        x_max = CUTOFF_PERIODS * np.pi * n
    panels = max(int(math.ceil(x_max / np.pi)), 1)
    edges = np.linspace(0.0, x_max, panels + 1)
    a, b = edges[:-1], edges[1:]
    done = 0.0
    for _ in range(_MAX_PASSES):
        lo = _panel_sums(func, n, r, a, b, _GL_LOW)
        hi = _panel_sums(func, n, r, a, b, _GL_HIGH)
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise QuadratureError("non-finite integrand in coherence integral")
        total = done + float(np.sum(hi))
        ok = np.abs(hi - lo) <= rtol * abs(total) * (b - a) / x_max + 1e-300
        done += float(np.sum(hi[ok]))
        a, b = a[~ok], b[~ok]
        if len(a) == 0:
            return done
        if 2 * len(a) > _MAX_PANELS:
            break
        mid = 0.5 * (a + b)
        a, b = np.concatenate([a, mid]), np.concatenate([mid, b])
    raise QuadratureError(f"coherence integral not converged ({len(a)} panels unresolved)")


_AREA_CACHE = {}


def filter_area(n, r=0.0):
    """``int_0^{50 pi N} g_N(x) dx``: the weight a flat spectrum sees."""
    key = (int(n), float(r))
    if key not in _AREA_CACHE:
        _AREA_CACHE[key] = integrate_filter(np.ones_like, n, r)
    return _AREA_CACHE[key]


def coherence_integral(psd, n, t, t_pi=0.0, rtol=QUAD_RTOL):
    """``chi_N(t) = t^2 int_0^{50 pi N / t} S(omega) g_N(omega, t) d omega``."""
    if t == 0:
        return 0.0
    r = 0.5 * t_pi / t
    return t * integrate_filter(lambda x: np.asarray(psd(x / t), dtype=float), n, r, rtol=rtol)


def forward_population(psd, n, t, t_pi, t1_s, gamma_p):
    """CPMG survival ``0.5 + 0.5 exp(-t/2T1) exp(-gamma_p N) exp(-chi_N(t))``.

    ``t`` may be a scalar or an array of total evolution times.
    """
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    chi = np.array([coherence_integral(psd, n, float(tt), t_pi) for tt in ts])
    decay = np.exp(-ts / (2 * t1_s)) if t1_s is not None and math.isfinite(t1_s) else 1.0
    p = 0.5 + 0.5 * decay * math.exp(-gamma_p * n) * np.exp(-chi)
    return p if np.ndim(t) else float(p[0])


def chi_delta(psd, n, t, t_pi=0.0, quadrature="delta"):
    """Delta-function approximation of the coherence integral.

    ``"delta"`` is the literal ``t S(w') g_N(w', t)`` with ``w' = pi N / t``;
    ``"full"`` replaces the peak value by the filter area so a flat spectrum is
    reproduced exactly.
    """
    w = np.pi * n / t
    return t * float(psd(w)) * _weight(n, t, t_pi, quadrature)


def _weight(n, t, t_pi, quadrature):
    r = 0.5 * t_pi / t
    if quadrature == "delta":
        return float(filter_gx(n, np.pi * n, r))
    if quadrature == "full":
        return filter_area(n, r)
    raise ValueError(f"unknown quadrature mode {quadrature!r}")


# ---------------------------------------------------------------------------
# reconstruction

P_PRIME_MIN = 0.02
P_PRIME_MAX = 1.05
# interpolated spectra are only C1, so the refinement quadrature runs looser
REFINE_RTOL = 1e-7


@dataclass(frozen=True)
class PsdEstimate:
    omega_rad_s: np.ndarray
    s_value: np.ndarray
    source: tuple
    dropped: tuple = ()
    quadrature: str = "delta"

    def to_payload(self):
        return {
            "omega_rad_s": [float(v) for v in self.omega_rad_s],
            "f_hz": [float(v) / (2 * np.pi) for v in self.omega_rad_s],
            "s_value": [float(v) for v in self.s_value],
            "source": [{"n_pulses": int(n), "t_s": float(t)} for n, t in self.source],
            "dropped": [{"n_pulses": int(n), "t_s": float(t), "reason": why} for n, t, why in self.dropped],
            "quadrature": self.quadrature,
        }


def _curves(curves):
    return list(curves.curves) if hasattr(curves, "curves") else list(curves)


def log_interpolant(omega, s):
    """Monotone-cubic (PCHIP) log-log interpolant through positive spectrum samples.

    Duplicated frequencies are merged by geometric mean; the spectrum is held
    constant below the first sample and continued with the last segment's
    power law (slope clipped to [-4, 0]) above the last one.
    """
    lw = np.log(np.asarray(omega, dtype=float))
    ls = np.log(np.maximum(np.asarray(s, dtype=float), 1e-300))
    uniq, inv = np.unique(np.round(lw, 12), return_inverse=True)
    lsu = np.bincount(inv, weights=ls) / np.bincount(inv)
    if len(uniq) > 1:
        slope = float(np.clip((lsu[-1] - lsu[-2]) / (uniq[-1] - uniq[-2]), -4.0, 0.0))
    else:
        slope = 0.0
    inner = interpolate.PchipInterpolator(uniq, lsu) if len(uniq) > 1 else None

    def psd(w):
        lx = np.log(np.maximum(np.asarray(w, dtype=float), 1e-300))
        out = inner(np.clip(lx, uniq[0], uniq[-1])) if len(uniq) > 1 else np.full_like(lx, lsu[0])
        above = lx > uniq[-1]
        out = np.where(above, lsu[-1] + slope * (lx - uniq[-1]), out)
        return np.exp(out)

    return psd


def reconstruct_psd(curves, t1_s, gamma_p, quadrature="delta", noise_floor=0.0, workers=1,
                    refine_iter=30, refine_tol=1e-4):
    """Invert CPMG survival curves point by point into a noise spectrum.

    Each point ``(N, t)`` maps to ``omega = pi N / t`` and
    ``S = -ln(P') / (t w_N)`` with ``P' = 2 (P - 0.5) exp(t / 2 T1) exp(gamma_p N)``
    and ``w_N`` the filter peak value (``"delta"``) or area (``"full"``).

    In ``"full"`` mode the area-normalized estimate is then refined
    self-consistently: the samples are interpolated into a spectrum, every
    coherence integral is recomputed by quadrature, and each sample is scaled
    by ``chi_measured / chi_predicted`` until the largest correction is below
    ``refine_tol`` or ``refine_iter`` passes have run. Points with ``P' >= 1``
    (no measurable dephasing) are kept as ``S = 0`` and excluded from the
    refinement.
    """
    rows, dropped = [], []
    tasks = []
    for c in _curves(curves):
        n = c.n_pulses
        for t, p in zip(c.trace.delay_s, c.trace.population):
            t, p = float(t), float(p)
            if t <= 0:
                dropped.append((n, t, "zero delay"))
                continue
            decay = math.exp(t / (2 * t1_s)) if t1_s is not None and math.isfinite(t1_s) else 1.0
            pp = 2 * (p - 0.5) * decay * math.exp(gamma_p * n)
            if pp <= 0:
                dropped.append((n, t, "non-positive P'"))
            elif pp <= P_PRIME_MIN:
                dropped.append((n, t, "P' below 0.02"))
            elif pp >= P_PRIME_MAX:
                dropped.append((n, t, "P' above 1.05"))
            elif abs(math.log(pp)) < noise_floor:
                dropped.append((n, t, "below noise floor"))
            else:
                tasks.append((n, t, c.t_pi_s, pp))

    def one(task):
        n, t, t_pi, pp = task
        return np.pi * n / t, -math.log(pp) / (t * _weight(n, t, t_pi, quadrature)), (n, t)

    if workers > 1 and len(tasks) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(one, tasks))
    else:
        rows = [one(task) for task in tasks]
    if not rows:
        raise AllPointsDroppedError(f"all {len(dropped)} CPMG points were dropped")
    order = sorted(range(len(rows)), key=lambda i: (rows[i][0], rows[i][2]))
    rows = [rows[i] for i in order]
    tasks = [tasks[i] for i in order]
    omega = np.array([row[0] for row in rows])
    s = np.array([row[1] for row in rows])
    if quadrature == "full" and refine_iter > 0:
        s = _refine(omega, s, tasks, refine_iter, refine_tol, workers)
    return PsdEstimate(omega, s, tuple(row[2] for row in rows), tuple(dropped), quadrature)


def _refine(omega, s, tasks, n_iter, tol, workers):
    chi_meas = np.array([-math.log(pp) for _, _, _, pp in tasks])
    active = s > 0
    if np.count_nonzero(active) < 2:
        return s
    s = s.copy()
    idx = np.flatnonzero(active)

    def predict(psd):
        def one(i):
            n, t, t_pi, _ = tasks[i]
            return coherence_integral(psd, n, t, t_pi, rtol=REFINE_RTOL)

        if workers > 1:
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(max_workers=workers) as pool:
                return np.array(list(pool.map(one, idx)))
        return np.array([one(i) for i in idx])

    for _ in range(n_iter):
        psd = log_interpolant(omega[idx], s[idx])
        ratio = chi_meas[idx] / predict(psd)
        # duplicates at one frequency share a single interpolant node
        lw = np.round(np.log(omega[idx]), 12)
        _, inv = np.unique(lw, return_inverse=True)
        node_ratio = np.exp(np.bincount(inv, weights=np.log(ratio)) / np.bincount(inv))
        s[idx] = psd(omega[idx]) * node_ratio[inv]
        if np.max(np.abs(np.log(node_ratio))) < tol:
            break
    return s


# ---------------------------------------------------------------------------
# thermal-photon model

H_OVER_KB = constants.h / constants.k


@dataclass(frozen=True)
class ThermalPhotonFit:
    a_num: float
    kappa_rad_s: float
    b_floor: float
    nbar: float
    t_eff_k: float
    sigmas: dict = field(default_factory=dict)
    freq_unit: str = "rad/s"

    def to_payload(self):
        return {"a_num": self.a_num, "kappa_rad_s": self.kappa_rad_s,
                "kappa_hz": self.kappa_rad_s / (2 * np.pi), "b_floor": self.b_floor,
                "nbar": self.nbar, "t_eff_k": self.t_eff_k, "sigmas": dict(self.sigmas)}


def thermal_psd(omega, a_num, kappa, b_floor):
    """``S(omega) = A / (kappa^2 + omega^2) + B`` with ``A = (2 chi)^2 2 eta nbar kappa``."""
    omega = np.asarray(omega, dtype=float)
    return a_num / (kappa * kappa + omega * omega) + b_floor


def thermal_numerator(nbar, kappa, chi2):
    """Grouped numerator ``A`` for a given photon number."""
    eta = kappa ** 2 / (kappa ** 2 + chi2 ** 2)
    return chi2 ** 2 * 2 * eta * nbar * kappa


def photon_number(a_num, kappa, chi2):
    """Invert the grouped numerator: ``nbar = A / ((2 chi)^2 2 eta kappa)``."""
    eta = kappa ** 2 / (kappa ** 2 + chi2 ** 2)
    return a_num / (chi2 ** 2 * 2 * eta * kappa)


def bose_einstein_temperature(nbar, f_hz):
    """Effective temperature ``h f / (k_B ln(1 + 1/nbar))``; 0 K for ``nbar <= 0``."""
    if nbar <= 0:
        return 0.0
    return H_OVER_KB * f_hz / math.log1p(1.0 / nbar)


def _gauss_newton(resid, jac, v, max_steps=4):
    # polish to the float optimum; steps are kept unless the cost grows beyond rounding
    r = resid(v)
    cost = float(r @ r)
    for _ in range(max_steps):
        step = np.linalg.lstsq(jac(v), -r, rcond=None)[0]
        v_new = v + step
        if not (np.all(np.isfinite(v_new)) and v_new[0] > 0):
            break
        r_new = resid(v_new)
        c_new = float(r_new @ r_new)
        if not c_new <= cost * (1 + 1e-10):
            break
        v, r, cost = v_new, r_new, c_new
        if np.max(np.abs(step)) < 1e-15 * max(1.0, float(np.max(np.abs(v)))):
            break
    return v


def fit_thermal_photon(psd, chi2_rad_s, f_res_hz, freq_unit="rad/s"):
    """Fit the thermal-photon dephasing spectrum and derive ``nbar`` and ``T_eff``.

    Parameters
    ----------
    psd : PsdEstimate or (omega, S) pair
        Frequencies are angular (rad/s) unless ``freq_unit == "Hz"``, in which
        case both the frequency axis and ``chi2_rad_s`` are read as cycles/s.
    chi2_rad_s : float
        Stark shift per photon, ``2 chi``.
    f_res_hz : float
        Resonator frequency for the Bose-Einstein inversion.

    Notes
    -----
    The fit runs on normalized axes (median frequency, median spectrum) with
    log residuals, so the result does not depend on the unit system.
    """
    if isinstance(psd, PsdEstimate):
        w_in, s_in = np.asarray(psd.omega_rad_s, float), np.asarray(psd.s_value, float)
    else:
        w_in, s_in = (np.asarray(a, dtype=float) for a in psd)
    if freq_unit == "Hz":
        to_rad = 2 * np.pi
    elif freq_unit == "rad/s":
        to_rad = 1.0
    else:
        raise ValueError(f"unknown freq_unit {freq_unit!r}")
    keep = (s_in > 0) & (w_in > 0) & np.isfinite(s_in)
    if np.count_nonzero(keep) < 4:
        raise ConvergenceError("thermal-photon fit needs >= 4 positive spectrum points")
    w, s = w_in[keep], s_in[keep]
    w_ref, s_ref = float(np.median(w)), float(np.median(s))
    x, y = w / w_ref, s / s_ref
    ly = np.log(y)

    # start: floor from the top-frequency tail, corner from where S falls to half its plateau
    b0 = max(float(np.min(y)) * 0.5, 1e-12)
    plateau = float(np.median(y[x <= np.quantile(x, 0.2)]))
    half = np.flatnonzero(y - b0 < 0.5 * (plateau - b0))
    k0 = float(x[half[0]]) if len(half) else float(np.median(x))
    a0 = max(plateau - b0, 1e-12) * k0 * k0

    # v = (A, log kappa, log B) on the normalized axes; A >= 0 lets a flat
    # spectrum converge onto the boundary instead of drifting to log A -> -inf
    def resid(v):
        k, b = np.exp(v[1:])
        return np.log(v[0] / (k * k + x * x) + b) - ly

    def jac(v):
        k, b = np.exp(v[1:])
        den = k * k + x * x
        m = v[0] / den + b
        return np.column_stack([1 / den, -2 * v[0] * k * k / den ** 2, np.full_like(x, b)]) / m[:, None]

    lb, ub = [0.0, -np.inf, -np.inf], [np.inf, np.inf, np.inf]
    v0 = np.array([a0, math.log(k0), math.log(b0)])
    sol = optimize.least_squares(resid, v0, jac=jac, bounds=(lb, ub), method="trf", xtol=1e-15,
                                 ftol=1e-15, gtol=1e-15, max_nfev=5000)
    v = sol.x
    if sol.status <= 0 or not np.all(np.isfinite(v)):
        # a flat spectrum leaves kappa free along A / kappa^2 = const; fall back
        # to the floor-only model when the Lorentzian adds nothing significant
        floor = np.array([0.0, v0[1], float(np.mean(ly))])
        rss_floor = float(resid(floor) @ resid(floor))
        rss_fit = 2 * sol.cost if np.all(np.isfinite(v)) else rss_floor
        f_stat = (rss_floor - rss_fit) / 2 / max(rss_fit / max(len(y) - 3, 1), 1e-300)
        if f_stat > 3.0:
            raise ConvergenceError("thermal-photon fit did not converge")
        v = floor
    elif v[0] > 0:
        v = _gauss_newton(resid, jac, v)
    a_n, k_n, b_n = v[0], math.exp(v[1]), math.exp(v[2])
    j = jac(v)
    r = resid(v)
    dof = max(len(y) - 3, 1)
    cov = np.linalg.pinv(j.T @ j) * float(r @ r) / dof
    sd = np.sqrt(np.abs(np.diag(cov)))

    scale_w = w_ref * to_rad
    kappa = float(k_n * scale_w)
    a_num = float(a_n * s_ref * scale_w ** 2)
    b_floor = float(b_n * s_ref)
    chi2 = chi2_rad_s * to_rad
    nbar = float(photon_number(a_num, kappa, chi2))
    # d log nbar = dA / A - d log kappa * (1 + 2 (1 - eta)) with eta = k^2/(k^2 + chi2^2)
    eta = kappa ** 2 / (kappa ** 2 + chi2 ** 2)
    if a_n > 0:
        g = np.array([1.0 / a_n, -1.0 - 2.0 * (1 - eta), 0.0])
        nbar_sd = abs(nbar) * math.sqrt(abs(g @ cov @ g))
    else:
        nbar_sd = float(photon_number(sd[0] * s_ref * scale_w ** 2, kappa, chi2))
    if kappa < 1.2 * float(w.min()) * to_rad or kappa > 0.8 * float(w.max()) * to_rad:
        warnings.warn(f"fitted kappa {kappa:.4g} rad/s lies within 20% of the spectrum band edge",
                      BandWarning, stacklevel=2)
    kappa_sd = kappa * sd[1] if a_n > 0 else math.inf  # no Lorentzian, no corner
    sig = {"a_num": sd[0] * s_ref * scale_w ** 2, "kappa_rad_s": kappa_sd,
           "b_floor": b_floor * sd[2], "nbar": nbar_sd}
    return ThermalPhotonFit(a_num, kappa, b_floor, nbar, bose_einstein_temperature(nbar, f_res_hz),
                            sig, freq_unit)


# ---------------------------------------------------------------------------
# pulse error and CPMG scaling


@dataclass(frozen=True)
class GammaPFit:
    gamma_p: float
    gamma_p_sigma: float
    intercept: float
    n_values: tuple
    log_amplitudes: tuple


def _zero_time_log_amplitude(trace, n_early=4):
    t = np.asarray(trace.delay_s, float)
    y = 2 * (np.asarray(trace.population, float) - 0.5)
    ok = y > 0
    t, y = t[ok], y[ok]
    if len(t) == 0:
        raise InsufficientNError("curve has no points above P = 0.5")
    order = np.argsort(t)[:n_early]
    t, ly = t[order], np.log(y[order])
    if len(t) == 1 or t[0] == 0:
        return float(ly[0])
    deg = 1 if len(t) < 4 else 2
    return float(np.polyval(np.polyfit(t, ly, deg), 0.0))


def fit_gamma_p(curves, n_early=4):
    """Per-pulse decay from the zero-delay amplitude of each CPMG curve.

    Each curve's ``ln(2(P - 0.5))`` is extrapolated to ``t = 0`` from its
    earliest points; the extrapolated log amplitudes are then fit linearly
    in ``N`` with a free intercept (state-preparation and readout loss), so
    ``P(0) - 0.5 ∝ exp(-gamma_p N)``.
    """
    cs = _curves(curves)
    by_n = {}
    for c in cs:
        by_n.setdefault(c.n_pulses, []).append(_zero_time_log_amplitude(c.trace, n_early))
    if len(by_n) < 3:
        raise InsufficientNError(f"need >= 3 distinct pulse numbers, got {len(by_n)}")
    n = np.array(sorted(by_n), dtype=float)
    la = np.array([np.mean(by_n[k]) for k in sorted(by_n)])
    design = np.column_stack([np.ones_like(n), n])
    coef, *_ = np.linalg.lstsq(design, la, rcond=None)
    r = la - design @ coef
    dof = max(len(n) - 2, 1)
    cov = np.linalg.inv(design.T @ design) * float(r @ r) / dof
    return GammaPFit(float(-coef[1]), float(math.sqrt(cov[1, 1])), float(coef[0]),
                     tuple(int(k) for k in n), tuple(float(v) for v in la))


@dataclass(frozen=True)
class T2Scaling:
    exponent: float
    prefactor_s: float
    exponent_sigma: float
    n_used: tuple


def fit_t2_scaling(n_values, t2_values, n_min=None, n_max=None):
    """Log-log fit ``T2 = c N^p`` restricted to ``n_min <= N <= n_max``."""
    n = np.asarray(n_values, dtype=float)
    t2 = np.asarray(t2_values, dtype=float)
    sel = np.ones(n.shape, bool)
    if n_min is not None:
        sel &= n >= n_min
    if n_max is not None:
        sel &= n <= n_max
    sel &= (n > 0) & (t2 > 0)
    if np.count_nonzero(sel) < 4:
        raise InsufficientNError(f"power-law fit needs >= 4 points, got {np.count_nonzero(sel)}")
    lx, ly = np.log(n[sel]), np.log(t2[sel])
    design = np.column_stack([np.ones_like(lx), lx])
    coef, *_ = np.linalg.lstsq(design, ly, rcond=None)
    r = ly - design @ coef
    cov = np.linalg.inv(design.T @ design) * float(r @ r) / max(len(lx) - 2, 1)
    return T2Scaling(float(coef[1]), float(math.exp(coef[0])), float(math.sqrt(cov[1, 1])),
                     tuple(int(v) for v in n[sel]))


def t2_per_curve(curves):
    """Fit each CPMG curve with an exponential and return ``(N, T2)`` pairs."""
    from .coherence import fit_decay

    out = []
    for c in _curves(curves):
        out.append((c.n_pulses, fit_decay(c.trace).tau_s))
    return out
