"""Hanger-geometry S21 model and staged circle fit.

The notch model is::

    S21(f) = A exp(i(theta + 2 pi f tau)) * (1 - (Ql/|Qc|) exp(i phi) / (1 + 2i Ql (f - f0)/f0))

``fit_resonator`` initializes every parameter geometrically (cable delay from
the off-resonant phase slope, algebraic circle fit, phase-arctangent fit) and
then refines all seven parameters with Levenberg-Marquardt.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import linalg, optimize

from .errors import ConvergenceError, NoDipError, NonPhysicalError

MAX_ITER = 200
STEP_TOL = 1e-12
# cost and gradient tests near machine precision so the step test governs termination
FTOL = 1e-15


@dataclass(frozen=True)
class ResonatorParams:
    f0_hz: float
    q_l: float
    abs_qc: float
    phi_rad: float
    amp: float = 1.0
    theta_rad: float = 0.0
    tau_s: float = 0.0

    def __post_init__(self):
        if not (self.f0_hz > 0 and self.q_l > 0 and self.abs_qc > 0 and self.amp > 0):
            raise NonPhysicalError(f"invalid resonator parameters {self}")


@dataclass(frozen=True)
class ResonatorFit:
    params: ResonatorParams
    q_int: float
    param_sigmas: dict
    residual_rms: float
    q_int_sigma: float = float("nan")
    n_iter: int = 0

    def to_payload(self):
        p = self.params
        return {
            "params": {"f0_hz": p.f0_hz, "q_l": p.q_l, "abs_qc": p.abs_qc, "phi_rad": p.phi_rad,
                       "amp": p.amp, "theta_rad": p.theta_rad, "tau_s": p.tau_s},
            "sigmas": dict(self.param_sigmas),
            "q_int": self.q_int,
            "q_int_sigma": self.q_int_sigma,
            "residual_rms": self.residual_rms,
        }


def wrap_phase(x):
    """Map angles to (-pi, pi]."""
    y = np.mod(np.asarray(x, dtype=float) + np.pi, 2 * np.pi) - np.pi
    y = np.where(y == -np.pi, np.pi, y)
    return y if y.ndim else float(y)


def eval_s21(params, f):
    """Evaluate the notch-type transmission at probe frequencies ``f`` (Hz)."""
    p = params
    f = np.asarray(f, dtype=float)
    background = p.amp * np.exp(1j * (p.theta_rad + 2 * np.pi * f * p.tau_s))
    resonance = (p.q_l / p.abs_qc) * np.exp(1j * p.phi_rad) / (1 + 2j * p.q_l * (f - p.f0_hz) / p.f0_hz)
    return background * (1 - resonance)


def internal_q(q_l, abs_qc, phi_rad):
    """Internal quality factor from ``1/Qi = 1/Ql - cos(phi)/|Qc|``."""
    if not (q_l > 0 and abs_qc > 0):
        raise NonPhysicalError("q_l and abs_qc must be positive")
    inv = 1.0 / q_l - math.cos(phi_rad) / abs_qc
    if inv <= 0:
        raise NonPhysicalError(
            f"1/Ql - cos(phi)/|Qc| = {inv:.3e} <= 0: coupling Q inconsistent with loaded Q")
    return 1.0 / inv


# ---------------------------------------------------------------------------
# staged initialization


def fit_circle(z):
    """Algebraic least-squares circle through complex points.

    Minimizes the algebraic distance under the Pratt normalization
    ``B^2 + C^2 - 4AD = 1`` for ``A|z|^2 + B x + C y + D = 0``; returns
    ``(center, radius)``.
    """
    z = np.asarray(z, dtype=complex)
    shift = np.mean(z)
    zs = z - shift
    scale = np.max(np.abs(zs))
    if scale == 0:
        raise NoDipError("all points coincide; no circle to fit")
    zs = zs / scale
    x, y = zs.real, zs.imag
    w = x * x + y * y
    design = np.column_stack([w, x, y, np.ones_like(x)])
    moments = design.T @ design
    constraint = np.array([[0, 0, 0, -2], [0, 1, 0, 0], [0, 0, 1, 0], [-2, 0, 0, 0]], dtype=float)
    evals, evecs = linalg.eig(moments, constraint)
    evals = np.real(evals)
    ok = np.isfinite(evals) & (evals > -1e-12 * np.max(np.abs(moments)))
    if not np.any(ok):
        raise NoDipError("circle fit failed: no admissible eigenvalue")
    idx = np.where(ok)[0][np.argmin(evals[ok])]
    a, b, c, d = np.real(evecs[:, idx])
    if a == 0:
        raise NoDipError("circle fit degenerate (points collinear)")
    center = complex(-b / (2 * a), -c / (2 * a))
    radius = math.sqrt(max(b * b + c * c - 4 * a * d, 0.0)) / (2 * abs(a))
    return center * scale + shift, radius * scale


def _circle_residual(z):
    c, r = fit_circle(z)
    return float(np.sum((np.abs(z - c) - r) ** 2))


def _initial_delay(f, s21):
    n = len(f)
    k = max(2, int(round(0.1 * n)))
    phase = np.unwrap(np.angle(s21))
    idx = np.r_[0:k, n - k:n]
    # separate intercepts per side: the resonance adds a phase step between them
    fc = f[idx] - np.mean(f)
    side = np.r_[np.zeros(k), np.ones(k)]
    design = np.column_stack([fc, 1 - side, side])
    coef, *_ = np.linalg.lstsq(design, phase[idx], rcond=None)
    return coef[0] / (2 * np.pi)


def _refine_delay(f, s21, tau0):
    span = f[-1] - f[0]
    width = 0.25 / span  # a quarter turn of phase across the span

    def cost(t):
        return _circle_residual(s21 * np.exp(-2j * np.pi * f * t))

    res = optimize.minimize_scalar(cost, bounds=(tau0 - width, tau0 + width), method="bounded",
                                   options={"xatol": 1e-6 * width})
    return res.x if cost(res.x) <= cost(tau0) else tau0


def _check_dip(z):
    n = len(z)
    k = max(2, int(round(0.1 * n)))
    outer = np.r_[z[:k], z[-k:]]
    noise = np.std(np.diff(z[:k])) / math.sqrt(2) + np.std(np.diff(z[-k:])) / math.sqrt(2)
    baseline = np.median(outer.real) + 1j * np.median(outer.imag)
    deviation = np.max(np.abs(z - baseline))
    if deviation <= 8 * noise or deviation <= 1e-9 * abs(baseline):
        raise NoDipError(f"no resonance above noise floor (max deviation {deviation:.3g}, "
                         f"noise {noise:.3g})")


def _phase_model(f, theta0, q_l, f0):
    return theta0 + 2 * np.arctan(2 * q_l * (1 - f / f0))


def _initial_params(f, s21):
    tau = _refine_delay(f, s21, _initial_delay(f, s21))
    z = s21 * np.exp(-2j * np.pi * f * tau)
    c, r0 = fit_circle(z)
    n = len(f)
    k = max(2, int(round(0.05 * n)))
    ends = np.exp(1j * np.angle(np.mean(z[:k]) - c)) + np.exp(1j * np.angle(np.mean(z[-k:]) - c))
    p_off = c + r0 * np.exp(1j * np.angle(ends))
    dist2 = np.abs(z - p_off) ** 2
    i_res = int(np.argmax(dist2))
    f0 = f[i_res]
    above = np.where(dist2 > 0.5 * dist2[i_res])[0]
    fwhm = max(f[above[-1]] - f[above[0]], 2 * np.min(np.diff(f)))
    q_l = f0 / fwhm

    zc = z - c
    phase = np.unwrap(np.angle(zc))
    theta0 = phase[i_res]

    def resid(x):
        th, lq, df = x
        return phase - _phase_model(f, th, math.exp(lq), f0 + df * fwhm)

    sol = optimize.least_squares(resid, [theta0, math.log(q_l), 0.0], method="lm",
                                 xtol=1e-12, ftol=1e-12, max_nfev=2000)
    _, lq, df = sol.x
    q_l = math.exp(lq)
    f0 = f0 + df * fwhm
    amp = abs(p_off)
    theta = math.atan2(p_off.imag, p_off.real)
    r_norm = r0 / amp
    abs_qc = q_l / (2 * r_norm)
    phi = float(np.angle(1 - c / p_off))
    return ResonatorParams(float(f0), float(q_l), float(abs_qc), phi, float(amp), theta, float(tau))


# ---------------------------------------------------------------------------
# full refinement


class _Scaled:
    """Map between ResonatorParams and a well-conditioned LM vector."""

    def __init__(self, init, f):
        self.f0i = init.f0_hz
        self.width = init.f0_hz / init.q_l
        self.fc = 0.5 * (f[0] + f[-1])
        self.span = f[-1] - f[0]
        self.f = f

    def pack(self, p):
        return np.array([
            (p.f0_hz - self.f0i) / self.width,
            math.log(p.q_l),
            math.log(p.abs_qc),
            p.phi_rad,
            math.log(p.amp),
            p.theta_rad + 2 * np.pi * self.fc * p.tau_s,
            2 * np.pi * self.span * p.tau_s,
        ])

    def unpack(self, x):
        tau = x[6] / (2 * np.pi * self.span)
        return ResonatorParams(
            f0_hz=float(self.f0i + x[0] * self.width),
            q_l=math.exp(x[1]),
            abs_qc=math.exp(x[2]),
            phi_rad=float(wrap_phase(x[3])),
            amp=math.exp(x[4]),
            theta_rad=float(wrap_phase(x[5] - 2 * np.pi * self.fc * tau)),
            tau_s=float(tau),
        )

    def model_and_jac(self, x):
        f = self.f
        f0 = self.f0i + x[0] * self.width
        q_l, abs_qc = math.exp(x[1]), math.exp(x[2])
        phi, amp, theta_c = x[3], math.exp(x[4]), x[5]
        df = (f - self.fc) / self.span
        bg = amp * np.exp(1j * (theta_c + x[6] * df))
        denom = 1 + 2j * q_l * (f - f0) / f0
        r = (q_l / abs_qc) * np.exp(1j * phi) / denom
        s = bg * (1 - r)
        jac = np.empty((len(f), 7), dtype=complex)
        jac[:, 0] = -bg * r * 2j * q_l * f / (f0 * f0 * denom) * self.width
        jac[:, 1] = -bg * r / denom
        jac[:, 2] = bg * r
        jac[:, 3] = -1j * bg * r
        jac[:, 4] = s
        jac[:, 5] = 1j * s
        jac[:, 6] = 1j * df * s
        return s, jac


def _split(c):
    return np.concatenate([c.real, c.imag], axis=0)


def _polish(fun, jac, x, max_steps=4):
    # Gauss-Newton steps from the LM optimum. The LM step test stops ~1e-9
    # short in flat directions; the cost cannot resolve that, so steps are
    # accepted unless the cost grows beyond rounding.
    r = fun(x)
    cost = r @ r
    for _ in range(max_steps):
        step = np.linalg.lstsq(jac(x), -r, rcond=None)[0]
        x_new = x + step
        r_new = fun(x_new)
        c_new = r_new @ r_new
        if not c_new <= cost * (1 + 1e-10):
            break
        x, r, cost = x_new, r_new, c_new
        if np.max(np.abs(step)) < 1e-15 * max(1.0, np.max(np.abs(x))):
            break
    return x


def fit_resonator(sweep, refine=True, max_iter=MAX_ITER, step_tol=STEP_TOL):
    """Fit the notch S21 model to a frequency sweep.

    Parameters
    ----------
    sweep : FrequencySweep
    refine : bool
        Run the seven-parameter Levenberg-Marquardt refinement after the
        geometric initialization.
    max_iter : int
        Iteration cap for the refinement.
    step_tol : float
        Relative step tolerance of the refinement.

    Returns
    -------
    ResonatorFit
    """
    f = np.asarray(sweep.freq_hz, dtype=float)
    s21 = np.asarray(sweep.s21, dtype=complex)
    _check_dip(s21 * np.exp(-2j * np.pi * f * _initial_delay(f, s21)))
    init = _initial_params(f, s21)
    scaled = _Scaled(init, f)
    x0 = scaled.pack(init)

    def fun(x):
        return _split(scaled.model_and_jac(x)[0] - s21)

    def jac(x):
        return _split(scaled.model_and_jac(x)[1])

    n_iter = 0
    x = x0
    if refine:
        sol = optimize.least_squares(fun, x0, jac=jac, method="lm", xtol=step_tol, ftol=FTOL,
                                     gtol=FTOL, max_nfev=max_iter * (len(x0) + 1), x_scale=1.0)
        if sol.status == 0:
            raise ConvergenceError(f"resonator refinement exceeded {max_iter} iterations")
        if not np.all(np.isfinite(sol.x)):
            raise ConvergenceError("resonator refinement diverged")
        x, n_iter = _polish(fun, jac, sol.x), int(sol.nfev)
    params = scaled.unpack(x)
    q_int = internal_q(params.q_l, params.abs_qc, params.phi_rad)

    resid = fun(x)
    dof = max(len(resid) - len(x), 1)
    s2 = float(resid @ resid) / dof
    j = jac(x)
    try:
        cov = np.linalg.inv(j.T @ j) * s2
    except np.linalg.LinAlgError:
        cov = np.full((7, 7), np.nan)
    sd = np.sqrt(np.abs(np.diag(cov)))
    tau_sd = sd[6] / (2 * np.pi * scaled.span)
    sigmas = {
        "f0_hz": sd[0] * scaled.width,
        "q_l": params.q_l * sd[1],
        "abs_qc": params.abs_qc * sd[2],
        "phi_rad": sd[3],
        "amp": params.amp * sd[4],
        "theta_rad": math.sqrt(abs(cov[5, 5] + (scaled.fc / scaled.span) ** 2 * cov[6, 6]
                                   - 2 * (scaled.fc / scaled.span) * cov[5, 6])),
        "tau_s": tau_sd,
    }
    # d(Qi)/d(log Ql, log Qc, phi)
    qi2 = q_int * q_int
    grad = np.array([qi2 / params.q_l,
                     -qi2 * math.cos(params.phi_rad) / params.abs_qc,
                     -qi2 * math.sin(params.phi_rad) / params.abs_qc])
    sub = cov[1:4, 1:4]
    q_int_sigma = float(math.sqrt(abs(grad @ sub @ grad)))
    rms = float(np.sqrt(np.mean(np.abs(s21 - eval_s21(params, f)) ** 2)))
    return ResonatorFit(params, q_int, {k: float(v) for k, v in sigmas.items()}, rms, q_int_sigma, n_iter)


def with_amp(params, amp):
    return replace(params, amp=amp)
