"""Si2p photoemission: Shirley background, constrained doublet fit, oxide thickness."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize, signal

from .errors import (ConvergenceError, DivisionWarning, MissingMetalPeakError, NonConvergenceError,
                     NonPhysicalError)

SI0_REFERENCE_EV = 99.4
WINDOW_EV = (95.0, 110.0)
SPLIT_EV = 0.6
BRANCH = 2.0 / 3.0  # share of the doublet area in the 3/2 line
STATES = ("Si0", "Si1+", "Si2+", "Si3+", "Si4+")
OXIDE_SHIFTS_EV = (0.95, 1.75, 2.5, 3.6)
OXIDE_BOUND_EV = 0.4
SHIRLEY_TOL = 1e-6
SHIRLEY_MAX_ITER = 50
ANCHOR_EV = 0.5  # endpoint levels are averaged over this width at each window end
_FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))


@dataclass(frozen=True)
class DoubletComponent:
    state: str
    position_ev: float
    width_ev: float
    area: float
    lineshape: str
    area_sigma: float = 0.0
    detected: bool = True

    def __post_init__(self):
        if not self.width_ev > 0:
            raise ValueError("component width must be positive")

    @property
    def partner_ev(self):
        return self.position_ev + SPLIT_EV

    @property
    def areas(self):
        """(Si2p3/2, Si2p1/2) line areas."""
        return self.area * BRANCH, self.area * (1 - BRANCH)


@dataclass(frozen=True)
class StrohmeierConfig:
    lambda_m_nm: float
    lambda_ox_nm: float
    theta_rad: float = math.pi / 2
    n_ratio: float = 2.139

    def __post_init__(self):
        if not (self.lambda_m_nm > 0 and self.lambda_ox_nm > 0 and self.theta_rad > 0 and self.n_ratio > 0):
            raise ValueError("Strohmeier parameters must be positive")


@dataclass(frozen=True, eq=False)
class ShirleyResult:
    binding_ev: np.ndarray
    intensity: np.ndarray
    background: np.ndarray
    n_iter: int


@dataclass(frozen=True, eq=False)
class Si2pFit:
    components: tuple
    shift_ev: float
    binding_ev: np.ndarray  # corrected frame
    signal: np.ndarray  # background-subtracted, area-normalized
    background: np.ndarray  # in raw intensity units
    norm: float
    residual_rms: float

    @property
    def metal(self):
        return self.components[0]

    @property
    def oxide_area(self):
        return float(sum(c.area for c in self.components[1:]))

    def model(self, x=None):
        x = self.binding_ev if x is None else np.asarray(x, dtype=float)
        return sum(doublet(x, c.position_ev, c.width_ev, c.area, c.lineshape) for c in self.components)

    def to_payload(self):
        return {
            "shift_ev": self.shift_ev,
            "components": [{"state": c.state, "position_ev": c.position_ev, "partner_ev": c.partner_ev,
                            "width_ev": c.width_ev, "area": c.area, "area_sigma": c.area_sigma,
                            "lineshape": c.lineshape, "detected": c.detected} for c in self.components],
            "i_m": self.metal.area,
            "i_ox": self.oxide_area,
            "norm": self.norm,
            "residual_rms": self.residual_rms,
            "binding_ev": self.binding_ev.tolist(),
            "background": self.background.tolist(),
        }


# ---------------------------------------------------------------------------
# line shapes


def lorentzian(x, x0, fwhm, area):
    g = 0.5 * fwhm
    return area * g / math.pi / ((x - x0) ** 2 + g * g)


def gaussian(x, x0, fwhm, area):
    s = fwhm * _FWHM_TO_SIGMA
    return area / (s * math.sqrt(2 * math.pi)) * np.exp(-0.5 * ((x - x0) / s) ** 2)


def doublet(x, x0, fwhm, area, lineshape):
    """Spin-orbit pair: 3/2 line at ``x0`` and 1/2 line at ``x0 + 0.6`` with areas 2:1."""
    f = lorentzian if lineshape == "lorentzian" else gaussian
    return f(x, x0, fwhm, BRANCH * area) + f(x, x0 + SPLIT_EV, fwhm, (1 - BRANCH) * area)


# ---------------------------------------------------------------------------
# background


def _ascending(e, y):
    order = np.argsort(e)
    return e[order], y[order]


def shirley_from_peaks(e, peaks, lo_level, hi_level):
    """Shirley background generated by a known peak signal (forward model).

    ``lo_level`` is the level at the low-binding-energy end, ``hi_level`` at
    the high end; the background rises in proportion to the peak area at
    lower binding energy.
    """
    cum = integrate.cumulative_trapezoid(peaks, e, initial=0.0)
    total = cum[-1]
    if total <= 0:
        return np.full_like(e, lo_level, dtype=float)
    return lo_level + (hi_level - lo_level) * cum / total


def shirley_background(spec, lo_ev=WINDOW_EV[0], hi_ev=WINDOW_EV[1], tol=SHIRLEY_TOL,
                       max_iter=SHIRLEY_MAX_ITER, binding_ev=None, anchor_ev=ANCHOR_EV):
    """Iterative Shirley background over ``[lo_ev, hi_ev]``.

    The background is anchored to the mean intensities within ``anchor_ev``
    of the two window ends (``anchor_ev = 0`` uses the single end points) and
    iterated until its largest change is below ``tol`` times the endpoint step.
    ``binding_ev`` may replace the spectrum's own axis (e.g. a shifted frame).

    Returns
    -------
    ShirleyResult
        Window energies (ascending), intensities and background.
    """
    e_all = np.asarray(spec.binding_ev if binding_ev is None else binding_ev, dtype=float)
    e_all, y_all = _ascending(e_all, np.asarray(spec.intensity, dtype=float))
    if lo_ev >= hi_ev or lo_ev < e_all[0] - 1e-9 or hi_ev > e_all[-1] + 1e-9:
        raise ValueError(f"window [{lo_ev}, {hi_ev}] eV must lie inside the spectrum "
                         f"[{e_all[0]}, {e_all[-1]}]")
    sel = (e_all >= lo_ev - 1e-9) & (e_all <= hi_ev + 1e-9)
    e, y = e_all[sel], y_all[sel]
    if len(e) < 3:
        raise ValueError("Shirley window holds fewer than 3 points")
    i_lo = float(np.mean(y[e <= e[0] + anchor_ev]))
    i_hi = float(np.mean(y[e >= e[-1] - anchor_ev]))
    step = i_hi - i_lo
    bg = np.full_like(y, i_lo)
    if step == 0:
        return ShirleyResult(e, y, bg, 0)
    for it in range(1, max_iter + 1):
        new = shirley_from_peaks(e, y - bg, i_lo, i_hi)
        change = float(np.max(np.abs(new - bg)))
        bg = new
        if change < tol * abs(step):
            return ShirleyResult(e, y, bg, it)
    raise NonConvergenceError(f"Shirley iteration did not converge in {max_iter} iterations "
                              f"(last change {change:.3g})")


# ---------------------------------------------------------------------------
# doublet fit


def locate_metal_peak(e, y, smooth_ev=0.1, min_prominence=0.1):
    """Binding energy of the lowest-energy prominent peak, taken as Si0."""
    e, y = _ascending(np.asarray(e, float), np.asarray(y, float))
    base = y[0] + (y[-1] - y[0]) * (e - e[0]) / (e[-1] - e[0])
    net = y - base
    de = float(np.median(np.diff(e)))
    width = max(smooth_ev / de, 1.0)
    kx = np.arange(-int(4 * width), int(4 * width) + 1)
    kernel = np.exp(-0.5 * (kx / width) ** 2)
    smooth = np.convolve(net, kernel / kernel.sum(), mode="same")
    top = float(np.max(smooth))
    if not top > 1e-3 * float(np.max(np.abs(y))):
        raise MissingMetalPeakError("spectrum has no peak above its endpoint baseline")
    peaks, _ = signal.find_peaks(smooth, prominence=min_prominence * top)
    if len(peaks) == 0:
        raise MissingMetalPeakError("no Si0 candidate peak found")
    return float(e[peaks[0]])


def _unpack(v):
    x0, w0, a0 = v[0], v[1], v[2]
    ox = v[3:].reshape(-1, 3)
    return x0, w0, a0, ox


def _model(x, v):
    x0, w0, a0, ox = _unpack(v)
    out = doublet(x, x0, w0, a0, "lorentzian")
    for d, w, a in ox:
        out = out + doublet(x, x0 + d, w, a, "gaussian")
    return out


def fit_si2p(spec, window=WINDOW_EV, n_oxide=4, detection_sigma=3.0):
    """Fit an Si2p spectrum with a Lorentzian Si0 doublet and Gaussian oxide doublets.

    The spectrum is first shifted so the located Si0 peak sits at 99.4 eV;
    the Shirley background is built over ``window`` in that frame, the signal
    is normalized to unit area, and the 3 + 3*n_oxide parameter model is fit
    with each oxide position bounded to +-0.4 eV around its seed shift.
    The returned shift (added to the raw axis) puts the fitted Si0 3/2 line
    exactly at 99.4 eV.

    Raises
    ------
    MissingMetalPeakError
        No Si0 candidate.
    ConvergenceError
        The bounded least-squares fit failed.
    """
    if not 0 <= n_oxide <= len(OXIDE_SHIFTS_EV):
        raise ValueError("n_oxide must be between 0 and 4")
    raw_e = np.asarray(spec.binding_ev, dtype=float)
    raw_e, raw_y = _ascending(raw_e, np.asarray(spec.intensity, dtype=float))
    coarse = SI0_REFERENCE_EV - locate_metal_peak(raw_e, raw_y)
    shirley = shirley_background(spec, window[0], window[1], binding_ev=np.asarray(spec.binding_ev) + coarse)
    e = shirley.binding_ev
    net = shirley.intensity - shirley.background
    norm = float(integrate.trapezoid(net, e))
    if not norm > 0:
        raise NonPhysicalError("background-subtracted signal has non-positive area")
    y = net / norm

    x0 = SI0_REFERENCE_EV
    peak = float(np.interp(x0, e, y))
    w0 = 0.4
    a0 = max(peak * math.pi * w0 / 2 / BRANCH, 1e-3)
    v0 = [x0, w0, min(a0, 0.95)]
    lo = [x0 - 0.5, 0.05, 0.0]
    hi = [x0 + 0.5, 3.0, 10.0]
    for d in OXIDE_SHIFTS_EV[:n_oxide]:
        v0 += [d, 1.0, 0.05]
        lo += [d - OXIDE_BOUND_EV, 0.2, 0.0]
        hi += [d + OXIDE_BOUND_EV, 3.0, 10.0]
    v0, lo, hi = np.array(v0), np.array(lo), np.array(hi)

    sol = optimize.least_squares(lambda v: _model(e, v) - y, v0, bounds=(lo, hi), method="trf",
                                 xtol=1e-14, ftol=1e-14, gtol=1e-14, max_nfev=20000, x_scale="jac")
    if sol.status <= 0:
        raise ConvergenceError(f"Si2p fit failed: {sol.message}")
    v = sol.x
    dof = max(len(y) - len(v), 1)
    s2 = float(sol.fun @ sol.fun) / dof
    cov = np.linalg.pinv(sol.jac.T @ sol.jac) * s2
    sd = np.sqrt(np.abs(np.diag(cov)))

    fine = float(v[0]) - SI0_REFERENCE_EV
    shift = coarse - fine
    x0_fit, w0_fit, a0_fit, ox = _unpack(v)
    comps = [DoubletComponent("Si0", SI0_REFERENCE_EV, float(w0_fit), float(a0_fit), "lorentzian",
                              float(sd[2]), bool(a0_fit > detection_sigma * sd[2]))]
    for k, (d, w, a) in enumerate(ox):
        sa = float(sd[3 + 3 * k + 2])
        comps.append(DoubletComponent(STATES[k + 1], SI0_REFERENCE_EV + float(d), float(w), float(a),
                                      "gaussian", sa, bool(a > detection_sigma * sa)))
    return Si2pFit(tuple(comps), float(shift), e - fine, y, shirley.background, norm,
                   math.sqrt(float(sol.fun @ sol.fun) / len(y)))


# ---------------------------------------------------------------------------
# thickness


def ratio_term(i_m, i_ox, cfg, orientation="printed"):
    """Argument added to 1 inside the logarithm of the thickness formula.

    ``"printed"``: ``(N_m/N_ox)(I_m/I_ox)(lambda_ox/lambda_m)``.
    ``"standard"``: ``(N_m/N_ox)(I_ox/I_m)(lambda_m/lambda_ox)``.
    """
    if orientation == "printed":
        num, den, lam = i_m, i_ox, cfg.lambda_ox_nm / cfg.lambda_m_nm
    elif orientation == "standard":
        num, den, lam = i_ox, i_m, cfg.lambda_m_nm / cfg.lambda_ox_nm
    else:
        raise ValueError(f"unknown orientation {orientation!r}")
    if den == 0:
        if num == 0:
            raise ValueError("both intensities are zero")
        return math.inf
    return cfg.n_ratio * (num / den) * lam


def oxide_thickness(i_m, i_ox, cfg, orientation="printed"):
    """``d = lambda_ox sin(theta) ln(term + 1)`` in nm.

    A zero denominator intensity returns ``inf`` with a :class:`DivisionWarning`.
    """
    if i_m < 0 or i_ox < 0:
        raise ValueError("intensities must be nonnegative")
    term = ratio_term(i_m, i_ox, cfg, orientation)
    if math.isinf(term):
        warnings.warn("zero intensity in the ratio denominator; thickness is unbounded",
                      DivisionWarning, stacklevel=2)
        return math.inf
    return cfg.lambda_ox_nm * math.sin(cfg.theta_rad) * math.log1p(term)


def intensity_ratio_for_thickness(d_nm, cfg, orientation="printed"):
    """Inverse of :func:`oxide_thickness`: the ``I_m/I_ox`` giving thickness ``d_nm``."""
    term = math.expm1(d_nm / (cfg.lambda_ox_nm * math.sin(cfg.theta_rad)))
    if orientation == "printed":
        return term / (cfg.n_ratio * cfg.lambda_ox_nm / cfg.lambda_m_nm)
    return cfg.n_ratio * cfg.lambda_m_nm / cfg.lambda_ox_nm / term
