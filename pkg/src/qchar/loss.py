"""Three-channel loss model (TLS + thermal quasiparticles + other) and SPR regression."""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np
from scipy import constants, optimize

from .errors import ConvergenceError, IdentifiabilityWarning, InsufficientSpanError, NonPhysicalError
from .special import log_sinh_k0

H_OVER_KB = constants.h / constants.k  # K / Hz
BETA_MAX = 4.0
DELTA0_INIT_K = 1.76 * 4.2
# 1/Q_QP underflows to exactly zero beyond this log(Q)
_LOG_Q_MAX = math.log(np.finfo(float).max)
QP_SENTINEL = float(np.finfo(float).max)
# z-score above which a temperature counts as resolving quasiparticle loss
QP_SIGNIFICANCE = 3.0


@dataclass(frozen=True)
class LossModelParams:
    q_tls0: float
    d_sat: float
    beta1: float
    beta2: float
    a_qp: float
    delta0_k: float
    q_other: float = math.inf

    def __post_init__(self):
        vals = asdict(self)
        if not all(v > 0 for v in vals.values()):
            raise NonPhysicalError(f"loss-model parameters must be positive: {vals}")
        if not (0 < self.beta1 < BETA_MAX and 0 < self.beta2 < BETA_MAX):
            raise NonPhysicalError("beta1 and beta2 must lie in (0, 4)")


@dataclass(frozen=True)
class LossFit:
    params: LossModelParams
    sigmas: dict
    chi2_red: float
    n_points: int
    fixed: tuple = ()
    qp_temperatures: int = 0


@dataclass(frozen=True)
class SurfaceLossFit:
    tan_delta_s: float
    tan_delta_s_sigma: float
    bulk_q_lower_bound: float
    residual_sigma: float = 0.0


def _half_x(t_k, f_hz):
    return 0.5 * H_OVER_KB * np.asarray(f_hz, dtype=float) / np.asarray(t_k, dtype=float)


def q_tls(p, nbar, t_k, f_hz):
    """TLS-limited quality factor including power and thermal saturation."""
    nbar = np.asarray(nbar, dtype=float)
    t_k = np.asarray(t_k, dtype=float)
    if np.any(t_k <= 0) or np.any(nbar < 0):
        raise ValueError("q_tls requires t_k > 0 and nbar >= 0")
    th = np.tanh(_half_x(t_k, f_hz))
    sat = nbar ** p.beta2 / (p.d_sat * t_k ** p.beta1)
    out = p.q_tls0 * np.sqrt(1.0 + sat * th) / th
    return out if out.ndim else float(out)


def log_q_qp(p, t_k, f_hz):
    t_k = np.asarray(t_k, dtype=float)
    if np.any(t_k <= 0):
        raise ValueError("q_qp requires t_k > 0")
    x = _half_x(t_k, f_hz)
    return math.log(p.a_qp) + p.delta0_k / t_k - log_sinh_k0(x)


def q_qp(p, t_k, f_hz):
    """Thermal-quasiparticle quality factor; saturates at ``QP_SENTINEL`` when frozen out."""
    lq = np.asarray(log_q_qp(p, t_k, f_hz))
    out = np.where(lq >= _LOG_Q_MAX, QP_SENTINEL, np.exp(np.minimum(lq, _LOG_Q_MAX)))
    return out if out.ndim else float(out)


def _inv_components(p, nbar, t_k, f_hz):
    inv_tls = 1.0 / np.asarray(q_tls(p, nbar, t_k, f_hz))
    lq = np.asarray(log_q_qp(p, t_k, f_hz))
    inv_qp = np.exp(-lq)  # exact 0 for frozen-out channel
    inv_other = 0.0 if math.isinf(p.q_other) else 1.0 / p.q_other
    return inv_tls, inv_qp, inv_other


def q_total(p, nbar, t_k, f_hz):
    """Parallel combination ``1/Q = 1/Q_TLS + 1/Q_QP + 1/Q_other``."""
    inv_tls, inv_qp, inv_other = _inv_components(p, nbar, t_k, f_hz)
    out = 1.0 / (inv_tls + inv_qp + inv_other)
    return out if np.ndim(out) else float(out)


# ---------------------------------------------------------------------------
# fitting

_NAMES = ("q_tls0", "d_sat", "beta1", "beta2", "a_qp", "delta0_k", "q_other")


def _to_vec(p):
    def logit(b):
        u = b / BETA_MAX
        return math.log(u / (1 - u))

    return np.array([math.log(p.q_tls0), math.log(p.d_sat), logit(p.beta1), logit(p.beta2),
                     math.log(p.a_qp), math.log(p.delta0_k), math.log(p.q_other)])


def _from_vec(v):
    def sig(u):
        return BETA_MAX / (1 + math.exp(-u))

    return LossModelParams(math.exp(v[0]), math.exp(v[1]), sig(v[2]), sig(v[3]),
                           math.exp(v[4]), math.exp(v[5]), math.exp(v[6]))


def _natural_scale(p):
    """d(natural)/d(fit coordinate) for each parameter."""
    def dsig(b):
        return b * (1 - b / BETA_MAX)

    return np.array([p.q_tls0, p.d_sat, dsig(p.beta1), dsig(p.beta2), p.a_qp, p.delta0_k, p.q_other])


def default_init(grid):
    t, nb, q = grid.temperature_k, grid.nbar, grid.q_int
    order = np.lexsort((nb, t))
    q0 = float(q[order[0]])
    beta1, beta2 = 1.0, 0.5
    pos = nb > 0
    d_sat = float(np.median(nb[pos] ** beta2 / t[pos] ** beta1)) if np.any(pos) else 1.0
    t_hot = float(np.max(t))
    hot = t == t_hot
    f = grid.freq_hz
    a_qp = math.exp(math.log(float(np.min(q[hot]))) - DELTA0_INIT_K / t_hot
                    + float(log_sinh_k0(_half_x(t_hot, f))))
    return LossModelParams(q0, d_sat, beta1, beta2, a_qp, DELTA0_INIT_K, 3.0 * float(np.max(q)))


def _qp_significance(p, grid, scale, chi2_red):
    """Per-temperature significance of the fitted quasiparticle loss.

    For each temperature the QP share of ``1/Q`` at every point is divided by
    that point's relative uncertainty (residual-scaled) and the ratios are
    added in quadrature.
    """
    t, nb, q = grid.temperature_k, grid.nbar, grid.q_int
    inv_tls, inv_qp, inv_other = _inv_components(p, nb, t, grid.freq_hz)
    share = inv_qp / (inv_tls + inv_qp + inv_other)
    rel_sd = math.sqrt(max(chi2_red, 0.0)) * scale * q
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(rel_sd > 0, share / rel_sd, np.where(share > 0, np.inf, 0.0))
    temps = np.unique(t)
    return temps, np.array([math.sqrt(float(np.sum(z[t == tt] ** 2))) for tt in temps]), share


def fit_loss_model(grid, init=None, max_nfev=40000):
    """Weighted least-squares fit of the loss model to a (T, nbar) grid.

    Residuals are ``(1/Q_model - 1/Q_meas) / sigma(1/Q_meas)`` with
    ``sigma(1/Q) = q_int_sigma / q_int**2``; without uncertainties every point
    carries its own value as scale (relative residuals). All parameters are
    optimized in log (or logit, for the exponents) coordinates.

    A_QP and Delta0 are only separable when quasiparticle loss is resolved
    at two or more temperatures (significance ``QP_SIGNIFICANCE`` above the
    residual scatter). With one such temperature Delta0 is held at its
    initial value and only A_QP is fit; with none the channel is disabled
    (``a_qp = QP_SENTINEL``). Both cases emit an IdentifiabilityWarning and
    list the held parameters in ``LossFit.fixed``.

    Returns
    -------
    LossFit
    """
    t, nb, q = grid.temperature_k, grid.nbar, grid.q_int
    if len(np.unique(t)) < 4 or len(np.unique(nb)) < 4:
        raise InsufficientSpanError("loss grid needs >= 4 temperatures and >= 4 powers")
    sig = grid.q_int_sigma
    if sig is not None and np.all(np.isfinite(sig)) and np.all(sig > 0):
        scale = sig / q ** 2
    else:
        scale = 1.0 / q
    target = 1.0 / q
    f = grid.freq_hz
    p0 = init if init is not None else default_init(grid)

    def solve(v_start, free):
        def full(u):
            v = v_start.copy()
            v[free] = u
            return v

        def resid(u):
            try:
                p = _from_vec(full(u))
            except (NonPhysicalError, OverflowError):
                return np.full(len(q), 1e30)
            inv_tls, inv_qp, inv_other = _inv_components(p, nb, t, f)
            return (inv_tls + inv_qp + inv_other - target) / scale

        with np.errstate(over="ignore", invalid="ignore"):
            sol = optimize.least_squares(resid, v_start[free], method="lm", xtol=1e-14, ftol=1e-14,
                                         gtol=1e-14, max_nfev=max_nfev, x_scale=1.0)
        if sol.status == 0 or not np.all(np.isfinite(sol.x)):
            raise ConvergenceError("loss-model fit did not converge")
        chi2_red = float(sol.fun @ sol.fun) / max(len(q) - len(sol.x), 1)
        cov = np.linalg.pinv(sol.jac.T @ sol.jac) * chi2_red
        sd = np.zeros(len(v_start))
        sd[free] = np.sqrt(np.abs(np.diag(cov)))
        return full(sol.x), sd, chi2_red

    v0 = _to_vec(p0)
    free = np.ones(len(v0), bool)
    v, sd, chi2_red = solve(v0, free)
    temps, z, share = _qp_significance(_from_vec(v), grid, scale, chi2_red)
    n_qp = int(np.count_nonzero(z >= QP_SIGNIFICANCE))
    fixed = ()
    if n_qp < 2:
        start = v0.copy()
        free[5] = False
        fixed = ("delta0_k",)
        if n_qp == 0:
            start[4] = math.log(QP_SENTINEL)
            free[4] = False
            fixed = ("a_qp", "delta0_k")
        v, sd, chi2_red = solve(start, free)
        warnings.warn(f"quasiparticle loss resolved at {n_qp} temperature(s) (max QP loss share "
                      f"{float(np.max(share)):.2g}); grid lacks high-temperature points, holding "
                      f"{', '.join(fixed)} fixed", IdentifiabilityWarning, stacklevel=2)
    elif not math.isfinite(sd[5]) or sd[5] > 0.5:
        warnings.warn(f"Delta0 poorly constrained (log-space sigma {sd[5]:.2g})",
                      IdentifiabilityWarning, stacklevel=2)
    p = _from_vec(v)
    sigmas = dict(zip(_NAMES, (sd * _natural_scale(p)).tolist()))
    return LossFit(p, sigmas, chi2_red, len(q), fixed, n_qp)


def fit_surface_loss(points):
    """Through-origin regression ``1/Q_TLS,0 = p_MS * tan(delta_s)``.

    Points are inverse-variance weighted when every one carries a positive
    uncertainty, otherwise equally weighted. The bulk bound is
    ``1/std(residuals of 1/Q_TLS,0)``.
    """
    pts = list(points.points) if hasattr(points, "points") else list(points)
    if len(pts) < 3:
        raise InsufficientSpanError("surface-loss fit needs >= 3 points")
    x = np.array([pt.p_ms for pt in pts], dtype=float)
    q = np.array([pt.q_tls0 for pt in pts], dtype=float)
    if x.max() / x.min() < 3:
        raise InsufficientSpanError("p_ms must span at least a factor of 3")
    y = 1.0 / q
    sig = np.array([np.nan if pt.q_tls0_sigma is None else pt.q_tls0_sigma for pt in pts], dtype=float)
    if np.all(np.isfinite(sig)) and np.all(sig > 0):
        w = (q ** 2 / sig) ** 2
    else:
        w = np.ones_like(x)
    sxx = float(np.sum(w * x * x))
    tan = float(np.sum(w * x * y) / sxx)
    r = y - tan * x
    n = len(x)
    chi2_red = float(np.sum(w * r * r)) / (n - 1)
    tan_sigma = math.sqrt(chi2_red / sxx)
    resid_sigma = float(np.std(r, ddof=1))
    bound = math.inf if resid_sigma == 0 else 1.0 / resid_sigma
    if not tan > 0:
        raise NonPhysicalError("fitted surface loss tangent is not positive")
    return SurfaceLossFit(tan, tan_sigma, bound, resid_sigma)
