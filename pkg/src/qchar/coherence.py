"""Exponential decay fits, quality factors and time-series statistics."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import optimize

from .errors import ConvergenceError, EmptySeriesError, ShortSpanWarning


@dataclass(frozen=True)
class DecayFit:
    tau_s: float
    amp: float
    offset: float
    tau_sigma_s: float
    amp_sigma: float = float("nan")
    offset_sigma: float = float("nan")
    residual_rms: float = 0.0


@dataclass(frozen=True)
class SeriesStats:
    avg: float
    max: float
    q1: float
    q3: float
    span: float
    sem: float
    n: int


def quality_factor(f_hz, t1_s):
    """``Q = 2 pi f T1``."""
    return 2 * math.pi * f_hz * t1_s


def _linear_part(t, y, tau):
    e = np.exp(-t / tau)
    design = np.column_stack([e, np.ones_like(t)])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    r = y - design @ coef
    return coef, float(r @ r)


def _gauss_newton(t, y, v, max_steps=4):
    # final Gauss-Newton steps on (log tau, amp, offset); accepted unless the
    # cost grows beyond rounding, which the cost itself cannot resolve
    def fun(v):
        e = np.exp(-t * math.exp(-v[0]))
        r = v[1] * e + v[2] - y
        jac = np.column_stack([v[1] * e * t * math.exp(-v[0]), e, np.ones_like(t)])
        return r, jac

    r, jac = fun(v)
    cost = float(r @ r)
    for _ in range(max_steps):
        step = np.linalg.lstsq(jac, -r, rcond=None)[0]
        v_new = v + step
        if not np.all(np.isfinite(v_new)):
            break
        r_new, jac_new = fun(v_new)
        c_new = float(r_new @ r_new)
        if not c_new <= cost * (1 + 1e-10):
            break
        v, r, jac, cost = v_new, r_new, jac_new, c_new
        if np.max(np.abs(step)) < 1e-15 * max(1.0, float(np.max(np.abs(v)))):
            break
    return v


def fit_decay(trace, n_grid=241):
    """Fit ``P(t) = amp exp(-t/tau) + offset``.

    The two linear parameters are eliminated exactly (variable projection), so
    the profile over ``log tau`` is searched on a grid and polished with a
    bounded scalar minimizer. Uncertainties come from the linearized
    covariance of all three parameters scaled by the residual variance.
    """
    t = np.asarray(trace.delay_s, dtype=float)
    y_raw = np.asarray(trace.population, dtype=float)
    if len(t) < 6:
        raise ConvergenceError("decay fit needs at least 6 points")
    # standardize so the search path is the same for any affine rescaling of P
    y_mid = float(np.mean(y_raw))
    y_scale = float(np.std(y_raw))
    if not y_scale > 1e-12 * max(abs(y_mid), 1e-300):
        raise ConvergenceError("constant trace; tau unconstrained")
    y = (y_raw - y_mid) / y_scale
    positive = t[t > 0]
    dt_min = float(np.min(np.diff(np.sort(t)))) if len(t) > 1 else float(t.max())
    lo = math.log(max(dt_min, 1e-300) / 10)
    hi = math.log(10 * float(np.max(positive)) if len(positive) else 1.0)
    grid = np.linspace(lo, hi, n_grid)
    cost = np.array([_linear_part(t, y, math.exp(g))[1] for g in grid])
    i = int(np.argmin(cost))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, n_grid - 1)]
    res = optimize.minimize_scalar(lambda g: _linear_part(t, y, math.exp(g))[1], bounds=(a, b),
                                   method="bounded", options={"xatol": 1e-13})
    (amp, offset), _ = _linear_part(t, y, math.exp(res.x))

    # the profile cost is quadratic near its minimum, so polish on residuals
    def resid(v):
        return v[1] * np.exp(-t * math.exp(-v[0])) + v[2] - y

    sol = optimize.least_squares(resid, [res.x, amp, offset], method="lm", xtol=1e-15, ftol=1e-15,
                                 gtol=1e-15)
    if np.all(np.isfinite(sol.x)) and float(sol.fun @ sol.fun) <= _linear_part(t, y, math.exp(res.x))[1]:
        v = sol.x
    else:
        v = np.array([res.x, amp, offset])
    tau = math.exp(_gauss_newton(t, y, v)[0])
    (amp, offset), rss = _linear_part(t, y, tau)
    if abs(amp) <= 1e-9:
        raise ConvergenceError("decay amplitude indistinguishable from zero; tau unconstrained")
    amp, offset, rss = amp * y_scale, y_mid + offset * y_scale, rss * y_scale ** 2

    e = np.exp(-t / tau)
    jac = np.column_stack([amp * e * t / tau ** 2, e, np.ones_like(t)])
    dof = max(len(t) - 3, 1)
    s2 = rss / dof
    try:
        cov = np.linalg.inv(jac.T @ jac) * s2
        sd = np.sqrt(np.abs(np.diag(cov)))
    except np.linalg.LinAlgError:
        sd = np.full(3, np.inf)
    if i in (0, n_grid - 1):
        raise ConvergenceError("decay fit did not find an interior optimum for tau")
    if s2 > 0 and abs(amp) < 2 * sd[1]:
        raise ConvergenceError("decay amplitude not significant; tau unconstrained")
    if np.max(t) < tau:
        warnings.warn(f"max delay {np.max(t):.3g} s is shorter than fitted tau {tau:.3g} s",
                      ShortSpanWarning, stacklevel=2)
    return DecayFit(tau, float(amp), float(offset), float(sd[0]), float(sd[1]), float(sd[2]),
                    math.sqrt(rss / len(t)))


def series_stats(values):
    """Mean, maximum, linearly interpolated quartiles and span of a positive series."""
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise EmptySeriesError("series is empty")
    avg = float(np.mean(v))
    q1, q3 = (float(x) for x in np.percentile(v, [25, 75], method="linear"))
    sem = float(np.std(v, ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
    return SeriesStats(avg, float(np.max(v)), q1, q3, (q3 - q1) / avg, sem, int(v.size))


@dataclass(frozen=True)
class QubitRow:
    label: str
    freq_hz: float
    t1_avg_s: float
    t1_max_s: Optional[float]
    q_avg: float
    q_max: Optional[float]
    t2e_avg_s: Optional[float]
    t2e_max_s: Optional[float]
    t1_span: Optional[float]


@dataclass(frozen=True)
class CohortReport:
    rows: tuple
    mean_t1_avg_s: float
    std_t1_avg_s: float
    mean_q_avg: float
    mean_q_max: Optional[float]
    mean_t2e_avg_s: Optional[float]
    mean_t1_span: Optional[float]
    n_qubits: int

    def to_payload(self):
        return {
            "rows": [r.__dict__.copy() for r in self.rows],
            "mean_t1_avg_s": self.mean_t1_avg_s,
            "std_t1_avg_s": self.std_t1_avg_s,
            "mean_q_avg": self.mean_q_avg,
            "mean_q_max": self.mean_q_max,
            "mean_t2e_avg_s": self.mean_t2e_avg_s,
            "mean_t1_span": self.mean_t1_span,
            "n_qubits": self.n_qubits,
        }


def _avg_max(series, avg, mx):
    if len(series):
        st = series_stats(series)
        return st.avg, st.max, st.span
    return avg, mx, None


def _mean_of(values):
    vals = [v for v in values if v is not None]
    return float(np.mean(vals)) if vals else None


def aggregate_table(records):
    """Per-qubit averages, maxima and quality factors plus cohort means.

    Time series take precedence over reported summary columns when both are
    present.
    """
    recs = list(records.records) if hasattr(records, "records") else list(records)
    if not recs:
        raise EmptySeriesError("no qubit records")
    rows = []
    for r in recs:
        t1_avg, t1_max, span = _avg_max(r.t1_series_s, r.t1_avg_s, r.t1_max_s)
        if t1_avg is None:
            raise EmptySeriesError(f"qubit {r.label}: no T1 series or T1 average")
        t2_avg, t2_max, _ = _avg_max(r.t2e_series_s, r.t2e_avg_s, r.t2e_max_s)
        rows.append(QubitRow(
            r.label, r.freq_hz, t1_avg, t1_max, quality_factor(r.freq_hz, t1_avg),
            None if t1_max is None else quality_factor(r.freq_hz, t1_max), t2_avg, t2_max, span))
    t1 = np.array([row.t1_avg_s for row in rows])
    return CohortReport(
        tuple(rows),
        float(np.mean(t1)),
        float(np.std(t1, ddof=1)) if len(t1) > 1 else 0.0,
        float(np.mean([row.q_avg for row in rows])),
        _mean_of([row.q_max for row in rows]) if all(row.q_max is not None for row in rows) else None,
        _mean_of([row.t2e_avg_s for row in rows]),
        _mean_of([row.t1_span for row in rows]),
        len(rows),
    )


def _cell(v, scale, fmt):
    return "--" if v is None else format(v * scale, fmt)


def render_table(report):
    """Aligned plain-text rendering of a cohort report."""
    head = ["qubit", "f (GHz)", "T1avg (us)", "T1max (us)", "Qavg (1e6)", "Qmax (1e6)",
            "T2Eavg (us)", "T2Emax (us)"]
    body = [[r.label, _cell(r.freq_hz, 1e-9, ".3f"), _cell(r.t1_avg_s, 1e6, ".1f"),
             _cell(r.t1_max_s, 1e6, ".1f"), _cell(r.q_avg, 1e-6, ".2f"), _cell(r.q_max, 1e-6, ".2f"),
             _cell(r.t2e_avg_s, 1e6, ".1f"), _cell(r.t2e_max_s, 1e6, ".1f")] for r in report.rows]
    widths = [max(len(x) for x in col) for col in zip(head, *body)]
    lines = ["  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in [head] + body]
    lines.insert(1, "  ".join("-" * w for w in widths))
    lines.append("")
    lines.append(f"qubits: {report.n_qubits}   mean T1avg: {report.mean_t1_avg_s * 1e6:.1f} us "
                 f"(sd {report.std_t1_avg_s * 1e6:.1f})   mean Qavg: {report.mean_q_avg:.4g}")
    return "\n".join(lines) + "\n"


def lognormal_sigma_for_span(span):
    """Log-normal shape parameter whose population span ``(q3-q1)/mean`` equals ``span``."""
    z = 0.6744897501960817

    def f(s):
        return 2 * math.sinh(z * s) * math.exp(-0.5 * s * s) - span

    return optimize.brentq(f, 1e-12, 1.4)
