"""Gaussian and DRAG drive envelopes."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

DEFAULT_SAMPLES = 4096


@dataclass(frozen=True, eq=False)
class PulseShape:
    """Sampled complex drive ``Omega(t)`` (rad/s) on ``t_k = k dt``, ``k = 0..n``.

    ``envelope`` holds ``n + 1`` samples so both endpoints are present and
    ``n * dt == t_g_s``.
    """

    dt_s: float
    envelope: np.ndarray
    t_g_s: float

    def __post_init__(self):
        env = np.array(self.envelope, dtype=complex)
        env.setflags(write=False)
        object.__setattr__(self, "envelope", env)
        n = len(env) - 1
        if n < 1 or not math.isclose(n * self.dt_s, self.t_g_s, rel_tol=1e-12):
            raise ValueError("envelope length times dt must equal the gate length")

    @property
    def n_samples(self):
        return len(self.envelope) - 1

    @property
    def times(self):
        return np.arange(len(self.envelope)) * self.dt_s

    def scaled(self, factor):
        return PulseShape(self.dt_s, self.envelope * factor, self.t_g_s)

    def area(self):
        """Trapezoid integral of the real part (rotation angle for a resonant drive)."""
        return float(np.trapezoid(self.envelope.real, dx=self.dt_s))

    def to_payload(self):
        return {"t_s": self.times.tolist(), "re": self.envelope.real.tolist(),
                "im": self.envelope.imag.tolist(), "dt_s": self.dt_s, "t_g_s": self.t_g_s}


def gaussian_values(t, t_g, omega0):
    sigma = t_g / 4
    return omega0 * (np.exp(-((t - t_g / 2) ** 2) / (2 * sigma * sigma)) - math.exp(-t_g * t_g / (8 * sigma * sigma)))


def gaussian_derivative(t, t_g, omega0):
    sigma = t_g / 4
    u = t - t_g / 2
    return -omega0 * u / (sigma * sigma) * np.exp(-u * u / (2 * sigma * sigma))


def gaussian_area(t_g, omega0):
    """Closed-form ``int_0^t_g Omega dt`` for the truncated, offset Gaussian."""
    sigma = t_g / 4
    return omega0 * (sigma * math.sqrt(2 * math.pi) * special.erf(t_g / (2 * math.sqrt(2) * sigma))
                     - t_g * math.exp(-t_g * t_g / (8 * sigma * sigma)))


def omega0_for_area(t_g, area):
    return area / gaussian_area(t_g, 1.0)


def gaussian_envelope(t_g, omega0, n_samples=DEFAULT_SAMPLES):
    """Gaussian with ``sigma = t_g / 4``, offset so it vanishes at both ends."""
    if n_samples < 16:
        raise ValueError("n_samples must be >= 16")
    dt = t_g / n_samples
    t = np.arange(n_samples + 1) * dt
    env = gaussian_values(t, t_g, omega0)
    env[0] = env[-1] = 0.0  # both terms equal omega0 * e^-2 analytically
    return PulseShape(dt, env, t_g)


def _derivative(base):
    env = base.envelope.real
    d = np.empty_like(env)
    d[1:-1] = (env[2:] - env[:-2]) / (2 * base.dt_s)
    d[0] = (env[1] - env[0]) / base.dt_s
    d[-1] = (env[-1] - env[-2]) / base.dt_s
    return d


def drag_envelope(base, beta, anharm_rad_s, gaussian=None):
    """``Omega - i beta dOmega/dt / alpha``.

    ``gaussian`` may carry ``(t_g, omega0)`` to use the analytic Gaussian
    derivative; otherwise centered finite differences are used.
    """
    if np.any(base.envelope.imag != 0):
        raise ValueError("DRAG base pulse must be real")
    if beta == 0:
        return base
    if gaussian is not None:
        deriv = gaussian_derivative(base.times, *gaussian)
    else:
        deriv = _derivative(base)
    if math.isinf(anharm_rad_s):
        return base
    env = base.envelope.real - 1j * beta * deriv / anharm_rad_s
    return PulseShape(base.dt_s, env, base.t_g_s)


def gaussian_drag(t_g, omega0, beta, anharm_rad_s, n_samples=DEFAULT_SAMPLES):
    base = gaussian_envelope(t_g, omega0, n_samples)
    return drag_envelope(base, beta, anharm_rad_s, gaussian=(t_g, omega0))
