r"""Modified Bessel function of the second kind, order zero.

Three evaluation branches:

* ``x <= 2``: the ascending series

  .. math:: K_0(x) = -\left(\ln\frac{x}{2} + \gamma\right) I_0(x)
            + \sum_{k\ge1} \frac{(x^2/4)^k}{(k!)^2} H_k

* ``2 < x <= 25``: the integral :math:`e^x K_0(x) = \int_0^\infty e^{-x(\cosh t - 1)} dt`
  by the trapezoidal rule, which converges geometrically for this entire,
  doubly-exponentially decaying integrand.
* ``x > 25``: the asymptotic series
  :math:`e^x K_0(x) \sim \sqrt{\pi/2x}\,\sum_k (-1)^k [(2k-1)!!]^2 / (k!\,(8x)^k)`.

All branches are accurate to a few ulp on their domains.
"""
import numpy as np

EULER_GAMMA = 0.57721566490153286061
_SERIES_MAX = 2.0
_SERIES_TERMS = 30
_TRAP_H = 0.125
_TRAP_NODES = np.arange(0.0, 7.0 + _TRAP_H / 2, _TRAP_H)
_TRAP_W = np.full(_TRAP_NODES.shape, _TRAP_H)
_TRAP_W[0] = _TRAP_H / 2
_ASYMPTOTIC_MIN = 25.0
_ASYMPTOTIC_TERMS = 24


def _k0_series(x):
    y = 0.25 * x * x
    term = np.ones_like(x)
    i0 = np.ones_like(x)
    tail = np.zeros_like(x)
    harmonic = 0.0
    for k in range(1, _SERIES_TERMS + 1):
        term = term * y / (k * k)
        harmonic += 1.0 / k
        i0 = i0 + term
        tail = tail + term * harmonic
    return -(np.log(0.5 * x) + EULER_GAMMA) * i0 + tail


def _k0e_integral(x):
    # integrand underflows long before t = 7 for x > 2
    arg = np.multiply.outer(x, np.cosh(_TRAP_NODES) - 1.0)
    return np.exp(-arg) @ _TRAP_W


def _k0e_asymptotic(x):
    term = np.ones_like(x)
    total = np.ones_like(x)
    for k in range(1, _ASYMPTOTIC_TERMS + 1):
        term = -term * (2 * k - 1) ** 2 / (8.0 * k * x)
        total = total + term
    return np.sqrt(np.pi / (2.0 * x)) * total


def _k0e_large(x):
    out = np.empty_like(x)
    far = x > _ASYMPTOTIC_MIN
    out[far] = _k0e_asymptotic(x[far])
    out[~far] = _k0e_integral(x[~far])
    return out


def k0e(x):
    """Exponentially scaled ``K0``: ``exp(x) * K0(x)`` for ``x > 0``."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    flat_x, flat_out = x.reshape(-1), out.reshape(-1)
    small = flat_x <= _SERIES_MAX
    if np.any(flat_x <= 0) or np.any(np.isnan(flat_x)):
        raise ValueError("k0e requires x > 0")
    flat_out[small] = _k0_series(flat_x[small]) * np.exp(flat_x[small])
    flat_out[~small] = _k0e_large(flat_x[~small])
    return out if out.ndim else float(out)


def k0(x):
    """Zeroth-order modified Bessel function of the second kind, ``x > 0``."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    flat_x, flat_out = x.reshape(-1), out.reshape(-1)
    if np.any(flat_x <= 0) or np.any(np.isnan(flat_x)):
        raise ValueError("k0 requires x > 0")
    small = flat_x <= _SERIES_MAX
    flat_out[small] = _k0_series(flat_x[small])
    flat_out[~small] = _k0e_large(flat_x[~small]) * np.exp(-flat_x[~small])
    return out if out.ndim else float(out)


def log_sinh_k0(x):
    """``log(sinh(x) * K0(x))`` without overflow for large ``x``."""
    x = np.asarray(x, dtype=float)
    # sinh(x) K0(x) = (1 - exp(-2x)) / 2 * exp(x) K0(x)
    return np.log(-0.5 * np.expm1(-2.0 * x)) + np.log(k0e(x))
