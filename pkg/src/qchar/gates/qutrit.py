"""Three-level transmon propagation in the drive's rotating frame."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import StepSizeError

MAX_ROTATION_PER_STEP = 0.05
SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class QutritConfig:
    """``anharm_rad_s = -inf`` gives the two-level limit (no |1>-|2> coupling)."""

    anharm_rad_s: float
    detuning_rad_s: float = 0.0

    def __post_init__(self):
        if self.anharm_rad_s == 0 or math.isnan(self.anharm_rad_s):
            raise ValueError("anharmonicity must be nonzero")

    @property
    def two_level(self):
        return math.isinf(self.anharm_rad_s)


@dataclass(frozen=True, eq=False)
class QutritResult:
    populations: np.ndarray
    unitary: np.ndarray
    state: np.ndarray


def _energies(cfg):
    d = cfg.detuning_rad_s
    e2 = 0.0 if cfg.two_level else 2 * d + cfg.anharm_rad_s
    return np.array([0.0, d, e2])


def _drive(omega, cfg):
    """``(Omega/2)(|1><0| + sqrt2 |2><1|) + h.c.`` for each sample.

    The complex envelope multiplies the raising operators, which makes the
    ``-i beta dOmega/dt / alpha`` DRAG quadrature leakage-suppressing for
    ``beta > 0`` and ``alpha < 0``.
    """
    h = np.zeros((len(omega), 3, 3), dtype=complex)
    h[:, 1, 0] = 0.5 * omega
    h[:, 0, 1] = 0.5 * np.conj(omega)
    if not cfg.two_level:
        h[:, 2, 1] = 0.5 * SQRT2 * omega
        h[:, 1, 2] = 0.5 * SQRT2 * np.conj(omega)
    return h


def simulate_qutrit(pulse, cfg, psi0=None):
    """Propagate the 3-level Schrodinger equation with classical RK4.

    ``H = Delta |1><1| + (2 Delta + alpha) |2><2| + V(t)`` with the drive
    coupling of :func:`_drive`.

    The diagonal part ``D = diag(0, Delta, 2 Delta + alpha)`` is removed
    exactly by working in its interaction picture; RK4 integrates the drive
    with step ``2 dt`` so that every stage lands on a pulse sample.

    Returns
    -------
    QutritResult
        Final populations, the 3x3 propagator in the frame of ``H`` and the
        final state started from ``psi0`` (default ``|0>``).
    """
    omega = np.asarray(pulse.envelope, dtype=complex)
    n = len(omega) - 1
    if n % 2:
        raise StepSizeError("pulse needs an even number of sample intervals")
    h = 2 * pulse.dt_s
    if np.max(np.abs(omega)) * h > MAX_ROTATION_PER_STEP:
        raise StepSizeError(f"max|Omega| * step = {np.max(np.abs(omega)) * h:.3g} rad exceeds "
                            f"{MAX_ROTATION_PER_STEP}")
    e = _energies(cfg)
    t = np.arange(n + 1) * pulse.dt_s
    phase = np.exp(1j * np.outer(t, e))  # e^{i E_j t}
    v = _drive(omega, cfg)
    # V_I(t)_{jk} = e^{i E_j t} V_{jk} e^{-i E_k t}
    vi = v * phase[:, :, None] * np.conj(phase[:, None, :])
    a = -1j * vi
    u = np.eye(3, dtype=complex)
    for k in range(0, n, 2):
        a0, a1, a2 = a[k], a[k + 1], a[k + 2]
        k1 = a0 @ u
        k2 = a1 @ (u + 0.5 * h * k1)
        k3 = a1 @ (u + 0.5 * h * k2)
        k4 = a2 @ (u + h * k3)
        u = u + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
    # back to the rotating frame: U = e^{-i D t_g} U_I
    u = np.conj(phase[-1])[:, None] * u
    psi0 = np.array([1, 0, 0], dtype=complex) if psi0 is None else np.asarray(psi0, dtype=complex)
    psi = u @ psi0
    return QutritResult(np.abs(psi) ** 2, u, psi)


def unitarity_error(u):
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))
