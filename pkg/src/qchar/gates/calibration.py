"""Rabi-type calibration sequences built from simulated single-pulse propagators."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import optimize

from .pulses import DEFAULT_SAMPLES, gaussian_drag, omega0_for_area
from .qutrit import QutritConfig, simulate_qutrit

KINDS = ("amplitude", "frequency", "drag")


@dataclass(frozen=True)
class PulseSpec:
    t_g_s: float
    omega0: float
    beta: float = 0.0
    n_samples: int = DEFAULT_SAMPLES


@dataclass(frozen=True, eq=False)
class CalibrationMap:
    kind: str
    sweep: np.ndarray
    n_reps: np.ndarray
    population: np.ndarray  # shape (len(n_reps), len(sweep))
    observable: str

    def optimum(self):
        """Sweep value maximizing the observed population, per repetition count."""
        return self.sweep[np.argmax(self.population, axis=1)]

    def to_payload(self):
        return {"kind": self.kind, "sweep": self.sweep.tolist(), "n_reps": self.n_reps.tolist(),
                "population": self.population.tolist(), "observable": self.observable}


def pulse_unitary(spec, cfg, sign=1.0, phase=0.0):
    """Propagator of one X(+-pi/2)-type Gaussian/DRAG pulse.

    ``phase`` rotates the drive axis in the xy plane (``pi/2`` gives Y).
    """
    pulse = gaussian_drag(spec.t_g_s, sign * spec.omega0, spec.beta, cfg.anharm_rad_s, spec.n_samples)
    if phase:
        pulse = pulse.scaled(np.exp(1j * phase))
    return simulate_qutrit(pulse, cfg).unitary


def calibrate_pi2(t_g_s, cfg, beta=0.0, n_samples=DEFAULT_SAMPLES):
    """Amplitude ``Omega0`` for which a single pulse leaves ``P1 = 0.5``."""
    guess = omega0_for_area(t_g_s, math.pi / 2)

    def f(om):
        u = pulse_unitary(PulseSpec(t_g_s, om, beta, n_samples), cfg)
        return abs(u[1, 0]) ** 2 - 0.5

    return optimize.brentq(f, 0.7 * guess, 1.3 * guess, xtol=1e-14 * guess, rtol=1e-15)


def _sequence_population(u_a, u_b, n, level):
    step = u_b @ u_a
    total = np.linalg.matrix_power(step, int(n))
    return abs(total[level, 0]) ** 2


def _value(kind, spec, cfg, value):
    if kind == "amplitude":
        return replace(spec, omega0=spec.omega0 * value), cfg
    if kind == "frequency":
        return spec, replace(cfg, detuning_rad_s=value)
    return replace(spec, beta=value), cfg


def calibration_sweep(kind, n_reps, grid, spec, cfg, workers=1):
    """Population map versus (repetition count, sweep value).

    ``amplitude``: ``N`` repeated X_pi, each two X_pi/2 pulses, sweeping the
    amplitude scale factor; reports P1.
    ``frequency``: ``(X_pi/2 X_-pi/2)^N`` sweeping the detuning (rad/s); reports P0.
    ``drag``: ``(X_pi/2 X_-pi/2)^N`` sweeping beta; reports P0.
    """
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}")
    grid = np.asarray(grid, dtype=float)
    reps = np.asarray(n_reps, dtype=int)

    def column(value):
        s, c = _value(kind, spec, cfg, float(value))
        u_plus = pulse_unitary(s, c)
        if kind == "amplitude":
            return [_sequence_population(u_plus, u_plus, n, 1) for n in reps]
        u_minus = pulse_unitary(s, c, sign=-1.0)
        return [_sequence_population(u_plus, u_minus, n, 0) for n in reps]

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            cols = list(pool.map(column, grid))
    else:
        cols = [column(v) for v in grid]
    pop = np.array(cols).T
    return CalibrationMap(kind, grid, reps, pop, "P1" if kind == "amplitude" else "P0")
