"""Single-qubit gate pulses, three-level simulation, calibration and RB analysis."""
from .calibration import CalibrationMap, PulseSpec, calibrate_pi2, calibration_sweep, pulse_unitary
from .clifford import clifford_group, inverse_index, random_sequence, sequence_survival
from .pulses import PulseShape, drag_envelope, gaussian_area, gaussian_drag, gaussian_envelope, omega0_for_area
from .qutrit import QutritConfig, QutritResult, simulate_qutrit, unitarity_error
from .rb import RbFit, limit_report, rb_fit, t1_limit_infidelity

__all__ = [
    "CalibrationMap", "PulseSpec", "calibrate_pi2", "calibration_sweep", "pulse_unitary",
    "clifford_group", "inverse_index", "random_sequence", "sequence_survival",
    "PulseShape", "drag_envelope", "gaussian_area", "gaussian_drag", "gaussian_envelope",
    "omega0_for_area", "QutritConfig", "QutritResult", "simulate_qutrit", "unitarity_error",
    "RbFit", "limit_report", "rb_fit", "t1_limit_infidelity",
]
