"""Typed datasets, JSON validation and serialization.

Every dataset file is a JSON document::

    {"kind": "sweep", "units": {"freq": "GHz"}, "data": {"freq": [...], ...}}

``validate_dataset`` checks the document against the schema for its kind,
converts every tagged field to SI and returns an immutable dataclass.
``to_document`` is the inverse and always writes SI tags, so
``validate_dataset(to_document(ds))`` reproduces ``ds`` exactly.
"""
from __future__ import annotations

import csv
import io
import json
import warnings
from dataclasses import dataclass, field, fields
from typing import Optional

import numpy as np

from . import units
from .errors import InvariantError, PopulationRangeWarning, SchemaError

KINDS = ("sweep", "loss_grid", "decay", "cpmg_set", "rb", "xps", "qubit_record", "spr_set")
TRACE_KINDS = ("T1", "Echo", "Cpmg")
POPULATION_SLACK = (-0.2, 1.2)


def _frozen(values, dtype=float):
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


def _eq(a, b):
    if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
        a = np.asarray(a)
        b = np.asarray(b)
        if a.shape != b.shape:
            return False
        if a.dtype.kind in "fc":
            return bool(np.array_equal(a, b, equal_nan=True))
        return bool(np.array_equal(a, b))
    if isinstance(a, tuple) and isinstance(b, tuple):
        return len(a) == len(b) and all(_eq(x, y) for x, y in zip(a, b))
    return a == b


class _ArrayEq:
    """Mixin giving dataclasses holding numpy arrays a usable ``==``."""

    def __eq__(self, other):
        if type(self) is not type(other):
            return NotImplemented
        return all(_eq(getattr(self, f.name), getattr(other, f.name)) for f in fields(self))

    __hash__ = None


@dataclass(frozen=True, eq=False)
class FrequencySweep(_ArrayEq):
    freq_hz: np.ndarray
    s21: np.ndarray
    power_dbm: Optional[float] = None
    temperature_k: Optional[float] = None

    kind = "sweep"

    def __post_init__(self):
        object.__setattr__(self, "freq_hz", _frozen(self.freq_hz))
        object.__setattr__(self, "s21", _frozen(self.s21, complex))
        if self.freq_hz.ndim != 1 or self.freq_hz.shape != self.s21.shape:
            raise InvariantError("freq_hz and s21 must be 1-d arrays of equal length")
        if len(self.freq_hz) < 8:
            raise InvariantError("a sweep needs at least 8 points")
        _strictly_increasing(self.freq_hz, "freq_hz")
        if not np.all(np.isfinite(self.s21)):
            raise InvariantError("s21 contains non-finite values")


@dataclass(frozen=True, eq=False)
class DecayTrace(_ArrayEq):
    delay_s: np.ndarray
    population: np.ndarray
    kind: str = "T1"
    flags: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "delay_s", _frozen(self.delay_s))
        object.__setattr__(self, "population", _frozen(self.population))
        if self.kind not in TRACE_KINDS:
            raise InvariantError(f"trace kind must be one of {TRACE_KINDS}, got {self.kind!r}")
        if self.delay_s.ndim != 1 or self.delay_s.shape != self.population.shape:
            raise InvariantError("delay_s and population must be 1-d arrays of equal length")
        if np.any(self.delay_s < 0):
            raise InvariantError("delays must be nonnegative")
        _strictly_increasing(self.delay_s, "delay_s")
        if not np.all(np.isfinite(self.population)):
            raise InvariantError("population contains non-finite values")
        lo, hi = POPULATION_SLACK
        if np.any(self.population < lo) or np.any(self.population > hi):
            raise InvariantError(f"population outside the accepted range [{lo}, {hi}]")
        if np.any(self.population < 0) or np.any(self.population > 1):
            if "population_out_of_unit_interval" not in self.flags:
                object.__setattr__(self, "flags", tuple(self.flags) + ("population_out_of_unit_interval",))
            warnings.warn("population values outside [0, 1] accepted within calibration slack",
                          PopulationRangeWarning, stacklevel=3)


@dataclass(frozen=True, eq=False)
class LossGrid(_ArrayEq):
    temperature_k: np.ndarray
    nbar: np.ndarray
    q_int: np.ndarray
    q_int_sigma: np.ndarray
    freq_hz: float

    kind = "loss_grid"

    def __post_init__(self):
        for name in ("temperature_k", "nbar", "q_int", "q_int_sigma"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        n = self.temperature_k.shape
        if any(getattr(self, k).shape != n for k in ("nbar", "q_int", "q_int_sigma")) or len(n) != 1:
            raise InvariantError("loss grid columns must be 1-d and of equal length")
        if np.any(self.temperature_k <= 0):
            raise InvariantError("temperature_k must be positive")
        if np.any(self.nbar < 0):
            raise InvariantError("nbar must be nonnegative")
        if np.any(self.q_int <= 0):
            raise InvariantError("q_int must be positive")
        if np.any(self.q_int_sigma < 0):
            raise InvariantError("q_int_sigma must be nonnegative")
        if not self.freq_hz > 0:
            raise InvariantError("freq_hz must be positive")
        object.__setattr__(self, "freq_hz", float(self.freq_hz))

    @property
    def entries(self):
        return list(zip(self.temperature_k.tolist(), self.nbar.tolist(),
                        self.q_int.tolist(), self.q_int_sigma.tolist()))


@dataclass(frozen=True, eq=False)
class QubitRecord(_ArrayEq):
    """One qubit: frequency plus either T1/T2E time series or reported summaries."""

    label: str
    freq_hz: float
    t1_series_s: np.ndarray = field(default_factory=lambda: np.zeros(0))
    t1_times: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    t2e_series_s: np.ndarray = field(default_factory=lambda: np.zeros(0))
    t2e_times: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    t1_avg_s: Optional[float] = None
    t1_max_s: Optional[float] = None
    t2e_avg_s: Optional[float] = None
    t2e_max_s: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "t1_series_s", _frozen(self.t1_series_s))
        object.__setattr__(self, "t2e_series_s", _frozen(self.t2e_series_s))
        object.__setattr__(self, "t1_times", _frozen(self.t1_times, np.int64))
        object.__setattr__(self, "t2e_times", _frozen(self.t2e_times, np.int64))
        if not self.freq_hz > 0:
            raise InvariantError(f"qubit {self.label}: frequency must be positive")
        for values, times in ((self.t1_series_s, self.t1_times), (self.t2e_series_s, self.t2e_times)):
            if values.shape != times.shape:
                raise InvariantError(f"qubit {self.label}: series and timestamps differ in length")
            if np.any(values <= 0):
                raise InvariantError(f"qubit {self.label}: times must be positive")
        for name in ("t1_avg_s", "t1_max_s", "t2e_avg_s", "t2e_max_s"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise InvariantError(f"qubit {self.label}: {name} must be positive")


@dataclass(frozen=True, eq=False)
class CpmgCurve(_ArrayEq):
    n_pulses: int
    t_pi_s: float
    trace: DecayTrace

    def __post_init__(self):
        if int(self.n_pulses) != self.n_pulses or self.n_pulses < 1:
            raise InvariantError("n_pulses must be an integer >= 1")
        if self.t_pi_s < 0:
            raise InvariantError("t_pi_s must be nonnegative")
        object.__setattr__(self, "n_pulses", int(self.n_pulses))
        object.__setattr__(self, "t_pi_s", float(self.t_pi_s))


@dataclass(frozen=True, eq=False)
class CpmgSet(_ArrayEq):
    curves: tuple
    t1_s: Optional[float] = None
    gamma_p: Optional[float] = None

    kind = "cpmg_set"

    def __post_init__(self):
        object.__setattr__(self, "curves", tuple(sorted(self.curves, key=lambda c: c.n_pulses)))
        if not self.curves:
            raise InvariantError("cpmg_set has no curves")
        ns = [c.n_pulses for c in self.curves]
        if len(set(ns)) != len(ns):
            raise InvariantError("duplicate pulse counts in cpmg_set")


@dataclass(frozen=True, eq=False)
class RbDataset(_ArrayEq):
    lengths: np.ndarray
    survival: np.ndarray
    n_random: int = 1
    n_shots: int = 1
    survival_sigma: Optional[np.ndarray] = None

    kind = "rb"

    def __post_init__(self):
        object.__setattr__(self, "lengths", _frozen(self.lengths, np.int64))
        object.__setattr__(self, "survival", _frozen(self.survival))
        if self.survival_sigma is not None:
            object.__setattr__(self, "survival_sigma", _frozen(self.survival_sigma))
            if self.survival_sigma.shape != self.survival.shape:
                raise InvariantError("survival_sigma length mismatch")
        if self.lengths.ndim != 1 or self.lengths.shape != self.survival.shape:
            raise InvariantError("lengths and survival must be 1-d arrays of equal length")
        _strictly_increasing(self.lengths, "lengths")
        if np.any(self.lengths < 0):
            raise InvariantError("sequence lengths must be nonnegative")
        if np.any(self.survival < 0) or np.any(self.survival > 1):
            raise InvariantError("survival must lie in [0, 1]")
        if self.n_random < 1 or self.n_shots < 1:
            raise InvariantError("n_random and n_shots must be positive")


@dataclass(frozen=True, eq=False)
class XpsSpectrum(_ArrayEq):
    binding_ev: np.ndarray
    intensity: np.ndarray
    dwell_s: Optional[float] = None
    n_scans: Optional[int] = None

    kind = "xps"

    def __post_init__(self):
        object.__setattr__(self, "binding_ev", _frozen(self.binding_ev))
        object.__setattr__(self, "intensity", _frozen(self.intensity))
        if self.binding_ev.ndim != 1 or self.binding_ev.shape != self.intensity.shape:
            raise InvariantError("binding_ev and intensity must be 1-d arrays of equal length")
        if len(self.binding_ev) < 3:
            raise InvariantError("spectrum too short")
        d = np.diff(self.binding_ev)
        if not (np.all(d > 0) or np.all(d < 0)):
            raise InvariantError("binding_ev must be strictly monotone")
        if np.any(self.intensity < 0):
            raise InvariantError("intensity must be nonnegative")


@dataclass(frozen=True, eq=False)
class SprPoint:
    p_ms: float
    q_tls0: float
    q_tls0_sigma: float = 0.0

    def __post_init__(self):
        if not 0 < self.p_ms < 1:
            raise InvariantError("p_ms must lie in (0, 1)")
        if not self.q_tls0 > 0:
            raise InvariantError("q_tls0 must be positive")

    def __eq__(self, other):
        if type(self) is not type(other):
            return NotImplemented
        return (self.p_ms, self.q_tls0, self.q_tls0_sigma) == (other.p_ms, other.q_tls0, other.q_tls0_sigma)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class SprSet(_ArrayEq):
    points: tuple

    kind = "spr_set"

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))


@dataclass(frozen=True, eq=False)
class QubitCohort(_ArrayEq):
    records: tuple

    kind = "qubit_record"

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        if not self.records:
            raise InvariantError("qubit_record document has no qubits")


def _strictly_increasing(arr, name):
    if np.any(np.diff(arr) <= 0):
        raise InvariantError(f"{name} must be strictly increasing")


# ---------------------------------------------------------------------------
# schema tables: field -> (dimension or None, required, shape) where shape is
# "array", "scalar", "int", "str" or "str_array"

_SCHEMAS = {
    "sweep": {
        "freq": ("frequency", True, "array"),
        "s21_re": (None, True, "array"),
        "s21_im": (None, True, "array"),
        "power": ("power", False, "scalar"),
        "temperature": ("temperature", False, "scalar"),
    },
    "decay": {
        "delay": ("time", True, "array"),
        "population": (None, True, "array"),
        "trace_kind": (None, False, "str"),
    },
    "loss_grid": {
        "temperature": ("temperature", True, "array"),
        "nbar": (None, True, "array"),
        "q_int": (None, True, "array"),
        "q_int_sigma": (None, False, "array"),
        "freq": ("frequency", True, "scalar"),
    },
    "cpmg_set": {
        "n_pulses": (None, True, "int_array"),
        "delay": ("time", True, "array"),
        "population": (None, True, "array"),
        "t_pi": ("time", True, "scalar"),
        "t1": ("time", False, "scalar"),
        "gamma_p": (None, False, "scalar"),
    },
    "rb": {
        "lengths": (None, True, "int_array"),
        "survival": (None, True, "array"),
        "survival_sigma": (None, False, "array"),
        "n_random": (None, False, "int"),
        "n_shots": (None, False, "int"),
    },
    "xps": {
        "binding_energy": ("energy_ev", True, "array"),
        "intensity": ("counts", True, "array"),
        "dwell": ("time", False, "scalar"),
        "n_scans": (None, False, "int"),
    },
    "qubit_record": {
        "label": (None, True, "str_array"),
        "freq": ("frequency", True, "array"),
        "t1_avg": ("time", False, "opt_array"),
        "t1_max": ("time", False, "opt_array"),
        "t2e_avg": ("time", False, "opt_array"),
        "t2e_max": ("time", False, "opt_array"),
        "series_label": (None, False, "str_array"),
        "series_observable": (None, False, "str_array"),
        "series_time": (None, False, "int_array"),
        "series_value": ("time", False, "array"),
    },
    "spr_set": {
        "p_ms": (None, True, "array"),
        "q_tls0": (None, True, "array"),
        "q_tls0_sigma": (None, False, "array"),
    },
}


def _coerce(name, value, shape, factor):
    try:
        if shape == "array":
            arr = np.asarray(value, dtype=float)
            if arr.ndim != 1:
                raise SchemaError(f"field {name!r} must be a flat array")
            return arr * factor if factor != 1.0 else arr
        if shape == "opt_array":
            if not isinstance(value, list):
                raise SchemaError(f"field {name!r} must be an array")
            return [None if v is None else float(v) * factor for v in value]
        if shape == "int_array":
            arr = np.asarray(value)
            if arr.ndim != 1 or (arr.size and arr.dtype.kind not in "iu"):
                raise SchemaError(f"field {name!r} must be an integer array")
            return arr.astype(np.int64)
        if shape == "scalar":
            if isinstance(value, (list, dict, str, bool)) or value is None:
                raise SchemaError(f"field {name!r} must be a number")
            return float(value) * factor
        if shape == "int":
            if isinstance(value, bool) or not isinstance(value, int):
                raise SchemaError(f"field {name!r} must be an integer")
            return value
        if shape == "str":
            if not isinstance(value, str):
                raise SchemaError(f"field {name!r} must be a string")
            return value
        if shape == "str_array":
            if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
                raise SchemaError(f"field {name!r} must be an array of strings")
            return list(value)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"field {name!r}: {exc}") from None
    raise AssertionError(shape)


def validate_dataset(raw):
    """Validate a parsed dataset document and return the typed dataset.

    Parameters
    ----------
    raw : dict
        Parsed JSON document with ``kind``, ``units`` and ``data`` members.

    Raises
    ------
    SchemaError
        Missing, extra or mistyped fields.
    UnitError
        A unit tag that cannot be parsed for the field's dimension.
    InvariantError
        Values violating the dataset invariants.
    """
    if not isinstance(raw, dict):
        raise SchemaError("dataset document must be a JSON object")
    extra = set(raw) - {"kind", "units", "data"}
    if extra:
        raise SchemaError(f"unexpected top-level fields {sorted(extra)}")
    kind = raw.get("kind")
    if kind not in _SCHEMAS:
        raise SchemaError(f"unknown or missing kind {kind!r}; expected one of {KINDS}")
    if "data" not in raw or not isinstance(raw["data"], dict):
        raise SchemaError("missing 'data' object")
    unit_map = raw.get("units", {})
    if not isinstance(unit_map, dict):
        raise SchemaError("'units' must be an object")
    schema = _SCHEMAS[kind]
    data = raw["data"]
    unknown = set(data) - set(schema)
    if unknown:
        raise SchemaError(f"unexpected fields for {kind}: {sorted(unknown)}")
    bad_units = set(unit_map) - {k for k, v in schema.items() if v[0] is not None}
    if bad_units:
        raise SchemaError(f"unit tags given for untagged or unknown fields: {sorted(bad_units)}")
    values = {}
    for name, (dim, required, shape) in schema.items():
        if name not in data:
            if required:
                raise SchemaError(f"missing required field {name!r} for {kind}")
            continue
        factor = 1.0
        if dim is not None:
            factor = units.scale(unit_map.get(name, units.CANONICAL[dim]), dim)
        values[name] = _coerce(name, data[name], shape, factor)
    return _BUILDERS[kind](values)


def _build_sweep(v):
    if len(v["s21_re"]) != len(v["s21_im"]):
        raise InvariantError("s21_re and s21_im differ in length")
    return FrequencySweep(v["freq"], v["s21_re"] + 1j * v["s21_im"],
                          v.get("power"), v.get("temperature"))


def _build_decay(v):
    return DecayTrace(v["delay"], v["population"], v.get("trace_kind", "T1"))


def _build_loss(v):
    sigma = v.get("q_int_sigma")
    if sigma is None:
        sigma = np.zeros_like(v["q_int"])
    return LossGrid(v["temperature"], v["nbar"], v["q_int"], sigma, v["freq"])


def _build_cpmg(v):
    n, t, p = v["n_pulses"], v["delay"], v["population"]
    if not (len(n) == len(t) == len(p)):
        raise InvariantError("cpmg_set columns differ in length")
    curves = []
    for value in sorted(set(n.tolist())):
        mask = n == value
        curves.append(CpmgCurve(value, v["t_pi"], DecayTrace(t[mask], p[mask], "Cpmg")))
    return CpmgSet(tuple(curves), v.get("t1"), v.get("gamma_p"))


def _build_rb(v):
    return RbDataset(v["lengths"], v["survival"], v.get("n_random", 1), v.get("n_shots", 1),
                     v.get("survival_sigma"))


def _build_xps(v):
    return XpsSpectrum(v["binding_energy"], v["intensity"], v.get("dwell"), v.get("n_scans"))


def _build_spr(v):
    p, q = v["p_ms"], v["q_tls0"]
    s = v.get("q_tls0_sigma", np.zeros_like(q))
    if not (len(p) == len(q) == len(s)):
        raise InvariantError("spr_set columns differ in length")
    return SprSet(tuple(SprPoint(float(a), float(b), float(c)) for a, b, c in zip(p, q, s)))


def _build_qubits(v):
    labels, freqs = v["label"], v["freq"]
    if len(labels) != len(freqs):
        raise InvariantError("label and freq differ in length")
    if len(set(labels)) != len(labels):
        raise InvariantError("duplicate qubit labels")
    summaries = {}
    for name in ("t1_avg", "t1_max", "t2e_avg", "t2e_max"):
        col = v.get(name)
        if col is not None and len(col) != len(labels):
            raise InvariantError(f"{name} differs in length from label")
        summaries[name] = col
    series = {lab: {"T1": ([], []), "T2E": ([], [])} for lab in labels}
    if "series_label" in v:
        cols = [v.get(k) for k in ("series_label", "series_observable", "series_time", "series_value")]
        if any(c is None for c in cols):
            raise SchemaError("series_label, series_observable, series_time and series_value go together")
        if len({len(c) for c in cols}) != 1:
            raise InvariantError("series columns differ in length")
        for lab, obs, ts, val in zip(*cols):
            if lab not in series:
                raise InvariantError(f"series refers to unknown qubit {lab!r}")
            if obs not in ("T1", "T2E"):
                raise InvariantError(f"series observable must be T1 or T2E, got {obs!r}")
            series[lab][obs][0].append(int(ts))
            series[lab][obs][1].append(float(val))
    records = []
    for i, (lab, f) in enumerate(zip(labels, freqs)):
        s = series[lab]
        records.append(QubitRecord(
            lab, float(f),
            t1_series_s=s["T1"][1], t1_times=s["T1"][0],
            t2e_series_s=s["T2E"][1], t2e_times=s["T2E"][0],
            **{f"{k}_s": (None if summaries[k] is None else summaries[k][i]) for k in summaries},
        ))
    return QubitCohort(tuple(records))


_BUILDERS = {
    "sweep": _build_sweep,
    "decay": _build_decay,
    "loss_grid": _build_loss,
    "cpmg_set": _build_cpmg,
    "rb": _build_rb,
    "xps": _build_xps,
    "qubit_record": _build_qubits,
    "spr_set": _build_spr,
}


def _f(arr):
    return [float(x) for x in np.asarray(arr).tolist()]


def to_document(ds):
    """Serialize a typed dataset to a document in SI units."""
    if isinstance(ds, DecayTrace):
        return {"kind": "decay", "units": {"delay": "s"},
                "data": {"delay": _f(ds.delay_s), "population": _f(ds.population), "trace_kind": ds.kind}}
    if isinstance(ds, FrequencySweep):
        data = {"freq": _f(ds.freq_hz), "s21_re": _f(ds.s21.real), "s21_im": _f(ds.s21.imag)}
        if ds.power_dbm is not None:
            data["power"] = float(ds.power_dbm)
        if ds.temperature_k is not None:
            data["temperature"] = float(ds.temperature_k)
        return {"kind": "sweep", "units": {"freq": "Hz"}, "data": data}
    if isinstance(ds, LossGrid):
        return {"kind": "loss_grid", "units": {"temperature": "K", "freq": "Hz"},
                "data": {"temperature": _f(ds.temperature_k), "nbar": _f(ds.nbar), "q_int": _f(ds.q_int),
                         "q_int_sigma": _f(ds.q_int_sigma), "freq": ds.freq_hz}}
    if isinstance(ds, CpmgSet):
        n, t, p = [], [], []
        for c in ds.curves:
            n += [c.n_pulses] * len(c.trace.delay_s)
            t += _f(c.trace.delay_s)
            p += _f(c.trace.population)
        t_pi = {c.t_pi_s for c in ds.curves}
        if len(t_pi) != 1:
            raise InvariantError("serialized cpmg_set requires a single t_pi")
        data = {"n_pulses": n, "delay": t, "population": p, "t_pi": t_pi.pop()}
        if ds.t1_s is not None:
            data["t1"] = ds.t1_s
        if ds.gamma_p is not None:
            data["gamma_p"] = ds.gamma_p
        return {"kind": "cpmg_set", "units": {"delay": "s", "t_pi": "s", "t1": "s"}, "data": data}
    if isinstance(ds, RbDataset):
        data = {"lengths": [int(x) for x in ds.lengths.tolist()], "survival": _f(ds.survival),
                "n_random": int(ds.n_random), "n_shots": int(ds.n_shots)}
        if ds.survival_sigma is not None:
            data["survival_sigma"] = _f(ds.survival_sigma)
        return {"kind": "rb", "units": {}, "data": data}
    if isinstance(ds, XpsSpectrum):
        data = {"binding_energy": _f(ds.binding_ev), "intensity": _f(ds.intensity)}
        if ds.dwell_s is not None:
            data["dwell"] = ds.dwell_s
        if ds.n_scans is not None:
            data["n_scans"] = int(ds.n_scans)
        return {"kind": "xps", "units": {"binding_energy": "eV"}, "data": data}
    if isinstance(ds, SprSet):
        return {"kind": "spr_set", "units": {},
                "data": {"p_ms": [p.p_ms for p in ds.points], "q_tls0": [p.q_tls0 for p in ds.points],
                         "q_tls0_sigma": [p.q_tls0_sigma for p in ds.points]}}
    if isinstance(ds, QubitCohort):
        recs = ds.records
        data = {"label": [r.label for r in recs], "freq": [r.freq_hz for r in recs]}
        for name in ("t1_avg", "t1_max", "t2e_avg", "t2e_max"):
            col = [getattr(r, f"{name}_s") for r in recs]
            if any(c is not None for c in col):
                data[name] = col
        sl, so, st, sv = [], [], [], []
        for r in recs:
            for obs, vals, times in (("T1", r.t1_series_s, r.t1_times), ("T2E", r.t2e_series_s, r.t2e_times)):
                sl += [r.label] * len(vals)
                so += [obs] * len(vals)
                st += [int(x) for x in times.tolist()]
                sv += _f(vals)
        if sl:
            data.update(series_label=sl, series_observable=so, series_time=st, series_value=sv)
        u = {"freq": "Hz"}
        u.update({k: "s" for k in ("t1_avg", "t1_max", "t2e_avg", "t2e_max", "series_value") if k in data})
        return {"kind": "qubit_record", "units": u, "data": data}
    raise TypeError(f"cannot serialize {type(ds).__name__}")


def dumps(doc):
    """Canonical JSON text: sorted keys, repr floats, trailing newline."""
    return json.dumps(doc, sort_keys=True, indent=1, allow_nan=True) + "\n"


def load(path):
    """Read and validate a dataset file (JSON, or two-column CSV read as XPS)."""
    path = str(path)
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if path.endswith(".csv"):
        return _xps_from_csv(text)
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"malformed JSON: {exc}") from None
    return validate_dataset(raw)


def _xps_from_csv(text):
    rows = [r for r in csv.reader(io.StringIO(text)) if r and not r[0].lstrip().startswith("#")]
    try:
        float(rows[0][0])
    except (ValueError, IndexError):
        rows = rows[1:]
    try:
        ev = [float(r[0]) for r in rows]
        counts = [float(r[1]) for r in rows]
    except (ValueError, IndexError) as exc:
        raise SchemaError(f"xps CSV must have two numeric columns: {exc}") from None
    return XpsSpectrum(ev, counts)


def to_csv(doc):
    """Column-wise CSV of the parallel arrays in a document, one header line."""
    data = doc["data"]
    cols = {k: v for k, v in data.items() if isinstance(v, list)}
    n = max((len(v) for v in cols.values()), default=0)
    cols = {k: v for k, v in cols.items() if len(v) == n}
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(list(cols))
    for row in zip(*cols.values()):
        w.writerow([repr(x) if isinstance(x, float) else x for x in row])
    return out.getvalue()
