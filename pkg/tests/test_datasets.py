import json
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qchar import bundled_path, datasets, units
from qchar.datasets import (DecayTrace, FrequencySweep, LossGrid, to_document, validate_dataset)
from qchar.errors import (InvariantError, PopulationRangeWarning, SchemaError, UnitError,
                          ValidationError)


def sweep_doc(n=201, unit="Hz"):
    f = np.linspace(6.99e9, 7.01e9, n)
    scale = {"Hz": 1.0, "GHz": 1e-9}[unit]
    return {"kind": "sweep", "units": {"freq": unit},
            "data": {"freq": list(f * scale), "s21_re": [1.0] * n, "s21_im": [0.0] * n}}


def test_sweep_passthrough():
    ds = validate_dataset(sweep_doc())
    assert isinstance(ds, FrequencySweep)
    assert len(ds.freq_hz) == 201


def test_duplicated_frequency_rejected():
    doc = sweep_doc(10)
    doc["data"]["freq"][4] = doc["data"]["freq"][3]
    with pytest.raises(InvariantError):
        validate_dataset(doc)


def test_microsecond_delays_scaled():
    doc = {"kind": "decay", "units": {"delay": "us"},
           "data": {"delay": [0.0, 1.5, 3.0], "population": [1.0, 0.5, 0.25]}}
    ds = validate_dataset(doc)
    np.testing.assert_array_equal(ds.delay_s, np.array([0.0, 1.5, 3.0]) * 1e-6)


def test_ghz_tag_equals_hz():
    a = validate_dataset(sweep_doc(20, "GHz"))
    b = validate_dataset(sweep_doc(20, "Hz"))
    np.testing.assert_allclose(a.freq_hz, b.freq_hz, rtol=1e-15)


@pytest.mark.parametrize("mutate, exc", [
    (lambda d: d["data"].pop("s21_im"), SchemaError),
    (lambda d: d["data"].__setitem__("extra", [1.0]), SchemaError),
    (lambda d: d.__setitem__("meta", {}), SchemaError),
    (lambda d: d.__setitem__("kind", "spectrum"), SchemaError),
    (lambda d: d["units"].__setitem__("freq", "furlongs"), UnitError),
    (lambda d: d["units"].__setitem__("freq", "ms"), UnitError),
    (lambda d: d["data"].__setitem__("s21_re", [float("nan")] * 201), InvariantError),
])
def test_malformed_documents(mutate, exc):
    doc = sweep_doc()
    mutate(doc)
    with pytest.raises(exc):
        validate_dataset(doc)


def test_short_sweep_rejected():
    with pytest.raises(InvariantError):
        validate_dataset(sweep_doc(7))


def test_error_hierarchy():
    for exc in (SchemaError, UnitError, InvariantError):
        assert issubclass(exc, ValidationError)


def test_population_slack_flagged():
    with pytest.warns(PopulationRangeWarning):
        tr = DecayTrace([0.0, 1e-6, 2e-6], [1.1, 0.5, -0.1])
    assert "population_out_of_unit_interval" in tr.flags
    with pytest.raises(InvariantError):
        DecayTrace([0.0, 1e-6], [1.3, 0.5])


def test_loss_grid_invariants():
    ok = dict(temperature_k=[0.02, 0.05], nbar=[0.0, 10.0], q_int=[1e6, 2e6], q_int_sigma=[1e4, 1e4],
              freq_hz=7e9)
    LossGrid(**ok)
    for key, bad in (("temperature_k", [0.0, 0.05]), ("nbar", [-1.0, 1.0]), ("q_int", [1e6, 0.0])):
        with pytest.raises(InvariantError):
            LossGrid(**dict(ok, **{key: bad}))


def test_datasets_immutable():
    ds = validate_dataset(sweep_doc(10))
    with pytest.raises(ValueError):
        ds.freq_hz[0] = 0.0
    with pytest.raises(AttributeError):
        ds.power_dbm = 1.0


def test_unit_table():
    assert units.scale("mK", "temperature") == 1e-3
    assert units.scale("µs", "time") == units.scale("us", "time") == 1e-6
    with pytest.raises(UnitError):
        units.scale("K", "time")


def test_bundled_table_loads():
    ds = datasets.load(bundled_path("table1"))
    assert len(ds.records) == 45


finite = st.floats(-1e3, 1e3, allow_nan=False, width=64)


@settings(max_examples=50, deadline=None)
@given(n=st.integers(8, 40), re=st.lists(finite, min_size=40, max_size=40),
       im=st.lists(finite, min_size=40, max_size=40), start=st.floats(1e6, 1e10),
       step=st.floats(1.0, 1e6))
def test_sweep_round_trip_exact(n, re, im, start, step):
    doc = {"kind": "sweep", "units": {"freq": "Hz"},
           "data": {"freq": [start + i * step for i in range(n)], "s21_re": re[:n], "s21_im": im[:n]}}
    ds = validate_dataset(doc)
    again = validate_dataset(json.loads(datasets.dumps(to_document(ds))))
    assert again == ds
    assert validate_dataset(doc) == ds


@settings(max_examples=50, deadline=None)
@given(pops=st.lists(st.floats(0.0, 1.0), min_size=3, max_size=30), kind=st.sampled_from(["T1", "Echo", "Cpmg"]))
def test_decay_round_trip_exact(pops, kind):
    doc = {"kind": "decay", "units": {"delay": "us"},
           "data": {"delay": [0.37 * i for i in range(len(pops))], "population": pops, "trace_kind": kind}}
    ds = validate_dataset(doc)
    assert validate_dataset(json.loads(datasets.dumps(to_document(ds)))) == ds


@settings(max_examples=30, deadline=None)
@given(t=st.lists(st.floats(1e-3, 2.0), min_size=1, max_size=12))
def test_loss_round_trip_exact(t):
    n = len(t)
    doc = {"kind": "loss_grid", "units": {"temperature": "mK", "freq": "GHz"},
           "data": {"temperature": [x * 1e3 for x in t], "nbar": [1.0] * n, "q_int": [1e6] * n,
                    "q_int_sigma": [1e4] * n, "freq": 7.1}}
    ds = validate_dataset(doc)
    assert validate_dataset(json.loads(datasets.dumps(to_document(ds)))) == ds


def test_csv_header_and_columns():
    doc = sweep_doc(10)
    text = datasets.to_csv(doc)
    lines = text.splitlines()
    assert lines[0] == "freq,s21_re,s21_im"
    assert len(lines) == 11


def test_xps_csv_load(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("binding_energy,intensity\n" + "\n".join(f"{100 + 0.1 * i},{i + 1}" for i in range(20)))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        ds = datasets.load(p)
    assert len(ds.binding_ev) == 20
