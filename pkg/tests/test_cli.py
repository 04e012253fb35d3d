import inspect
import json
import os
import subprocess
import sys

import pytest

from conftest import load_spec
from qchar import cli, coherence, errors, synth
from qchar.cli import main


def read(path):
    return json.loads(path.read_text())


def test_decay_fit_bundled_trace(tmp_path):
    assert main(["decay", "fit", "@t1_trace", "--out", str(tmp_path), "--freq-hz", "2.407e9"]) == 0
    rep = read(tmp_path / "t1_trace.decay-fit.json")
    assert rep["kind"] == "decay_fit"
    assert rep["payload"]["tau_s"] == pytest.approx(1.68e-3, abs=0.1e-3)
    assert set(rep) == {"kind", "payload", "meta"} and "created_utc" in rep["meta"]


def test_cohort_report_prints_mean(tmp_path, capsys):
    assert main(["cohort", "report", "@table1", "--out", str(tmp_path)]) == 0
    assert "mean Qavg: 9.74" in capsys.readouterr().out
    assert read(tmp_path / "table1.cohort-report.json")["kind"] == "cohort_report"


def test_malformed_json_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["decay", "fit", str(bad), "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and "SchemaError" in err[0]


def test_missing_input_exit_2(tmp_path):
    assert main(["rb", "fit", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == 2


def test_wrong_kind_exit_2(tmp_path):
    data = tmp_path / "sweep.json"
    doc, _ = synth.synth(load_spec("sweep"))
    data.write_text(json.dumps(doc))
    assert main(["decay", "fit", str(data), "--out", str(tmp_path)]) == 2


@pytest.mark.parametrize("argv", [
    ["decay", "fit", "@t1_trace", "--bogus"],
    ["decay", "fit"],
    ["decay", "smooth", "@t1_trace"],
    ["decay", "fit", "@t1_trace", "--tolerance", "tau=0.1"],
    ["decay", "fit", "@t1_trace", "--tolerance", "tau"],
    ["decay", "fit", "@t1_trace", "--workers", "0"],
    ["calibrate", "sweep", "--kind", "amplitude", "--grid", "a:b:c"],
])
def test_bad_arguments_exit_2(argv, tmp_path):
    assert main(argv + ["--out", str(tmp_path)]) == 2


def test_fit_error_exit_3(tmp_path, capsys):
    spec = {"kind": "rb", "seed": 1, "ground_truth": {"a": 0.0, "b": 0.5, "p": 0.9},
            "grid": {"lengths": [1, 2, 4, 8, 16]}}
    assert main(["synth", _write(tmp_path, "flat.json", spec), "--out", str(tmp_path)]) == 0
    assert main(["rb", "fit", str(tmp_path / "flat.data.json"), "--out", str(tmp_path)]) == 3
    assert "ConvergenceError" in capsys.readouterr().err


def _write(tmp_path, name, obj):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return str(path)


ERROR_CLASSES = [c for _, c in inspect.getmembers(errors, inspect.isclass)
                 if issubclass(c, errors.QcharError) and c not in (errors.QcharError,)]


@pytest.mark.parametrize("exc", ERROR_CLASSES, ids=lambda c: c.__name__)
def test_exit_code_contract(exc, tmp_path, monkeypatch, capsys):
    def boom(*a, **k):
        raise exc("injected")

    monkeypatch.setattr(coherence, "fit_decay", boom)
    code = main(["decay", "fit", "@t1_trace", "--out", str(tmp_path)])
    assert code == (3 if issubclass(exc, errors.FitError) else 2)
    assert f"{exc.__name__}: injected" in capsys.readouterr().err


def test_report_idempotent(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["cohort", "report", "@table1", "@table2", "--out", str(out), "--quiet"]) == 0
    for name in ("table1.cohort-report.json", "table2.cohort-report.json"):
        assert read(a / name)["payload"] == read(b / name)["payload"]


def test_csv_plot_data(tmp_path):
    assert main(["decay", "fit", "@t1_trace", "--out", str(tmp_path), "--format", "csv"]) == 0
    lines = (tmp_path / "t1_trace.decay-fit.csv").read_text().splitlines()
    assert lines[0] == "delay_s,population,model"
    assert len(lines) > 10


def test_synth_fit_score_chain(tmp_path, capsys):
    spec = _write(tmp_path, "decay.json", load_spec("decay"))
    assert main(["synth", spec, "--out", str(tmp_path)]) == 0
    assert (tmp_path / "decay.data.truth.json").exists()
    assert main(["decay", "fit", str(tmp_path / "decay.data.json"), "--out", str(tmp_path)]) == 0
    report = str(tmp_path / "decay.data.decay-fit.json")
    side = str(tmp_path / "decay.data.truth.json")
    assert main(["score", report, side, "--out", str(tmp_path)]) == 0
    assert capsys.readouterr().out.startswith("PASS tau_s")
    assert main(["score", report, side, "--out", str(tmp_path), "--tolerance", "tau_s=1e-9"]) == 1
    assert main(["score", report, str(tmp_path / "decay.data.json"), "--out", str(tmp_path)]) == 2


def test_synth_seed_override(tmp_path):
    spec = _write(tmp_path, "decay.json", load_spec("decay"))
    main(["synth", spec, "--out", str(tmp_path / "a"), "--seed", "99"])
    main(["synth", spec, "--out", str(tmp_path / "b"), "--seed", "99"])
    main(["synth", spec, "--out", str(tmp_path / "c")])
    data = lambda d: (tmp_path / d / "decay.data.json").read_bytes()
    assert data("a") == data("b") != data("c")


def test_rb_limit_report(tmp_path):
    assert main(["rb", "limit", "--t-g-s", "40e-9", "--t1-s", "0.56e-3", "--pulses-per-clifford", "1.875",
                 "--out", str(tmp_path)]) == 0
    pl = read(tmp_path / "t1_limit.rb-limit.json")["payload"]
    assert f"{pl['infidelity_per_pulse']:.3g}" == "2.38e-05" and "infidelity_per_clifford" in pl
    assert main(["rb", "limit", "--t-g-s", "-1", "--t1-s", "1e-3", "--out", str(tmp_path)]) == 2


def test_pulse_synth_then_simulate(tmp_path):
    assert main(["pulse", "synth", "--two-level", "--samples", "1024", "--out", str(tmp_path),
                 "--format", "csv"]) == 0
    assert (tmp_path / "pulse.pulse-synth.csv").read_text().startswith("t_s,re,im\n")
    assert main(["pulse", "simulate", str(tmp_path / "pulse.pulse-synth.json"), "--two-level",
                 "--out", str(tmp_path)]) == 0
    pl = read(tmp_path / "pulse.pulse-synth.pulse-simulate.json")["payload"]
    assert pl["populations"][1] == pytest.approx(0.5, abs=1e-6)


def test_qchar_out_environment(tmp_path):
    env = dict(os.environ, QCHAR_OUT=str(tmp_path))
    proc = subprocess.run([sys.executable, "-m", "qchar.cli", "decay", "fit", "@t1_trace"],
                          env=env, capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "t1_trace.decay-fit.json").exists()


def test_subprocess_unknown_flag():
    proc = subprocess.run([sys.executable, "-m", "qchar.cli", "decay", "fit", "@t1_trace", "--nope"],
                          capture_output=True, text=True)
    assert proc.returncode == 2 and "unrecognized arguments" in proc.stderr


def test_parser_lists_all_commands():
    text = cli.build_parser().format_help()
    for group in ("resonator", "loss", "spr", "decay", "cohort", "cpmg", "noise", "t2", "rb", "pulse",
                  "calibrate", "xps", "synth", "score"):
        assert group in text
