import json
from pathlib import Path

import pytest

SPECS = Path(__file__).resolve().parents[1] / "scripts" / "specs"

# criterion number -> (title, passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def load_spec(name, **overrides):
    spec = json.loads((SPECS / f"{name}.json").read_text())
    spec.update(overrides)
    return spec


@pytest.fixture
def spec_loader():
    return load_spec


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {n:2d} {title}: {detail}")
