import json
import time
from pathlib import Path

import numpy as np
import pytest

from ogl.groups import PenaltyParams, validate_groups

GOLDEN_DIR = Path(__file__).parent / "golden"
SUITE_BUDGET_S = 300.0

_session_start = time.perf_counter()
ACCEPTANCE = {}


def record_criterion(number, name, passed, detail=""):
    ACCEPTANCE[number] = (name, bool(passed), detail)


def load_golden():
    records = []
    with open(GOLDEN_DIR / "prox_golden.jsonl") as fh:
        for line in fh:
            rec = json.loads(line)
            rec["gs"] = validate_groups(rec["groups"], rec["weights"], rec["p"])
            rec["params"] = PenaltyParams(rec["lambda1"], rec["lambda2"])
            rec["v"] = np.asarray(rec["v"])
            rec["x"] = np.asarray(rec["x"])
            records.append(rec)
    return records


@pytest.fixture(scope="session")
def golden():
    return load_golden()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_sessionfinish(session, exitstatus):
    elapsed = time.perf_counter() - _session_start
    if ACCEPTANCE:
        ok = elapsed <= SUITE_BUDGET_S
        record_criterion(11, "full suite runtime", ok, f"{elapsed:.1f}s <= {SUITE_BUDGET_S:.0f}s")
        if not ok and session.exitstatus == 0:
            session.exitstatus = 1


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        name, passed, detail = ACCEPTANCE[number]
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] criterion {number:2d}: {name}  {detail}")
