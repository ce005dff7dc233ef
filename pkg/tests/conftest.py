import os
import time

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_acceptance = {}
_unit_failures = []


def pytest_runtest_logreport(report):
    if report.when != "call" and not report.failed:
        return
    if "test_acceptance.py" in report.nodeid:
        _acceptance[report.nodeid] = report
    elif report.failed:
        _unit_failures.append(report.nodeid)


def pytest_sessionstart(session):
    session.config._adaptnc_start = time.perf_counter()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    tr = terminalreporter
    elapsed = time.perf_counter() - config._adaptnc_start
    if not _acceptance:
        return
    tr.section("acceptance criteria")
    for nodeid, report in sorted(_acceptance.items(), key=lambda kv: _ac_key(kv[0])):
        props = dict(report.user_properties)
        status = "PASS" if report.passed else "FAIL"
        tr.write_line(f"{props.get('criterion', nodeid)} {status}: {props.get('detail', '')}")
    ok = not _unit_failures and elapsed < 600
    tr.write_line(
        f"AC9 {'PASS' if ok else 'FAIL'}: {len(_unit_failures)} unit/property failures, "
        f"suite wall time {elapsed:.0f}s (limit 600s)"
    )


def _ac_key(nodeid):
    name = nodeid.rsplit("::", 1)[-1]
    digits = "".join(ch for ch in name.split("_")[1] if ch.isdigit()) if "_" in name else ""
    return (int(digits) if digits else 99, name)
