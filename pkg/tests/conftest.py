import pytest

from viadel.model import DEFAULT_PARAMS
from viadel.regions import region_spec

_acceptance = {}


@pytest.fixture(scope="session")
def p():
    return DEFAULT_PARAMS


@pytest.fixture(scope="session")
def spec(p):
    return region_spec(p, "continuous")


@pytest.fixture(scope="session")
def spec_free(p):
    return region_spec(p, "delay_free")


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call" or (report.when == "setup" and not report.passed):
        _acceptance[name] = report


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    tr = terminalreporter
    tr.write_sep("=", "acceptance criteria")
    for name in sorted(_acceptance):
        rep = _acceptance[name]
        status = "PASS" if rep.passed else "FAIL"
        line = f"{status}  {name}"
        if rep.failed:
            msg = str(rep.longrepr.reprcrash.message) if hasattr(rep.longrepr, "reprcrash") else ""
            line += f"  -- {msg.splitlines()[0] if msg else 'failed'}"
        tr.write_line(line)
