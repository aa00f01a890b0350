import pytest

_ACCEPTANCE: dict[str, str] = {}


@pytest.hookimpl(tryfirst=True)
def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call" or report.outcome != "passed":
        if _ACCEPTANCE.get(name) != "FAIL":
            _ACCEPTANCE[name] = "PASS" if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, status in sorted(_ACCEPTANCE.items(), key=lambda kv: _order(kv[0])):
        terminalreporter.write_line(f"{status}  {name}")


def _order(name: str) -> int:
    parts = name.split("_")
    return int(parts[2]) if len(parts) > 2 and parts[2].isdigit() else 99
