import pytest

from ymheat import _pycore, pdesolver, radialheat, specfun

try:
    from ymheat import _core
except ImportError:  # extension not built
    _core = None

BACKENDS = ["python"] + (["cython"] if _core is not None else [])


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Run the test once per available kernel backend."""
    mod = _pycore if request.param == "python" else _core
    for target in (radialheat, specfun, pdesolver):
        monkeypatch.setattr(target, "core", mod)
    return request.param


# -- acceptance reporting ------------------------------------------------------

ACCEPTANCE_LINES = {}


@pytest.fixture
def report_criterion(request):
    """Record one PASS/FAIL line; printed live and again in the terminal summary."""
    reporter = request.config.pluginmanager.get_plugin("terminalreporter")

    def report(number, title, passed, seconds, limit, detail=""):
        line = (f"{'PASS' if passed else 'FAIL'}  criterion {number:>2}  {title}  "
                f"[{seconds:.2f} s / limit {limit:g} s]" + (f"  {detail}" if detail else ""))
        ACCEPTANCE_LINES[number] = line
        if reporter is not None:
            reporter.write_line("")
            reporter.write_line(line)
    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
