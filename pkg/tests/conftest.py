import os

import pytest

from stochdecay.acceptance import DEFAULT_SEED, Context, run_criterion

_RESULTS = {}


@pytest.fixture(scope="session")
def acceptance_context():
    threads = int(os.environ.get("STOCHDECAY_THREADS", os.cpu_count() or 1))
    return Context(seed=DEFAULT_SEED, threads=threads)


@pytest.fixture(scope="session")
def acceptance_result(acceptance_context):
    def run(crit):
        if crit.name not in _RESULTS:
            _RESULTS[crit.name] = run_criterion(crit, acceptance_context)
        return _RESULTS[crit.name]
    return run


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_RESULTS, key=lambda k: int(k[1:])):
        terminalreporter.write_line(_RESULTS[name].line())
    n_ok = sum(r.passed for r in _RESULTS.values())
    terminalreporter.write_line(f"{n_ok}/{len(_RESULTS)} criteria passed")
