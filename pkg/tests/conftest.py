import pytest

from pr4pc.instances import BUNDLED, make_instance

# (criterion, description, passed) rows appended by test_acceptance.py
ACCEPTANCE_LOG: list[tuple[str, str, bool]] = []


@pytest.fixture(scope="session")
def plateau():
    return make_instance("plateau")


@pytest.fixture(scope="session")
def tie():
    return make_instance("two_point_tie")


@pytest.fixture(scope="session")
def vanishing():
    return make_instance("vanishing_gradient")


@pytest.fixture(scope="session")
def regression():
    return make_instance("ordered_regression")


@pytest.fixture(scope="session")
def attainable():
    return make_instance("finite_table", table="attainable")


@pytest.fixture(scope="session")
def unattainable():
    return make_instance("finite_table", table="unattainable")


@pytest.fixture(scope="session", params=BUNDLED, ids=lambda s: s.name)
def bundled(request):
    return make_instance(request.param)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LOG:
        return
    terminalreporter.section("acceptance criteria")
    for crit, desc, ok in ACCEPTANCE_LOG:
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {crit}: {desc}")
