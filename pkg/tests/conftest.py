import pytest

from uiobank.harness import bank_for, run
from uiobank.model import bundled_config, load_config

# criterion number -> (description, passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def load(name):
    return load_config(bundled_config(name))


@pytest.fixture(scope="session")
def example1():
    return load("example1")


@pytest.fixture(scope="session")
def example2():
    return load("example2")


@pytest.fixture(scope="session")
def bank1(example1):
    model, _, settings = example1
    return bank_for(model, settings)


@pytest.fixture(scope="session")
def bank2(example2):
    model, _, settings = example2
    return bank_for(model, settings)


@pytest.fixture(scope="session")
def run1(example1, bank1):
    model, scenario, settings = example1
    return run(model, scenario, settings, bank=bank1)


@pytest.fixture(scope="session")
def run2(example2, bank2):
    model, scenario, settings = example2
    return run(model, scenario, settings, bank=bank2)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        desc, passed, detail = ACCEPTANCE[number]
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] {number}. {desc} -- {detail}")
