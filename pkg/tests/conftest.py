from fractions import Fraction

import pytest

from pbnsynth import data_path, load_pbn, parse_query

PREGNANCY_QUERY = "P(Pregnancy=yes | UrineTest=neg, BloodTest=neg) <= 0.2"
U0 = (Fraction(36, 100), Fraction(27, 100))

# filled in by tests/test_acceptance.py, printed at the end of the run
ACCEPTANCE = {}


@pytest.fixture(scope="session")
def pregnancy():
    return load_pbn(data_path("pregnancy.pbif"))


@pytest.fixture(scope="session")
def pregnancy_query(pregnancy):
    return parse_query(PREGNANCY_QUERY, pregnancy)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
