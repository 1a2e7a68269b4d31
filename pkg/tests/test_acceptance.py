"""Acceptance criteria 1-11, one test each; every test prints a PASS/FAIL line."""

import pytest

from growthsde import acceptance


@pytest.mark.parametrize("number", [num for num, _, _ in acceptance.CHECKS])
def test_acceptance_criterion(number, capsys):
    res = acceptance.run_check(number)
    with capsys.disabled():
        print("\n" + res.line())
    assert res.passed, res.line()


def test_all_criteria_registered():
    assert [num for num, _, _ in acceptance.CHECKS] == list(range(1, 12))
