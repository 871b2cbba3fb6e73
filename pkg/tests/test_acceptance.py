"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run standalone with ``python tests/test_acceptance.py`` for the summary table
alone. Tolerances live in ``benney_lab.harness.checks`` and are not relaxed
here.
"""

import sys

import pytest

from benney_lab.harness import checks


@pytest.mark.parametrize("check_id", list(checks.CHECKS))
def test_criterion(check_id, capsys):
    result = checks.run_check(check_id)
    with capsys.disabled():
        print("\n" + result.line())
    assert result.passed, f"{check_id}: {result.detail}"


if __name__ == "__main__":
    rows = checks.run_all()
    for r in rows:
        print(r.line())
    sys.exit(0 if all(r.passed for r in rows) else 1)
