"""The eleven acceptance criteria, one test each.

Every test prints its ``[PASS]``/``[FAIL]`` line straight to the terminal,
so the lines show up even without ``-s``.
"""

import pytest

from secondlaw.verification import CHECKS, run_check


@pytest.mark.parametrize("number", [c[0] for c in CHECKS], ids=[f"{c[0]:02d}-{c[1]}" for c in CHECKS])
def test_criterion(number, capsys):
    result = run_check(number)
    with capsys.disabled():
        print("\n" + result.line())
    assert result.passed, result.detail
