"""Acceptance criteria, one test per criterion.

Each test prints a single ``[PASS]``/``[FAIL]`` line (visible with ``-s`` or in
the terminal summary) before asserting. The MPS scaling check dominates the
runtime at roughly seven minutes.
"""

import pytest

from kinkstats.acceptance import CHECKS

NAMES = {n: fn.__name__ for n, fn in CHECKS.items()}


@pytest.mark.parametrize("number", sorted(CHECKS), ids=[f"{n:02d}_{NAMES[n]}" for n in sorted(CHECKS)])
def test_criterion(number, capsys):
    chk = CHECKS[number]()
    with capsys.disabled():
        print("\n" + chk.line())
    assert chk.passed, chk.line()
