"""One check per acceptance criterion; each prints a PASS/FAIL line with its measurements."""

import pytest

from hypolab.acceptance import CRITERIA, _Context, run_criterion


@pytest.fixture(scope="module")
def ctx():
    return _Context(threads=4, seed=0)


@pytest.mark.parametrize("number", [c[0] for c in CRITERIA], ids=[f"c{c[0]:02d}_{c[1].replace(' ', '_')}" for c in CRITERIA])
def test_criterion(number, ctx, capsys):
    res = run_criterion(number, ctx)
    with capsys.disabled():
        print("\n" + res.line())
    assert res.passed, res.line()
