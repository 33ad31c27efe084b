"""All acceptance criteria at their stated tolerances, one status line each."""

import pytest

from dqma.acceptance import CRITERIA, run_criterion


@pytest.mark.parametrize("number", sorted(CRITERIA), ids=lambda k: f"criterion-{k:02d}")
def test_criterion(number, capsys):
    result = run_criterion(number)
    with capsys.disabled():
        print("\n" + result.line())
    assert result.passed, result.line()


def test_registry_complete():
    assert sorted(CRITERIA) == list(range(1, 13))
