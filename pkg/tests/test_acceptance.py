"""End-to-end acceptance checks; prints one PASS/FAIL line per criterion."""
import pytest

from hrlab import acceptance

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def outcomes():
    return {r.number: r for r in acceptance.run(echo=None)}


@pytest.mark.parametrize("number,name", [(n, name) for n, name, _ in acceptance.CRITERIA])
def test_criterion(outcomes, number, name, capsys):
    r = outcomes[number]
    with capsys.disabled():
        print("\n" + r.line())
    assert r.passed, r.line()
