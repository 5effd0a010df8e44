"""Acceptance criteria 1-10 at their stated tolerances and time budgets.

Each test records one PASS/FAIL line; ``conftest.py`` prints them in the terminal
summary, and ``pytest -s`` shows them inline too.
"""

from stoptime import verify

SEED = 1
LINES: list[str] = []


def _run(check):
    LINES.append(check.line() + ("" if check.ok else f"  {check.detail}"))
    print(check.line())
    assert check.ok, check.detail
    assert check.seconds <= check.limit, f"took {check.seconds:.1f}s, budget {check.limit:.0f}s"


def test_criterion_01_norm_engines():
    _run(verify.check_norm_engines(SEED))


def test_criterion_02_antichain_census():
    _run(verify.check_antichain_census())


def test_criterion_03_embedding_operators():
    _run(verify.check_embedding_operators(SEED))


def test_criterion_04_duality():
    _run(verify.check_duality(SEED))


def test_criterion_05_annihilation_sums():
    _run(verify.check_annihilation_sums(SEED))


def test_criterion_06_ramsey():
    _run(verify.check_ramsey(SEED))


def test_criterion_07_game():
    _run(verify.check_games(SEED))


def test_criterion_08_sign_selection():
    _run(verify.check_sign_selection(SEED))


def test_criterion_09_factorization():
    _run(verify.check_factorization(SEED))


def test_criterion_10_maxideal():
    _run(verify.check_maxideal(SEED))
