"""Runs every acceptance criterion at its stated tolerance.

Each test prints one ``[PASS]`` or ``[FAIL]`` line with the measured
quantities; the data behind it is written to a temporary directory.
"""
import time

import pytest

from halfjump.acceptance import CRITERIA, criterion_11, run_one

SEED = 0
pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def runs(tmp_path_factory):
    root = tmp_path_factory.mktemp("acceptance")
    cache = {}

    def get(number):
        if number not in cache:
            cache[number] = run_one(number, root / "run1", SEED)
        return cache[number]
    get.root = root
    return get


def _report(outcome, capsys):
    with capsys.disabled():
        print(f"\n{outcome.line()} [{outcome.seconds:.1f}s]")


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, runs, capsys):
    outcome = runs(number)
    _report(outcome, capsys)
    assert outcome.passed, outcome.line()


def test_criterion_11_byte_reproducible(runs, capsys):
    for n in CRITERIA:
        runs(n)
    start = time.perf_counter()
    outcome = criterion_11(runs.root / "run1", runs.root / "run2", SEED)
    outcome.seconds = time.perf_counter() - start
    _report(outcome, capsys)
    assert outcome.passed, outcome.line()
