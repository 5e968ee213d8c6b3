import random

import pytest

from sumproduct_lab.grid_set import GridSet


def random_gridset(rng: random.Random, L: int, n: int) -> GridSet:
    lo = 1 << L
    n = min(n, lo + 1)
    return GridSet.from_indices(sorted(rng.sample(range(lo, 2 * lo + 1), n)), L)


@pytest.fixture
def rng():
    return random.Random(20240611)


# acceptance outcomes, filled by tests/test_acceptance.py
ACCEPTANCE: list[tuple[int, str, bool, float, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, ok, elapsed, note in sorted(ACCEPTANCE):
        line = f"{'PASS' if ok else 'FAIL'}  criterion {number:>2}  {title}  ({elapsed:.2f}s)"
        terminalreporter.write_line(line + (f"  {note}" if note else ""))
