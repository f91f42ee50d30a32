import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from kamtorus import series as fs  # noqa: E402

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def cos_mode(dim, kmax, k, amp=1.0, mmax=0):
    """amp * cos(2 pi k.theta)."""
    k = tuple(k)
    return fs.make_series(dim, kmax, mmax, {(k, (0,) * dim): amp / 2, (tuple(-x for x in k), (0,) * dim): amp / 2})


def sin_mode(dim, kmax, k, amp=1.0, mmax=0):
    """amp * sin(2 pi k.theta)."""
    k = tuple(k)
    return fs.make_series(dim, kmax, mmax, {(k, (0,) * dim): -0.5j * amp,
                                            (tuple(-x for x in k), (0,) * dim): 0.5j * amp})


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance criterion -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def record_criterion(number, passed, detail):
    ACCEPTANCE[number] = (bool(passed), detail)
    print(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
