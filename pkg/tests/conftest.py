import numpy as np
import pytest

from picheck.algebra import UnitaryFamily
from picheck.numerics import random_unitary

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_family(d_A, d_B, rng, anchor=1):
    reps = [random_unitary(d_B, rng) for _ in range(d_A)]
    reps[anchor - 1] = np.eye(d_B)
    return UnitaryFamily(d_A, d_B, reps, anchor)


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


# Acceptance criteria report: test_acceptance.py records one line per criterion.
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, title, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {title}  ({detail})")
