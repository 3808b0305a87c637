import math

import numpy as np
import pytest

from wdbs_qkd.config import reference_scenario

# Fixed seeds so any statistical failure reproduces exactly.
SEED_NO_EVE = 20120917
SEED_ATTACK = 20120918
SEED_MISC = 4242


def binomial_band(p, n, z=3.0):
    """(lo, hi) of a z-sigma normal band for a binomial fraction."""
    sigma = math.sqrt(p * (1.0 - p) / n)
    return p - z * sigma, p + z * sigma


def assert_binomial(k, n, p, z=3.0):
    assert n > 0
    lo, hi = binomial_band(p, n, z)
    frac = k / n
    assert lo <= frac <= hi, f"{k}/{n} = {frac:.6f} outside {z} sigma band [{lo:.6f}, {hi:.6f}] of p={p}"


@pytest.fixture
def rng():
    return np.random.default_rng(SEED_MISC)


@pytest.fixture(scope="session")
def no_eve_config():
    return reference_scenario(eve=False, intrinsic_error=0.0, seed=SEED_NO_EVE)


@pytest.fixture(scope="session")
def attack_config():
    return reference_scenario(eve=True, intrinsic_error=0.0, seed=SEED_ATTACK)


# -- acceptance report --------------------------------------------------------

ACCEPTANCE_LINES: list[str] = []


def report_criterion(number, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'}  criterion {number:>2}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
