import os
import re

import numpy as np
import pytest

from anchormix.synthetic import simulate_mixreg

HERE = os.path.dirname(__file__)

# The 100-species case-study table is not redistributed with the package.
# Point ANCHORMIX_MAMMALS_CSV at a copy (species,order,suborder,body_mass,brain_mass)
# to enable the case-study checks.
MAMMALS_CSV = os.environ.get("ANCHORMIX_MAMMALS_CSV")

ACCEPTANCE = {}


def mammals_path():
    if MAMMALS_CSV and os.path.exists(MAMMALS_CSV):
        return MAMMALS_CSV
    return None


requires_mammals = pytest.mark.skipif(
    mammals_path() is None,
    reason="mammals dataset not available (set ANCHORMIX_MAMMALS_CSV)")


@pytest.fixture
def three_lines():
    """Three well-separated parallel-ish regression lines, 20 points each."""
    return simulate_mixreg([4.0, 2.0, 0.0], [1.0, 0.7, 0.5], [20, 20, 20], noise_sd=0.15,
                           x_sd=1.5, rng=11)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda c: (int(re.match(r"\d+", c).group()), c)):
        status, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"[{status}] criterion {key}: {detail}")
