import sys
from pathlib import Path

import numpy as np
import pytest

HERE = Path(__file__).resolve().parent
sys.path.insert(0, str(HERE))

# Engel food data (235 households) with a synthetic housing column, see scripts/make_engel.py
ENGEL = HERE / "data" / "engel.csv"


def simulate_linear(n, seed, slope=(1.0, 0.5)):
    """Correctly specified linear-in-u scalar model: Y = a(U) + b(U) Z with U ~ U(0,1) latent.

    a(u) = 2 Phi^-1(u) and b(u) = slope[0] + slope[1] u, Z ~ U(1, 3), so u -> a(u) + b(u) z
    is increasing for every support point z.
    """
    from scipy.special import ndtri

    from vecquant.core import Dataset

    rng = np.random.default_rng(seed)
    u = rng.random(n)
    z = 1 + 2 * rng.random(n)
    y = 2 * ndtri(u) + (slope[0] + slope[1] * u) * z
    return Dataset.from_arrays(y, z), u


def linear_truth(t, x, slope=(1.0, 0.5)):
    from scipy.special import ndtri

    x = np.atleast_2d(x)
    return 2 * ndtri(t) + (slope[0] + slope[1] * t) * x[:, 1]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def _terms(text, nvars):
    row = np.zeros(nvars)
    toks = text.split()
    sign, i = 1.0, 0
    while i < len(toks):
        if toks[i] in "+-":
            sign = -1.0 if toks[i] == "-" else 1.0
            i += 1
        row[int(toks[i + 1][1:]) - 1] = sign * float(toks[i])
        sign, i = 1.0, i + 2
    return row


def parse_lp(text, nvars):
    """Read back (c, A, rhs) from the LP text written by ``lp.dump_lp``."""
    lines = text.splitlines()
    c = _terms(lines[2].split(":", 1)[1], nvars)
    rows, rhs = [], []
    for line in lines:
        if line.startswith(" c"):
            lhs, r = line.split(":", 1)[1].rsplit("=", 1)
            rows.append(_terms(lhs, nvars))
            rhs.append(float(r))
    return c, np.array(rows), np.array(rhs)


# acceptance lines, printed at the end of the session
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
