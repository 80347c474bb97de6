from pathlib import Path

import numpy as np
import pytest

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures() -> Path:
    return FIXTURES


def separable_rows(n=200, d=24, margin=0.5, seed=0):
    """Balanced two-class data in [0, 1]^d with a gap of ``margin`` along a random direction."""
    from infotypes.models import FeatureRow

    rng = np.random.default_rng(seed)
    u = rng.normal(size=d)
    u /= np.linalg.norm(u)
    y = np.array([1] * (n // 2) + [0] * (n - n // 2))
    rng.shuffle(y)
    noise = rng.normal(0, 0.1, size=(n, d))
    noise -= np.outer(noise @ u, u)
    s = np.where(y == 1, 1.0, -1.0)
    X = 0.5 + noise + (s * (margin / 2 + np.abs(rng.normal(0, 0.1, n))))[:, None] * u
    return [FeatureRow(f"x{i:04d}", X[i], float(y[i])) for i in range(n)]


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""

    def record(number, name, ok, detail=""):
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}: {name}" + (f" ({detail})" if detail else "")
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
