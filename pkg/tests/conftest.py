import numpy as np
import pytest

from mixedfbm.fgn import GridPath
from mixedfbm.variation import VariationLadder


def ladder_from_u(us, k_min, kind="quadratic", top=0.0, T=1.0):
    """Ladder whose dyadic differences at ``k_min, k_min+1, ...`` equal ``us``."""
    factor = 1.0 if kind == "quadratic" else 2.0
    values = [top]
    for u in reversed(us):
        values.append(factor * values[-1] + u)
    return VariationLadder(kind, k_min, np.array(values[::-1]), T)


def ladder(values, k_min=0, kind="quadratic", T=1.0):
    return VariationLadder(kind, k_min, np.asarray(values, dtype=float), T)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_path(rng, n, T=1.0):
    return GridPath(n, T, np.concatenate([[0.0], np.cumsum(rng.standard_normal(n))]))


# (number, line) pairs filled by the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LINES: list[tuple[int, str]] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
