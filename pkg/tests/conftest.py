import numpy as np
import pytest

from qstein.states import IID, MarkovLift, RotatedMarkovLift, hadamard

STANDARD_P = np.array([[0.9, 0.1], [0.2, 0.8]])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def markov():
    return MarkovLift(STANDARD_P)


@pytest.fixture
def rotated():
    return RotatedMarkovLift(STANDARD_P, unitary=hadamard())


@pytest.fixture
def uniform():
    return IID.diagonal([0.5, 0.5])


@pytest.fixture
def skewed():
    return IID.diagonal([0.9, 0.1])


# acceptance bookkeeping: each criterion part records its verdict here and
# the terminal summary prints one line per criterion
ACCEPTANCE: dict[int, list[tuple[str, bool, str]]] = {}


def record(criterion: int, part: str, ok: bool, detail: str = "") -> bool:
    ACCEPTANCE.setdefault(criterion, []).append((part, bool(ok), detail))
    return bool(ok)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for c in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[c]
        verdict = "PASS" if all(ok for _, ok, _ in parts) else "FAIL"
        detail = "; ".join(f"{p}={'ok' if ok else 'FAIL'} {d}".strip() for p, ok, d in parts)
        terminalreporter.write_line(f"criterion {c:2d}: {verdict} | {detail}")
