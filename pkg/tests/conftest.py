import numpy as np
import pytest

from meancov.streams import random_spd

_ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, name: str, passed: bool, detail: str = "") -> None:
    line = f"{'PASS' if passed else 'FAIL'} criterion {number:>2} {name}"
    if detail:
        line += f" :: {detail}"
    _ACCEPTANCE_LINES.append(line)
    print(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def spd(rng):
    def make(p: int) -> np.ndarray:
        return random_spd(rng, p)

    return make


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)


def random_group_element(rng: np.random.Generator, p1: int, p2: int):
    """Block-triangular element whose diagonal blocks have condition number at most e²."""
    from meancov.invariant_tests import GroupElement

    def block(k):
        q = np.linalg.qr(rng.standard_normal((k, k)))[0]
        return q * np.exp(rng.uniform(-1.0, 1.0, size=k))

    return GroupElement(block(p1), rng.standard_normal((p1, p2)), block(p2))
