import random

import pytest

from helpers import make_world

_ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


def record_acceptance(number: int, title: str, passed: bool, detail: str = "") -> None:
    _ACCEPTANCE[number] = (title, passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, passed, detail = _ACCEPTANCE[number]
        status = "PASS" if passed else "FAIL"
        line = f"[{status}] {number}. {title}"
        if detail:
            line += f" :: {detail}"
        terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return random.Random(1234)


@pytest.fixture(scope="session")
def world44():
    return make_world(4, 4, seed=44)


@pytest.fixture(scope="session")
def world33():
    return make_world(3, 3, seed=33)


@pytest.fixture(scope="session")
def identity_instances():
    from identities import make_instances

    return make_instances(100, seed=2024)
