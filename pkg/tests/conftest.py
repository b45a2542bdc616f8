from __future__ import annotations

import functools

import pytest

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@functools.lru_cache(maxsize=None)
def cached_bowl(n: int, r_max: float = 60.0, tol: float = 1e-11, grid_step: float = 0.005):
    from mcflab.profiles import bowl_height

    return bowl_height(n, r_max, tol, grid_step)


@functools.lru_cache(maxsize=None)
def cached_wings(n: int, R: float, r_max: float, grid_step: float = 0.005):
    from mcflab.wings import build_wing_pair

    return build_wing_pair(n, R, r_max, grid_step=grid_step)


@pytest.fixture
def bowl2():
    return cached_bowl(2)
