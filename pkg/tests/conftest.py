"""Shared grids, sources, and cached extremal solves.

Extremal construction is the expensive step, so one cache hands the same
solved pair to every test module that needs it.
"""

import numpy as np
import pytest
from hypothesis import settings

import schrostab as ss

settings.register_profile("suite", deadline=None, max_examples=40)
settings.load_profile("suite")


@pytest.fixture(scope="session")
def interval_grid():
    return ss.Grid(ss.Domain.interval(1.0), 127)


@pytest.fixture(scope="session")
def box_grid():
    return ss.Grid(ss.Domain.box2d(1.0, 1.0), 15)


@pytest.fixture(scope="session")
def radial_grid():
    return ss.Grid(ss.Domain.radial3d(8.0), 255)


@pytest.fixture(scope="session")
def const_source(interval_grid):
    return ss.SourceTerm.constant(interval_grid)


@pytest.fixture(scope="session")
def sine_src(interval_grid):
    return ss.SourceTerm(ss.sine_source(interval_grid))


class _ExtremalCache:
    def __init__(self):
        self._store = {}

    def max(self, p, f, key):
        k = ("max", p, key)
        if k not in self._store:
            self._store[k] = ss.solve_max_extremal(p, f)
        return self._store[k]

    def min(self, p, f, key):
        k = ("min", p, key)
        if k not in self._store:
            self._store[k] = ss.solve_min_extremal(p, f)
        return self._store[k]


@pytest.fixture(scope="session")
def extremals():
    return _ExtremalCache()


def smooth_unit(grid, rng, s):
    """Random smooth field normalized to unit L^s norm."""
    u = ss.smooth_random_field(grid, rng)
    norm = ss.lp_norm(u, s)
    assert norm > 0
    return u * (1.0 / norm)
