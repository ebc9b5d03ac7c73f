"""Shared fixtures: small grids, default coefficients and tiny run configurations."""

import pytest

from config.settings import RunConfig, parse_config
from core.grid import BCMode, GridSpec
from physics.params import ModelParams

TINY_CONFIG = """
[grid]
extents = [1.0, 1.0]
cells = [8, 8]

[initial]
preset = "rest"

[time]
dt = 1e-3
t_end = 2e-3

[solver]
tol = 1e-12

[verify]
cells = [8, 8]
steps = 2

[galerkin]
cells = [6, 6]
n_list = [1, 4]
dt = 1e-3
t_end = 2e-3

[dependence]
deltas = [1e-3]
t_end = 2e-3

[bench]
sizes = [8]
steps = 2
warmup = 1
threads = [1]
"""


@pytest.fixture
def grid():
    return GridSpec((1.0, 1.0), (8, 8), BCMode.PHYSICAL)


@pytest.fixture
def periodic_grid():
    return GridSpec((1.0, 1.0), (8, 8), BCMode.PERIODIC)


@pytest.fixture
def params():
    return ModelParams()


@pytest.fixture
def tiny_config_text():
    return TINY_CONFIG


@pytest.fixture
def tiny_config() -> RunConfig:
    return parse_config(TINY_CONFIG)

