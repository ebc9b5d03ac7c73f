import math

import numpy as np
import pytest

from config.settings import parse_config
from verify.dependence import bump, continuous_dependence, fit_gronwall


def test_bump_has_zero_mean(grid, periodic_grid):
    for g in (grid, periodic_grid):
        assert abs(float(np.mean(bump(g)))) < 1e-14


def test_zero_perturbation_gives_zero_distance(tiny_config):
    result = continuous_dependence(tiny_config, deltas=[0.0])
    assert result.summary["D_end"].iloc[0] == 0.0
    assert (result.series["D"] == 0.0).all()
    assert math.isnan(result.summary["C_fit"].iloc[0])
    assert math.isnan(result.ratio_spread)


def test_initial_distance_is_delta_times_bump(tiny_config):
    grid = tiny_config.grid_spec()
    result = continuous_dependence(tiny_config, deltas=[1e-3])
    norm = float(np.sqrt(np.sum(bump(grid) ** 2) * grid.cell_volume))
    assert result.summary["D0"].iloc[0] == pytest.approx(1e-3 * norm, rel=1e-12)
    assert len(result.series) == 3
    assert result.ratio_spread == pytest.approx(1.0)


def test_gronwall_fit_recovers_rate():
    t = np.array([0.0, 1.0, 2.0])
    G = np.ones(3)
    D = np.exp(2.0 * t)
    assert fit_gronwall(t, D, G) == pytest.approx(2.0)
    assert fit_gronwall(t, np.array([1.0, 0.5, 0.25]), G) == 0.0


def test_ratios_agree_across_deltas(tiny_config_text):
    config = parse_config(tiny_config_text, [
        "grid.cells=[16, 16]", "initial.preset=bubble", "initial.velocity=0.1", "time.dt=2e-4"])
    result = continuous_dependence(config, deltas=[1e-3, 1e-4, 1e-5], t_end=2e-3)
    assert len(result.summary) == 3
    assert (result.summary["D_end"] > 0.0).all()
    assert result.ratio_spread <= 2.0
