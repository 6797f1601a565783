import numpy as np
import pytest

from risopt import (DissipationParams, EnergyModel, LoadPath, Nonlinearity,
                    TimeGrid, build_spaces, unit_spaces)
from risopt.solver import solve_ris


@pytest.fixture(scope="session")
def unit1():
    return unit_spaces(1)


@pytest.fixture(scope="session")
def fem3():
    return build_spaces(3, 1.0)


@pytest.fixture(scope="session")
def play_setup(unit1):
    model = EnergyModel(unit1, Nonlinearity("none"))
    grid = TimeGrid(1.0, 1000)
    ell = LoadPath.ramp(grid, [1.0], rate=2.0)
    return model, grid, ell


@pytest.fixture(scope="session")
def play_solution(play_setup):
    model, grid, ell = play_setup
    return solve_ris(model, ell, np.zeros(1), DissipationParams(eps=1e-3))


@pytest.fixture(scope="session")
def stick_setup(unit1):
    model = EnergyModel(unit1, Nonlinearity("none"))
    grid = TimeGrid(1.0, 200)
    ell = LoadPath.zero(grid, 1)
    return model, grid, ell


@pytest.fixture(scope="session")
def stick_solution(stick_setup):
    model, grid, ell = stick_setup
    return solve_ris(model, ell, np.zeros(1), DissipationParams(eps=1e-3))


@pytest.fixture(scope="session")
def doublewell_setup(unit1):
    model = EnergyModel(unit1, Nonlinearity("doublewell", a=2.25))
    grid = TimeGrid(2.0, 2000)
    ell = LoadPath.ramp(grid, [1.0], rate=1.0)
    return model, grid, ell


@pytest.fixture(scope="session")
def doublewell_solution(doublewell_setup):
    model, grid, ell = doublewell_setup
    path, _ = solve_ris(model, ell, np.zeros(1), DissipationParams(eps=1e-3),
                        compute_residuals=False)
    return path


@pytest.fixture(scope="session")
def sine_setup(unit1):
    model = EnergyModel(unit1, Nonlinearity("sine"))
    grid = TimeGrid(1.0, 1000)
    ell = LoadPath.ramp(grid, [1.0], rate=1.0, offset=1.5)
    return model, grid, ell


@pytest.fixture(scope="session")
def sine_ztilde(sine_setup):
    model, grid, ell = sine_setup
    path, _ = solve_ris(model, ell, np.zeros(1), DissipationParams(eps=1e-5),
                        compute_residuals=False)
    return path
