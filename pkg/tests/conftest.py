"""Shared fixtures: one full-grid field plus the stacks, masks and sweeps
derived from it.  Session-scoped because the field simulation dominates
the suite's runtime."""
import numpy as np
import pytest

import cotf


@pytest.fixture(scope="session")
def default_field():
    return cotf.simulate_field(cotf.DEFAULT_APERTURE, cotf.DEFAULT_GRID)


@pytest.fixture(scope="session")
def small_field():
    grid = cotf.GridSpec(1.5, 1.5, 3.0, 0.25, 0.25, 0.25)
    aperture = cotf.ApertureSpec(half_angle=np.pi / 3, n_theta=24, n_phi=48)
    return cotf.simulate_field(aperture, grid)


@pytest.fixture(scope="session")
def point_stack(default_field):
    return cotf.build_stack(default_field, cotf.DEFAULT_POINT_GEOMETRY)


@pytest.fixture(scope="session")
def point_mask(point_stack):
    return cotf.mainlobe_mask(cotf.zero_channel_grid(point_stack))


@pytest.fixture(scope="session")
def point_sweep(point_stack, point_mask):
    return cotf.truncation_sweep(point_stack, point_mask, [30.0, 20.0, 10.0])


@pytest.fixture(scope="session")
def line_stack(default_field):
    return cotf.build_stack(default_field, cotf.DEFAULT_LINE_GEOMETRY)


@pytest.fixture(scope="session")
def line_mask(line_stack):
    return cotf.mainlobe_mask(cotf.zero_channel_grid(line_stack))


@pytest.fixture(scope="session")
def line_sweep(line_stack, line_mask):
    return cotf.truncation_sweep(line_stack, line_mask, [30.0, 20.0, 10.0])


@pytest.fixture(scope="session")
def cross_stack(default_field):
    return cotf.build_stack(default_field, cotf.DEFAULT_CROSS_GEOMETRY)


@pytest.fixture(scope="session")
def cross_mask(cross_stack):
    return cotf.mainlobe_mask(cotf.zero_channel_grid(cross_stack))


@pytest.fixture(scope="session")
def cross_sweep(cross_stack, cross_mask):
    return cotf.truncation_sweep(cross_stack, cross_mask, [40.0, 30.0, 20.0, 10.0])
