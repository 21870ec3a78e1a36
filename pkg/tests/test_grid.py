"""Interior-grid states and discrete Laplacian eigenstructure."""

import math

import numpy as np
import pytest

from spde_manifold.grid import (
    GridState,
    grid_from_json_dict,
    grid_inner,
    grid_norm,
    grid_to_json_dict,
    laplace_eigenvalue,
    sine_mode,
)


def test_grid_state_properties():
    s = GridState([1.0, 2.0, 3.0])
    assert s.M == 3
    assert s.h == pytest.approx(0.25)
    np.testing.assert_allclose(s.xs, [0.25, 0.5, 0.75])


def test_grid_state_rejects_bad_shapes():
    with pytest.raises(ValueError):
        GridState([])
    with pytest.raises(ValueError):
        GridState(np.ones((2, 2)))


def test_grid_arithmetic_and_size_check():
    a = GridState([1.0, 0.0])
    b = GridState([0.5, 2.0])
    np.testing.assert_allclose((a + b * 2.0).values, [2.0, 4.0])
    np.testing.assert_allclose((-a).values, [-1.0, 0.0])
    with pytest.raises(ValueError):
        a + GridState([1.0, 2.0, 3.0])


def test_grid_values_read_only():
    s = GridState([1.0, 2.0])
    with pytest.raises(ValueError):
        s.values[0] = 7.0


def test_sine_mode_values_and_norm():
    m, k = 15, 2
    mode = sine_mode(m, k)
    xs = mode.xs
    np.testing.assert_allclose(
        mode.values, math.sqrt(2.0) * np.sin(k * math.pi * xs), atol=1e-14
    )
    assert grid_norm(mode) == pytest.approx(1.0, rel=1e-13)


def test_sine_modes_orthogonal():
    m = 20
    for j in range(1, 4):
        for k in range(j + 1, 5):
            ip = grid_inner(sine_mode(m, j), sine_mode(m, k))
            assert abs(ip) < 1e-13


def test_sine_mode_k_out_of_range():
    with pytest.raises(ValueError):
        sine_mode(8, 0)
    with pytest.raises(ValueError):
        sine_mode(8, 9)


def test_unnormalized_mode():
    m, k = 9, 1
    raw = sine_mode(m, k, normalize=False)
    np.testing.assert_allclose(raw.values, np.sin(math.pi * raw.xs), atol=1e-14)


def test_laplace_eigenvalue_closed_form():
    m, k = 31, 3
    h = 1.0 / (m + 1)
    want = -(2.0 / h**2) * (1.0 - math.cos(k * math.pi * h))
    assert laplace_eigenvalue(m, k) == pytest.approx(want, rel=1e-15)
    # small k approaches the continuum value -(k pi)^2
    assert laplace_eigenvalue(255, 1) == pytest.approx(-math.pi**2, rel=1e-4)


def test_grid_inner_is_trapezoid_free_h_weighted_dot():
    a = GridState([1.0, 2.0, 3.0])
    b = GridState([4.0, 5.0, 6.0])
    assert grid_inner(a, b) == pytest.approx(0.25 * (4 + 10 + 18), rel=1e-15)


def test_grid_json_round_trip():
    s = GridState([0.25, -1.5, 3.0])
    back = grid_from_json_dict(grid_to_json_dict(s))
    np.testing.assert_array_equal(back.values, s.values)
    assert back.M == 3
