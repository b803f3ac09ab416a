import logging

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ekma_surrogate.isopleths import contour_lines, default_levels, extract_contours

GRID = np.array([0.5, 1.0, 1.5])


def test_planar_field():
    z = np.repeat(GRID[:, None], 3, axis=1)  # z[i][j] = alpha_i
    (line,) = contour_lines(z, GRID, GRID, 1.0)
    assert np.all(np.abs(line[:, 0] - 1.0) <= 1e-9)
    assert sorted(line[:, 1]) == [0.5, 1.0, 1.5]


def test_single_cell_midpoints():
    z = np.array([[0.0, 0.0], [1.0, 1.0]])
    (line,) = contour_lines(z, [0.0, 1.0], [0.0, 1.0], 0.5)
    assert sorted(map(tuple, line)) == [(0.5, 0.0), (0.5, 1.0)]


def test_constant_field(caplog):
    with caplog.at_level(logging.WARNING):
        assert extract_contours(np.full((3, 3), 0.04), GRID, GRID, [0.03, 0.04, 0.05]) == []
    assert default_levels(np.full((3, 3), 0.04)) == []


def test_level_out_of_range_warns(caplog):
    z = np.repeat(GRID[:, None], 3, axis=1)
    with caplog.at_level(logging.WARNING):
        assert extract_contours(z, GRID, GRID, [2.0]) == []
    assert "outside" in caplog.text


def test_closed_loop():
    z = np.zeros((5, 5))
    z[2, 2] = 1.0
    (line,) = contour_lines(z, np.arange(5.0), np.arange(5.0), 0.5)
    assert np.array_equal(line[0], line[-1]) and len(line) == 5


def test_saddle_resolved_by_centre():
    z = np.array([[1.0, 0.0], [0.0, 1.0]])
    lines = contour_lines(z, [0.0, 1.0], [0.0, 1.0], 0.4)  # centre 0.5 is high
    assert len(lines) == 2
    assert all(len(l) == 2 for l in lines)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.1, 0.9))
def test_vertices_on_level(seed, q):
    rng = np.random.default_rng(seed)
    z = rng.uniform(size=(6, 5))
    xs, ys = np.linspace(0.5, 1.5, 6), np.linspace(0.5, 1.5, 5)
    level = float(np.quantile(z, q))
    for iso in extract_contours(z, xs, ys, [level]):
        for x, y in iso.points:
            # bilinear interpolation on an edge is linear, so z along the edge hits the level
            i = np.searchsorted(xs, x, side="right") - 1
            j = np.searchsorted(ys, y, side="right") - 1
            i, j = min(i, 4), min(j, 3)
            tx = (x - xs[i]) / (xs[i + 1] - xs[i])
            ty = (y - ys[j]) / (ys[j + 1] - ys[j])
            val = ((1 - tx) * (1 - ty) * z[i, j] + tx * (1 - ty) * z[i + 1, j]
                   + (1 - tx) * ty * z[i, j + 1] + tx * ty * z[i + 1, j + 1])
            assert val == pytest.approx(level, abs=1e-9)
