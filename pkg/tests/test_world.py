import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mobilecharger import world as W
from mobilecharger.errors import AllHoles
from mobilecharger.geometry import Vec3


def test_normalize_yaw():
    assert W.normalize_yaw(180) == 180
    assert W.normalize_yaw(-180) == 180
    assert W.normalize_yaw(370) == pytest.approx(10)
    assert W.normalize_yaw(-190) == pytest.approx(170)


@given(st.floats(-1e4, 1e4))
def test_normalize_yaw_range(a):
    v = W.normalize_yaw(a)
    assert -180 < v <= 180
    assert math.isclose(math.cos(math.radians(v)), math.cos(math.radians(a)), abs_tol=1e-9)


def test_electrode_straight_ahead():
    w = W.initial_world(0, 25)
    assert w.electrode_in_delta() == Vec3(0.0, 0.0, 25.0)
    assert w.distance_to_electrode() == 25


def test_yaw_moves_target_sideways():
    p = W.initial_world(20, 25).electrode_in_delta()
    assert p.x == pytest.approx(-25 * math.sin(math.radians(20)))
    assert p.z == pytest.approx(25 * math.cos(math.radians(20)))


def test_delta_y_points_down():
    # electrode below the actuator origin gives positive Y
    w = W.initial_world(0, 25, height=10, delta_height=16)
    assert w.electrode_in_delta().y == pytest.approx(6.0)


def test_advance_and_rotate():
    w = W.initial_world(0, 25)
    w2 = W.advance(w, 5)
    assert w2.electrode_in_delta().z == pytest.approx(20)
    w3 = W.rotate(w2, 90)
    assert w3.charger.yaw == 90
    with pytest.raises(ValueError):
        W.advance(w, -1)


def test_visibility_cone_and_range():
    d = W.DetectorModel()
    assert W.visible(W.initial_world(0, 25), d)
    assert W.visible(W.initial_world(20, 25), d)
    assert not W.visible(W.initial_world(90, 25), d)
    assert not W.visible(W.initial_world(0, 60), d)


def test_detection_rate_monte_carlo():
    d = W.DetectorModel(miss_prob=0.15)
    w = W.initial_world(0, 25)
    rng = np.random.default_rng(7)
    n = 40_000
    hits = sum(W.observe(w, d, rng).detected for _ in range(n))
    assert abs(hits / n - 0.85) < 0.01


def test_lighting_scales_miss_probability():
    assert W.DetectorModel(miss_prob=0.2, lighting="dark").effective_miss_prob == pytest.approx(0.36)
    assert W.DetectorModel(miss_prob=0.2, lighting="bright").effective_miss_prob == pytest.approx(0.14)
    assert W.DetectorModel(miss_prob=0.8, lighting="dark").effective_miss_prob == 1.0
    with pytest.raises(ValueError):
        W.DetectorModel(lighting="dusk")


def test_noiseless_observation_is_exact():
    d = W.DetectorModel(miss_prob=0, center_noise_sigma=0)
    w = W.initial_world(10, 25)
    obs = W.observe(w, d, np.random.default_rng(0))
    assert obs.detected
    assert np.allclose(obs.bbox_center_cam.as_array(), W.electrode_in_camera(w, d).as_array())
    # range is measured from the camera, 19 cm above the actuator origin
    assert obs.distance == pytest.approx(math.hypot(25.0, 19.0))


def brute_nearest(grid, r0, c0):
    best = None
    for r, c in itertools.product(range(grid.shape[0]), range(grid.shape[1])):
        if grid[r, c] == 0:
            continue
        d = (r - r0) ** 2 + (c - c0) ** 2
        if best is None or d < best[0]:
            best = (d, r, c)
    return best[1], best[2]


def test_nearest_valid_depth_brute_force(rng):
    for _ in range(30):
        grid = W.synthetic_depth_grid(rng, 30.0, hole_fraction=0.7, shape=(17, 23))
        if not grid.any():
            continue
        r0, c0 = int(rng.integers(17)), int(rng.integers(23))
        assert W.nearest_valid_depth(grid, (r0, c0)) == brute_nearest(grid, r0, c0)


def test_nearest_valid_depth_valid_pixel_returns_itself():
    grid = np.ones((4, 4))
    assert W.nearest_valid_depth(grid, (2, 3)) == (2, 3)


def test_nearest_valid_depth_tie_break_row_major():
    grid = np.zeros((3, 3))
    grid[1, 0] = grid[1, 2] = grid[0, 1] = 5.0
    assert W.nearest_valid_depth(grid, (1, 1)) == (0, 1)


def test_all_holes():
    with pytest.raises(AllHoles):
        W.nearest_valid_depth(np.zeros((5, 5)), (2, 2))


def test_full_size_depth_grid(rng):
    g = W.synthetic_depth_grid(rng, 25.0)
    assert g.shape == W.DEPTH_GRID_SHAPE
    hole = tuple(np.argwhere(g == 0)[0])
    r, c = W.nearest_valid_depth(g, hole)
    assert g[r, c] == 25.0
