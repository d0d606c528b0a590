import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from elsafe.errors import RadiusTooSmall, SingularDirection
from elsafe.geometry import (BallObstacle, DistanceParams, ObstacleField, barrier, check_assumption3,
                             cover_unsafe_region, dumps_field, loads_field, unit_to_obstacle)

coords = st.floats(-5, 5, allow_nan=False)


def test_barrier_pythagorean():
    assert barrier(BallObstacle([3.0, 4.0], 1.0), [0.0, 0.0]) == pytest.approx(4.0, abs=1e-15)


def test_barrier_inside_is_negative():
    assert barrier(BallObstacle([0.0, 0.0], 0.5), [0.1, 0.0]) == pytest.approx(-0.4)


def test_unit_direction_points_at_center():
    u = unit_to_obstacle(BallObstacle([0.0, 2.0], 1.0), [0.0, 0.0])
    np.testing.assert_allclose(u, [0.0, 1.0])


def test_unit_direction_singular_at_center():
    with pytest.raises(SingularDirection):
        unit_to_obstacle(BallObstacle([1.0, 1.0], 0.3), [1.0, 1.0])


def test_obstacle_validation():
    with pytest.raises(ValueError):
        BallObstacle([0.0, 0.0], 0.0)
    with pytest.raises(ValueError):
        ObstacleField([[0.0, 0.0]], [-1.0])


def test_field_is_read_only():
    f = ObstacleField([[0.0, 0.0]], [1.0])
    with pytest.raises(ValueError):
        f.centers[0, 0] = 3.0


def test_empty_field():
    f = ObstacleField(np.zeros((0, 2)), [], dim=2)
    assert len(f) == 0 and f.near([0.0, 0.0], 1.0).size == 0
    assert f.min_radius == math.inf


@settings(max_examples=60, deadline=None)
@given(arrays(float, (12, 2), elements=coords), arrays(float, 12, elements=st.floats(0.01, 2)),
       arrays(float, 2, elements=coords), st.floats(0, 3))
def test_near_matches_brute_force(centers, radii, q, d_f):
    f = ObstacleField(centers, radii)
    expected = np.flatnonzero(np.linalg.norm(centers - q, axis=1) - radii <= d_f)
    np.testing.assert_array_equal(f.near(q, d_f), expected)


@settings(max_examples=40, deadline=None)
@given(arrays(float, (5, 3), elements=coords), arrays(float, 5, elements=st.floats(1e-3, 2)))
def test_field_text_round_trip(centers, radii):
    f = ObstacleField(centers, radii)
    g = loads_field(dumps_field(f))
    np.testing.assert_array_equal(g.centers, f.centers)
    np.testing.assert_array_equal(g.radii, f.radii)


def test_field_file_round_trip(tmp_path):
    f = ObstacleField([[0.5, 1.5], [2.0, -1.0]], [0.1745, 0.2])
    f.save(tmp_path / "obs.txt")
    g = ObstacleField.load(tmp_path / "obs.txt")
    np.testing.assert_array_equal(g.centers, f.centers)


def test_loads_rejects_bad_count():
    with pytest.raises(ValueError):
        loads_field("2 2\n0 0 1\n")


def _disc(pts):
    return np.linalg.norm(pts - np.array([0.5, 0.5]), axis=1) < 0.3


def test_cover_contains_every_unsafe_sample():
    f = cover_unsafe_region(_disc, [(0, 1), (0, 1)], 0.05, 0.05)
    pts = np.random.default_rng(0).uniform(0, 1, (4000, 2))
    bad = pts[_disc(pts)]
    inside = (np.linalg.norm(bad[:, None, :] - f.centers[None], axis=2) < f.radii).any(axis=1)
    assert inside.all()


def test_cover_order_is_row_major():
    f = cover_unsafe_region(lambda p: np.ones(len(p), bool), [(0, 0.2), (0, 0.3)], 0.1, 0.1)
    np.testing.assert_allclose(f.centers, [[0.05, 0.05], [0.05, 0.15], [0.05, 0.25],
                                           [0.15, 0.05], [0.15, 0.15], [0.15, 0.25]])


def test_cover_rejects_small_radius():
    with pytest.raises(RadiusTooSmall):
        cover_unsafe_region(_disc, [(0, 1), (0, 1)], 0.1, 0.07)


def test_cover_of_safe_region_is_empty():
    f = cover_unsafe_region(lambda p: np.zeros(len(p), bool), [(0, 1), (0, 1)], 0.1, 0.1)
    assert len(f) == 0


def test_ball_distance_check_counterexample_has_witness():
    # two balls whose boundaries overlap with a clear annulus region; centers 0.25 apart > d_a
    f = ObstacleField([[0.0, 0.0], [0.25, 0.0]], [0.1745, 0.1745])
    rep = check_assumption3(f, DistanceParams(0.1561, 0.0182, 0.00002))
    assert not rep.passed
    q, j, k = rep.witness
    h = f.barriers(q)
    assert (j, k) == (0, 1)
    assert h.min() >= -0.00002 and h[0] <= 0.0091 and h[1] <= 0.0091


def test_ball_distance_check_single_ball_passes():
    f = ObstacleField([[0.0, 0.0]], [0.2])
    assert check_assumption3(f, DistanceParams(0.1561, 0.0182, 0.00002)).passed


def test_ball_distance_check_grid_line_passes():
    # centers spaced one cell apart along a line: neighbors within d_a
    xs = np.arange(10) * 0.0698
    f = ObstacleField(np.column_stack([xs, np.zeros(10)]), np.full(10, 0.1745))
    assert check_assumption3(f, DistanceParams(0.1561, 0.0182, 0.00002)).passed


def test_distance_params_validation():
    with pytest.raises(ValueError):
        DistanceParams(0.1, 0.0, 0.1).validate()
    with pytest.raises(ValueError):
        DistanceParams(0.1, 0.1, 0.5).validate(ObstacleField([[0.0, 0.0]], [0.2]))
