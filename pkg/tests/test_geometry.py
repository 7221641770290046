import math

import numpy as np
import pytest

from canyonsim.errors import ConfigError
from canyonsim.geometry import (
    Polyline,
    Side,
    bearing_deg,
    polyline_intersection,
    segment_intersection,
    wrap180,
)


def test_polyline_length_and_point_at():
    p = Polyline([[0, 0], [10, 0], [10, 5]])
    assert p.length == pytest.approx(15.0)
    assert np.allclose(p.point_at(10.0), [10, 0])
    assert np.allclose(p.point_at(12.5), [10, 2.5])
    assert np.allclose(p.point_at(99.0), [10, 5])  # clamped


def test_polyline_rejects_degenerate():
    with pytest.raises(ConfigError):
        Polyline([[0, 0]])
    with pytest.raises(ConfigError):
        Polyline([[0, 0], [0, 0]])


def test_project_sign_convention():
    p = Polyline([[0, 0], [100, 0]])
    s, lat = p.project([40, 3])
    assert s == pytest.approx(40.0)
    assert lat == pytest.approx(3.0)  # left of travel is positive
    s, lat = p.project([40, -3])
    assert lat == pytest.approx(-3.0)


def test_project_beyond_ends_uses_endpoint_distance():
    p = Polyline([[0, 0], [100, 0]])
    s, lat = p.project([110, 10])
    assert s == pytest.approx(100.0)
    assert abs(lat) == pytest.approx(math.hypot(10, 10))


def test_segment_intersection():
    pt = segment_intersection([0, 0], [10, 0], [5, -5], [5, 5])
    assert np.allclose(pt, [5, 0])
    assert segment_intersection([0, 0], [10, 0], [0, 1], [10, 1]) is None
    assert segment_intersection([0, 0], [1, 0], [5, -1], [5, 1]) is None


def test_polyline_intersection():
    a = Polyline([[0, 0], [100, 0]])
    b = Polyline([[50, -50], [50, 50]])
    assert np.allclose(polyline_intersection(a, b), [50, 0])
    c = Polyline([[0, 10], [100, 10]])
    assert polyline_intersection(a, c) is None


def test_bearing_and_wrap():
    assert bearing_deg([0, 0], [1, 0]) == pytest.approx(0.0)
    assert bearing_deg([0, 0], [0, 1]) == pytest.approx(90.0)
    assert bearing_deg([0, 0], [-1, 0]) == pytest.approx(180.0)
    assert wrap180(190.0) == pytest.approx(-170.0)
    assert wrap180(-190.0) == pytest.approx(170.0)


def test_side_parse():
    assert Side.parse("Left") is Side.LEFT
    assert Side.parse(Side.RIGHT) is Side.RIGHT
    with pytest.raises(ConfigError):
        Side.parse("middle")
