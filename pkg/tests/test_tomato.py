import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trussgrasp._validation import Label
from trussgrasp.exceptions import NoTomatoes
from trussgrasp.tomato import (
    HoughConfig,
    TomatoCircle,
    TomatoDetector,
    center_of_mass,
    circle_support,
    detect_edges,
    disk_overlap,
    filter_overlap,
    fit_circle,
    hough_circles,
)


def disk_mask(shape, circles):
    m = np.zeros(shape, dtype=np.uint8)
    yy, xx = np.mgrid[: shape[0], : shape[1]]
    for x, y, r in circles:
        m[(xx - x) ** 2 + (yy - y) ** 2 <= r * r] = Label.TOMATO
    return m


def edge_xy(edges):
    ys, xs = np.nonzero(edges)
    return np.column_stack([xs, ys]).astype(float)


def test_edges_of_disk_follow_circle():
    e = detect_edges(disk_mask((120, 120), [(60, 60, 40)]))
    d = np.hypot(*(edge_xy(e) - 60).T)
    assert e.sum() > 200
    assert np.all(np.abs(d - 40) <= 1.5)
    assert d.max() - d.min() <= 2.0


def test_edges_empty_class():
    assert not detect_edges(np.zeros((30, 30), dtype=np.uint8)).any()


def test_edges_of_tangent_disks():
    e = detect_edges(disk_mask((100, 160), [(50, 50, 30), (110, 50, 30)]))
    pts = edge_xy(e)
    d1 = np.abs(np.hypot(*(pts - [50, 50]).T) - 30)
    d2 = np.abs(np.hypot(*(pts - [110, 50]).T) - 30)
    assert np.all(np.minimum(d1, d2) <= 1.5)
    # both circles are covered away from the contact point
    for cx in (50, 110):
        far = np.abs(np.hypot(*(pts - [cx, 50]).T) - 30) <= 1.5
        assert far.sum() > 120


def test_hough_single_circle():
    m = disk_mask((200, 200), [(100, 80, 35)])
    found = hough_circles(detect_edges(m))
    assert len(found) == 1
    c = found[0]
    assert math.hypot(c.x - 100, c.y - 80) <= 2
    assert abs(c.r - 35) <= 2


def test_hough_no_edges():
    assert hough_circles(np.zeros((50, 50), dtype=bool)) == []


def test_hough_five_tomatoes():
    truth = [(60, 60, 40), (170, 70, 35), (290, 60, 45), (100, 200, 38), (240, 190, 42)]
    m = disk_mask((260, 360), truth)
    found = hough_circles(detect_edges(m))
    assert len(found) == 5
    for x, y, r in truth:
        best = min(found, key=lambda c: math.hypot(c.x - x, c.y - y))
        assert math.hypot(best.x - x, best.y - y) <= 2
        assert abs(best.r - r) <= 2


def test_hough_respects_radius_range():
    m = disk_mask((200, 200), [(100, 100, 20)])
    assert hough_circles(detect_edges(m), HoughConfig(r_min=30, r_max=70)) == []


def test_hough_config_validation():
    with pytest.raises(ValueError):
        HoughConfig(r_min=40, r_max=30)
    with pytest.raises(ValueError):
        HoughConfig(min_center_dist=0)


def test_fit_circle_exact_points():
    t = np.linspace(0, 2 * np.pi, 50, endpoint=False)
    pts = np.column_stack([3 + 7 * np.cos(t), -2 + 7 * np.sin(t)])
    assert fit_circle(pts) == pytest.approx((3, -2, 7))


def test_support_of_full_and_half_circle():
    t = np.linspace(-np.pi, np.pi, 720, endpoint=False)
    pts = np.column_stack([50 + 30 * np.cos(t), 50 + 30 * np.sin(t)])
    c = TomatoCircle(50, 50, 30)
    assert circle_support(c, pts) == 1.0
    assert circle_support(c, pts[t < 0]) == pytest.approx(0.5)


def test_overlap_inside_and_outside():
    m = disk_mask((100, 100), [(50, 50, 40)])
    inside = TomatoCircle(50, 50, 20)
    outside = TomatoCircle(50, 50, 20)
    assert disk_overlap(inside, m) == 1.0
    assert filter_overlap([inside], m) == [inside]
    assert filter_overlap([outside], np.zeros_like(m)) == []


def test_overlap_half_plane_boundary_kept():
    m = np.zeros((100, 100), dtype=np.uint8)
    m[:, 51:] = Label.TOMATO
    c = TomatoCircle(50.5, 50.0, 10.0)
    # pixel-count oracle
    yy, xx = np.mgrid[:100, :100]
    inside = (xx - 50.5) ** 2 + (yy - 50.0) ** 2 <= 100.0
    assert (inside & (xx >= 51)).sum() * 2 == inside.sum()
    assert disk_overlap(c, m) == 0.5
    assert filter_overlap([c], m) == [c]


def test_overlap_counts_only_in_bounds_pixels():
    m = np.full((40, 40), Label.TOMATO, dtype=np.uint8)
    assert disk_overlap(TomatoCircle(0, 0, 15), m) == 1.0


@settings(max_examples=60, deadline=None)
@given(
    st.floats(10, 50),
    st.floats(10, 50),
    st.floats(3, 25),
    st.integers(0, 60),
    st.integers(0, 60),
)
def test_filter_overlap_monotone(x, y, r, cut_a, cut_b):
    base = disk_mask((60, 60), [(30, 30, 25)])
    lo, hi = sorted((cut_a, cut_b))
    big = base.copy()
    big[:, :lo] = 0
    small = big.copy()
    small[:, :hi] = 0
    c = TomatoCircle(x, y, r)
    if not filter_overlap([c], big):
        assert not filter_overlap([c], small)
    assert disk_overlap(c, small) <= disk_overlap(c, big)


def test_com_examples():
    assert center_of_mass([TomatoCircle(10, 20, 3)]).point == pytest.approx((10, 20))
    assert center_of_mass([TomatoCircle(0, 0, 2), TomatoCircle(10, 0, 2)]).point == pytest.approx((5, 0))
    com = center_of_mass([TomatoCircle(0, 0, 1), TomatoCircle(9, 0, 2)])
    assert com.point == pytest.approx((8, 0))
    assert com.n == 2
    assert com.to_dict() == {"com_x": 8.0, "com_y": 0.0, "n": 2}


def test_com_empty():
    with pytest.raises(NoTomatoes):
        center_of_mass([])


circles_st = st.lists(
    st.builds(TomatoCircle, st.floats(-500, 500), st.floats(-500, 500), st.floats(1, 80)),
    min_size=1,
    max_size=8,
)


@settings(max_examples=200, deadline=None)
@given(circles_st)
def test_com_inside_bounding_box(circles):
    com = center_of_mass(circles)
    xs, ys = [c.x for c in circles], [c.y for c in circles]
    assert min(xs) - 1e-9 <= com.x <= max(xs) + 1e-9
    assert min(ys) - 1e-9 <= com.y <= max(ys) + 1e-9


def test_detector_estimator_api():
    det = TomatoDetector(r_min=25, r_max=60)
    assert det.get_params()["r_min"] == 25
    m = disk_mask((200, 200), [(100, 100, 40)])
    found = det.fit().predict(m)
    assert len(found) == 1
    assert found[0].to_dict().keys() == {"cx", "cy", "r"}
