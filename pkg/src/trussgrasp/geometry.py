"""Planar helpers for undirected orientations and polylines."""

import math

import numpy as np

from .exceptions import DegenerateEdge

HALF_PI = math.pi / 2.0


def fold_orientation(theta):
    """Fold an angle into (-pi/2, pi/2] (orientation of an undirected line)."""
    a = math.fmod(theta + HALF_PI, math.pi)
    if a < 0:
        a += math.pi
    a -= HALF_PI
    if a <= -HALF_PI:
        a += math.pi
    return a


def edge_orientation(v_s, v_d):
    """Orientation of the segment from ``v_s`` to ``v_d``, folded.

    Raises ``DegenerateEdge`` when the two points coincide.
    """
    dx = float(v_d[0]) - float(v_s[0])
    dy = float(v_d[1]) - float(v_s[1])
    if dx == 0.0 and dy == 0.0:
        raise DegenerateEdge("edge endpoints coincide")
    return fold_orientation(math.atan2(dy, dx))


def curvature(path_theta, edge_theta):
    """Circular distance between two undirected orientations, in [0, pi/2]."""
    d = abs(path_theta - edge_theta) % math.pi
    return min(d, math.pi - d)


def polyline_length(poly):
    poly = np.asarray(poly, dtype=float)
    if len(poly) < 2:
        return 0.0
    return float(np.hypot(*np.diff(poly, axis=0).T).sum())


def cumulative_length(poly):
    poly = np.asarray(poly, dtype=float)
    if len(poly) < 2:
        return np.zeros(len(poly))
    return np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(poly, axis=0).T))])


def point_at(poly, cum, s):
    """Point at arc position ``s`` (clamped) along a polyline."""
    s = min(max(float(s), 0.0), float(cum[-1]))
    i = int(np.searchsorted(cum, s, side="right")) - 1
    i = min(max(i, 0), len(poly) - 2)
    seg = cum[i + 1] - cum[i]
    t = 0.0 if seg <= 0 else (s - cum[i]) / seg
    return np.asarray(poly[i], dtype=float) * (1 - t) + np.asarray(poly[i + 1], dtype=float) * t


def project_to_polyline(poly, point):
    """Closest arc position and distance of ``point`` to a polyline."""
    poly = np.asarray(poly, dtype=float)
    cum = cumulative_length(poly)
    p = np.asarray(point, dtype=float)
    a, b = poly[:-1], poly[1:]
    d = b - a
    L2 = (d * d).sum(axis=1)
    t = np.where(L2 > 0, ((p - a) * d).sum(axis=1) / np.where(L2 > 0, L2, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    q = a + t[:, None] * d
    dist = np.hypot(*(q - p).T)
    i = int(dist.argmin())
    return float(cum[i] + t[i] * math.sqrt(L2[i])), float(dist[i])
