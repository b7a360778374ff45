"""Debug overlays of pipeline results (RGB uint8 images)."""

import math

import cv2
import numpy as np

from .geometry import cumulative_length, point_at

DARK_GREEN = (0, 100, 0)
PURPLE = (140, 40, 200)
RED = (230, 20, 20)
BLACK = (0, 0, 0)
WHITE = (255, 255, 255)
YELLOW = (250, 220, 30)

_SHIFT = 4


def _pts(poly):
    return np.rint(np.asarray(poly, dtype=float) * (1 << _SHIFT)).astype(np.int32).reshape(-1, 1, 2)


def _pt(p):
    return tuple(int(round(v * (1 << _SHIFT))) for v in p)


def dashed_circle(img, center, radius, color, thickness=2, n_dashes=24):
    step = 360.0 / n_dashes
    c, r = _pt(center), int(round(radius * (1 << _SHIFT)))
    for k in range(n_dashes):
        a = k * step
        cv2.ellipse(img, c, (r, r), 0, a, a + 0.55 * step, color, thickness, cv2.LINE_AA, _SHIFT)


def crossed_circle(img, center, radius, color, thickness=2):
    x, y = center
    cv2.circle(img, _pt(center), int(round(radius * (1 << _SHIFT))), color, thickness, cv2.LINE_AA, _SHIFT)
    d = radius / math.sqrt(2.0)
    for sx in (-1, 1):
        cv2.line(img, _pt((x - d, y - sx * d)), _pt((x + d, y + sx * d)), color, thickness, cv2.LINE_AA, _SHIFT)


def _polyline(img, poly, color, thickness):
    if len(poly) >= 2:
        cv2.polylines(img, [_pts(poly)], False, color, thickness, cv2.LINE_AA, _SHIFT)


def _box(center, yaw, along, across):
    c, s = math.cos(yaw), math.sin(yaw)
    t, n = np.array([c, s]), np.array([-s, c])
    p = np.asarray(center, dtype=float)
    return np.array(
        [p + sa * 0.5 * along * t + sb * 0.5 * across * n for sa, sb in ((-1, -1), (1, -1), (1, 1), (-1, 1))]
    )


def draw_result(image, result, px_per_mm=2.0, gripper=(10.0, 40.0), show_mask=True):
    """Draw the crop window, graph, peduncle, tomatoes and grasp onto a copy of ``image``."""
    out = np.array(image, dtype=np.uint8, copy=True)
    if show_mask and result.mask is not None:
        tint = out.astype(float)
        for label, color in ((1, (0, 255, 0)), (2, (255, 0, 0))):
            sel = result.mask == label
            tint[sel] = 0.7 * tint[sel] + 0.3 * np.array(color)
        out = np.clip(tint, 0, 255).astype(np.uint8)
    rect = result.rect
    if rect is not None:
        w, h = rect.out_shape[1], rect.out_shape[0]
        corners = np.array([[-0.5, -0.5], [w - 0.5, -0.5], [w - 0.5, h - 0.5], [-0.5, h - 0.5]])
        cv2.polylines(out, [_pts(rect.to_original(corners))], True, WHITE, 1, cv2.LINE_AA, _SHIFT)
    graph = result.graph
    if graph is not None and rect is not None:
        for e in graph.edges:
            _polyline(out, rect.to_original(e.polyline), DARK_GREEN, 2)
    ped = result.peduncle
    if ped is not None:
        _polyline(out, ped.polyline, YELLOW, 2)
    if graph is not None and rect is not None:
        for v in graph.vertices:
            color = RED if v.degree == 1 else PURPLE if v.degree >= 3 else DARK_GREEN
            p = rect.to_original(np.array([[v.x, v.y]]))[0]
            cv2.circle(out, _pt(p), 4 << _SHIFT, color, -1, cv2.LINE_AA, _SHIFT)
    for c in result.tomatoes:
        dashed_circle(out, (c.x, c.y), c.r, WHITE)
    if result.com is not None:
        crossed_circle(out, (result.com.x, result.com.y), 8, BLACK)
    plan = result.grasp
    if plan is not None and ped is not None:
        poly = np.asarray(ped.polyline, dtype=float)
        cum = cumulative_length(poly)
        for seg in plan.candidates:
            a, b = seg.s_a * px_per_mm, seg.s_b * px_per_mm
            ss = np.linspace(a, b, max(int(b - a), 1) + 1)
            _polyline(out, np.array([point_at(poly, cum, s) for s in ss]), BLACK, 3)
        width, length = gripper
        box = _box(plan.point, plan.yaw, width * px_per_mm, length * px_per_mm)
        cv2.polylines(out, [_pts(box)], True, RED, 2, cv2.LINE_AA, _SHIFT)
    return out
