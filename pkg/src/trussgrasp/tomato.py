"""Tomato detection: circle Hough transform on the tomato-segment edge."""

import math
from dataclasses import dataclass

import cv2
import numpy as np
from scipy import ndimage
from sklearn.base import BaseEstimator

from ._validation import Label, check_binary, check_label_mask
from .exceptions import NoTomatoes


@dataclass(frozen=True)
class TomatoCircle:
    x: float
    y: float
    r: float

    @property
    def center(self):
        return np.array([self.x, self.y])

    def to_dict(self):
        return {"cx": float(self.x), "cy": float(self.y), "r": float(self.r)}


@dataclass(frozen=True)
class TrussCenterOfMass:
    x: float
    y: float
    n: int

    @property
    def point(self):
        return np.array([self.x, self.y])

    def to_dict(self):
        return {"com_x": float(self.x), "com_y": float(self.y), "n": int(self.n)}


@dataclass(frozen=True)
class HoughConfig:
    """Circle Hough parameters, all in pixels except the two ratios.

    ``vote_threshold`` is the minimum angular support of a circle: the
    fraction of its circumference that has an edge pixel nearby.
    """

    r_min: float = 30.0
    r_max: float = 70.0
    min_center_dist: float = 40.0
    accumulator_resolution: float = 1.0
    canny_low: float = 50.0
    canny_high: float = 150.0
    vote_threshold: float = 0.35

    def __post_init__(self):
        if not 0 < self.r_min < self.r_max:
            raise ValueError("need 0 < r_min < r_max")
        if self.min_center_dist <= 0:
            raise ValueError("min_center_dist must be positive")
        if self.accumulator_resolution < 1:
            raise ValueError("accumulator_resolution must be >= 1")


def detect_edges(mask, low=50.0, high=150.0):
    """Canny edges of the binary tomato segment."""
    mask = check_label_mask(mask)
    binary = np.where(mask == Label.TOMATO, 255, 0).astype(np.uint8)
    if not binary.any():
        return np.zeros(mask.shape, dtype=bool)
    return cv2.Canny(binary, low, high) > 0


def edge_normals(edges, sigma=1.5):
    """Unsigned normal direction at every pixel of a thin edge map.

    The dominant eigenvector of the structure tensor of the blurred edge map
    points across the edge ridge.
    """
    e = ndimage.gaussian_filter(check_binary(edges, "edges").astype(float), sigma)
    gy, gx = np.gradient(e)
    j11 = ndimage.gaussian_filter(gx * gx, sigma)
    j12 = ndimage.gaussian_filter(gx * gy, sigma)
    j22 = ndimage.gaussian_filter(gy * gy, sigma)
    return 0.5 * np.arctan2(2.0 * j12, j11 - j22)


def hough_accumulator(edges, radii, resolution=1.0, normals=None):
    """Centre-vote image of shape ``(H', W')`` at the given bin size.

    Every edge pixel votes for the centres at each distance in ``radii``
    along both senses of its normal.
    """
    edges = check_binary(edges, "edges")
    h, w = edges.shape
    dp = float(resolution)
    hb, wb = int(math.ceil(h / dp)), int(math.ceil(w / dp))
    ey, ex = np.nonzero(edges)
    if len(ex) == 0:
        return np.zeros((hb, wb))
    if normals is None:
        normals = edge_normals(edges)
    theta = normals[ey, ex]
    nx, ny = np.cos(theta), np.sin(theta)
    r = np.asarray(radii, dtype=float)[:, None]
    idx = []
    for sign in (1.0, -1.0):
        cx = np.rint(ex[None, :] + sign * r * nx[None, :])
        cy = np.rint(ey[None, :] + sign * r * ny[None, :])
        ok = (cx >= 0) & (cx < w) & (cy >= 0) & (cy < h)
        bx = (cx[ok] / dp).astype(np.int64)
        by = (cy[ok] / dp).astype(np.int64)
        idx.append(by * wb + bx)
    votes = np.bincount(np.concatenate(idx), minlength=hb * wb)
    return votes.reshape(hb, wb).astype(float)


def _best_radius(x, y, edge_xy, radii):
    d = np.hypot(edge_xy[:, 0] - x, edge_xy[:, 1] - y)
    lo = radii[0] - 0.5
    hist = np.bincount(
        np.floor(d[(d >= lo) & (d < radii[-1] + 0.5)] - lo).astype(int), minlength=len(radii)
    )[: len(radii)].astype(float)
    hist = np.convolve(hist, [1.0, 2.0, 1.0], mode="same") / radii
    return float(radii[int(hist.argmax())])


def circle_support(circle, edge_xy, band=1.5, n_bins=90):
    """Fraction of angular bins holding an edge pixel within ``band`` of the circle."""
    if len(edge_xy) == 0:
        return 0.0
    d = edge_xy - np.array([circle.x, circle.y])
    dist = np.hypot(d[:, 0], d[:, 1])
    near = np.abs(dist - circle.r) <= band
    if not near.any():
        return 0.0
    ang = np.arctan2(d[near, 1], d[near, 0])
    bins = np.floor((ang + np.pi) / (2.0 * np.pi) * n_bins).astype(int) % n_bins
    return len(np.unique(bins)) / n_bins


def fit_circle(points):
    """Algebraic least-squares circle through ``points`` (Kasa fit)."""
    x, y = points[:, 0], points[:, 1]
    a = np.column_stack([x, y, np.ones_like(x)])
    b = x * x + y * y
    sol, *_ = np.linalg.lstsq(a, b, rcond=None)
    cx, cy = sol[0] / 2.0, sol[1] / 2.0
    r2 = sol[2] + cx * cx + cy * cy
    return cx, cy, math.sqrt(r2) if r2 > 0 else 0.0


def _refine(x, y, r, edge_xy, band):
    for _ in range(3):
        d = np.hypot(edge_xy[:, 0] - x, edge_xy[:, 1] - y)
        near = np.abs(d - r) <= band
        if near.sum() < 8:
            break
        x, y, r = fit_circle(edge_xy[near])
    return x, y, r


def hough_circles(edges, cfg=None, normals=None, max_candidates=200):
    """Fit circles to an edge image.

    Accumulator peaks propose candidates; each is refined by a least-squares
    fit on nearby edge pixels and scored by its angular edge support.
    Circles with support below ``vote_threshold`` are dropped, the rest are
    ranked by support (ties: smaller radius first) and accepted greedily when
    their centre is at least ``min_center_dist`` from every accepted one.
    """
    cfg = HoughConfig() if cfg is None else cfg
    edges = check_binary(edges, "edges")
    if not edges.any():
        return []
    radii = np.arange(int(math.floor(cfg.r_min)), int(math.ceil(cfg.r_max)) + 1).astype(float)
    dp = cfg.accumulator_resolution
    acc = hough_accumulator(edges, radii, dp, normals)
    smooth = ndimage.gaussian_filter(acc, sigma=1.5 / dp, mode="constant")
    local_max = smooth == ndimage.maximum_filter(smooth, size=5, mode="constant")
    cand = np.argwhere(local_max & (smooth > 0))
    if len(cand) == 0:
        return []
    scores = smooth[tuple(cand.T)]
    order = np.lexsort((cand[:, 1], cand[:, 0], -scores))[:max_candidates]
    ey, ex = np.nonzero(edges)
    edge_xy = np.column_stack([ex, ey]).astype(float)
    band = max(1.5, dp)
    found = []
    for i in order:
        yi, xi = cand[i]
        x0 = (xi + 0.5) * dp - 0.5
        y0 = (yi + 0.5) * dp - 0.5
        r0 = _best_radius(x0, y0, edge_xy, radii)
        x, y, r = _refine(x0, y0, r0, edge_xy, band + 1.0)
        if not cfg.r_min <= r <= cfg.r_max:
            continue
        circle = TomatoCircle(float(x), float(y), float(r))
        support = circle_support(circle, edge_xy, band)
        if support >= cfg.vote_threshold:
            found.append((support, circle))
    found.sort(key=lambda t: (-round(t[0], 9), t[1].r))
    kept = []
    for _, c in found:
        if all(math.hypot(c.x - k.x, c.y - k.y) >= cfg.min_center_dist for k in kept):
            kept.append(c)
    return kept


def disk_overlap(circle, mask):
    """Fraction of the circle's in-bounds pixels labelled tomato."""
    mask = check_label_mask(mask)
    h, w = mask.shape
    x0 = max(int(math.floor(circle.x - circle.r)), 0)
    x1 = min(int(math.ceil(circle.x + circle.r)) + 1, w)
    y0 = max(int(math.floor(circle.y - circle.r)), 0)
    y1 = min(int(math.ceil(circle.y + circle.r)) + 1, h)
    if x0 >= x1 or y0 >= y1:
        return 0.0
    yy, xx = np.mgrid[y0:y1, x0:x1]
    inside = (xx - circle.x) ** 2 + (yy - circle.y) ** 2 <= circle.r**2
    n = int(inside.sum())
    if n == 0:
        return 0.0
    return float((mask[y0:y1, x0:x1][inside] == Label.TOMATO).sum()) / n


def filter_overlap(circles, mask, min_overlap=0.5):
    """Drop circles covering the tomato segment by less than ``min_overlap``."""
    return [c for c in circles if disk_overlap(c, mask) >= min_overlap]


def center_of_mass(circles):
    """Volume-weighted mean of tomato centres (weights ``r**3``)."""
    circles = list(circles)
    if not circles:
        raise NoTomatoes("no tomatoes detected")
    c = np.array([[t.x, t.y] for t in circles], dtype=float)
    w = np.array([t.r for t in circles], dtype=float) ** 3
    com = (w[:, None] * c).sum(axis=0) / w.sum()
    return TrussCenterOfMass(float(com[0]), float(com[1]), len(circles))


class TomatoDetector(BaseEstimator):
    """Edge detection, Hough fitting and overlap filtering on a label mask."""

    def __init__(
        self,
        r_min=30.0,
        r_max=70.0,
        min_center_dist=40.0,
        accumulator_resolution=1.0,
        canny_low=50.0,
        canny_high=150.0,
        vote_threshold=0.35,
        min_overlap=0.5,
    ):
        self.r_min = r_min
        self.r_max = r_max
        self.min_center_dist = min_center_dist
        self.accumulator_resolution = accumulator_resolution
        self.canny_low = canny_low
        self.canny_high = canny_high
        self.vote_threshold = vote_threshold
        self.min_overlap = min_overlap

    def _config(self):
        return HoughConfig(
            r_min=self.r_min,
            r_max=self.r_max,
            min_center_dist=self.min_center_dist,
            accumulator_resolution=self.accumulator_resolution,
            canny_low=self.canny_low,
            canny_high=self.canny_high,
            vote_threshold=self.vote_threshold,
        )

    def fit(self, X=None, y=None):
        self.config_ = self._config()
        return self

    def predict(self, mask):
        cfg = getattr(self, "config_", None) or self._config()
        edges = detect_edges(mask, cfg.canny_low, cfg.canny_high)
        return filter_overlap(hough_circles(edges, cfg), mask, self.min_overlap)
