"""Colour segmentation, morphological clean-up and rotated cropping.

Pixels are described by two features: the a* channel of CIE L*a*b* (D65)
and the HSV hue. Both are scaled to [0, 1]; hue is treated as a circle.
Three k-means clusters are fitted in that space and each cluster is named
background, stem or tomato by its nearest class reference colour.
"""

from dataclasses import dataclass, field

import cv2
import numpy as np
from skimage.color import rgb2hsv, rgb2lab
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import Label, check_label_mask, check_rgb_image
from .exceptions import DegenerateInput, EmptyForeground

# (a*, hue in degrees) of the lab setup's blue belt, green stem, red fruit.
DEFAULT_REFERENCES = {
    Label.BACKGROUND: (15.0, 220.0),
    Label.STEM: (-45.0, 105.0),
    Label.TOMATO: (60.0, 0.0),
}


def compute_channels(img):
    """Return the ``(a_star, hue)`` planes of an RGB image.

    ``a_star`` is in CIE units, ``hue`` in degrees in [0, 360). Achromatic
    pixels get hue 0.
    """
    img = check_rgb_image(img)
    a_star = rgb2lab(img)[..., 1]
    hue = rgb2hsv(img)[..., 0] * 360.0
    return a_star, hue


def _normalize(a_star, hue):
    a = np.clip((np.asarray(a_star, dtype=float) + 128.0) / 255.0, 0.0, 1.0)
    h = np.mod(np.asarray(hue, dtype=float) / 360.0, 1.0)
    return np.stack([a.ravel(), h.ravel()], axis=1)


def _sq_dist(x, centers):
    """Squared distance with the second coordinate on the unit circle."""
    da = x[:, None, 0] - centers[None, :, 0]
    dh = np.abs(x[:, None, 1] - centers[None, :, 1])
    dh = np.minimum(dh, 1.0 - dh)
    return da * da + dh * dh


def _update(x, w, labels, k, old):
    centers = old.copy()
    for j in range(k):
        sel = labels == j
        if not sel.any():
            continue
        wj = w[sel]
        centers[j, 0] = np.average(x[sel, 0], weights=wj)
        ang = 2.0 * np.pi * x[sel, 1]
        mean = np.arctan2(np.sum(wj * np.sin(ang)), np.sum(wj * np.cos(ang)))
        centers[j, 1] = np.mod(mean / (2.0 * np.pi), 1.0)
    return centers


def circular_kmeans(x, weights, k=3, seed=0, max_iter=100, tol=1e-4):
    """Weighted k-means (k-means++ init) with a circular second feature."""
    rng = np.random.default_rng(seed)
    n = len(x)
    p = weights / weights.sum()
    centers = [x[rng.choice(n, p=p)]]
    for _ in range(1, k):
        d = _sq_dist(x, np.asarray(centers)).min(axis=1) * weights
        if d.sum() <= 0:
            break
        centers.append(x[rng.choice(n, p=d / d.sum())])
    centers = np.asarray(centers, dtype=float)
    for _ in range(max_iter):
        labels = _sq_dist(x, centers).argmin(axis=1)
        new = _update(x, weights, labels, k, centers)
        # re-seed empty clusters at the worst-served point
        for j in range(k):
            if not np.any(labels == j):
                worst = (_sq_dist(x, new).min(axis=1) * weights).argmax()
                new[j] = x[worst]
        da = np.abs(new[:, 0] - centers[:, 0])
        dh = np.abs(new[:, 1] - centers[:, 1])
        dh = np.minimum(dh, 1.0 - dh)
        shift = np.sqrt(da * da + dh * dh).max()
        centers = new
        if shift < tol:
            break
    return centers


@dataclass
class SegmentationThresholds:
    """Fitted cluster centres plus their class assignment.

    Classification is nearest-centroid in the normalized feature space.
    ``a_star_split`` / ``hue_split`` summarise the decision boundaries as
    scalars for reporting only.
    """

    centers: np.ndarray
    classes: np.ndarray
    a_star_split: float = 0.0
    hue_split: float = 0.0
    tomato_above_a_split: bool = True
    stem_below_hue_split: bool = True
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "centers": [[float(a), float(h)] for a, h in self.centers],
            "classes": [int(c) for c in self.classes],
            "a_star_split": float(self.a_star_split),
            "hue_split": float(self.hue_split),
            "tomato_above_a_split": bool(self.tomato_above_a_split),
            "stem_below_hue_split": bool(self.stem_below_hue_split),
        }


def _assign_classes(centers, references):
    labels = sorted(references)
    ref = _normalize(
        [references[lbl][0] for lbl in labels], [references[lbl][1] for lbl in labels]
    )
    nearest = _sq_dist(centers, ref).argmin(axis=1)
    return np.array([labels[i] for i in nearest], dtype=np.uint8)


def _splits(centers, classes):
    a = centers[:, 0] * 255.0 - 128.0
    h = centers[:, 1] * 360.0
    tomato = classes == Label.TOMATO
    a_split = 0.0
    if tomato.any() and (~tomato).any():
        a_split = 0.5 * (a[tomato].min() + a[~tomato].max())
    stem, bg = classes == Label.STEM, classes == Label.BACKGROUND
    h_split, stem_below = 0.0, True
    if stem.any() and bg.any():
        hs, hb = h[stem].mean(), h[bg].mean()
        h_split = 0.5 * (hs + hb)
        stem_below = bool(hs < hb)
    return float(a_split), float(h_split), stem_below


def thresholds_from_centers(centers, references=None):
    references = DEFAULT_REFERENCES if references is None else references
    centers = np.asarray(centers, dtype=float)
    classes = _assign_classes(centers, references)
    a_split, h_split, stem_below = _splits(centers, classes)
    return SegmentationThresholds(
        centers=centers,
        classes=classes,
        a_star_split=a_split,
        hue_split=h_split,
        stem_below_hue_split=stem_below,
    )


def fit_thresholds(
    a_star_plane,
    hue_plane,
    seed=0,
    max_iter=100,
    tol=1e-4,
    sample_size=20000,
    references=None,
):
    """Cluster (a*, hue) pairs into three classes.

    Raises ``DegenerateInput`` when fewer than three distinct feature values
    are present.
    """
    x = _normalize(a_star_plane, hue_plane)
    if len(x) == 0:
        raise DegenerateInput("empty feature planes")
    rng = np.random.default_rng(seed)
    if sample_size and len(x) > sample_size:
        x = x[np.sort(rng.choice(len(x), size=sample_size, replace=False))]
    uniq, counts = np.unique(np.round(x, 6), axis=0, return_counts=True)
    if len(uniq) < 3:
        raise DegenerateInput(f"only {len(uniq)} distinct colour feature(s)")
    centers = circular_kmeans(
        uniq, counts.astype(float), k=3, seed=seed, max_iter=max_iter, tol=tol
    )
    return thresholds_from_centers(centers, references)


def reference_thresholds(references=None):
    """Thresholds built from the class reference colours alone."""
    references = DEFAULT_REFERENCES if references is None else references
    labels = sorted(references)
    centers = _normalize(
        [references[lbl][0] for lbl in labels], [references[lbl][1] for lbl in labels]
    )
    return thresholds_from_centers(centers, references)


def classify_channels(a_star, hue, thr):
    shape = np.shape(a_star)
    x = _normalize(a_star, hue)
    nearest = _sq_dist(x, thr.centers).argmin(axis=1)
    return thr.classes[nearest].reshape(shape)


def segment(img, thr):
    """Label every pixel by its nearest fitted cluster."""
    a_star, hue = compute_channels(img)
    return classify_channels(a_star, hue, thr)


def disk(radius):
    return cv2.getStructuringElement(
        cv2.MORPH_ELLIPSE, (2 * int(radius) + 1, 2 * int(radius) + 1)
    )


def _remove_small(binary, min_px):
    if min_px <= 1 or not binary.any():
        return binary
    n, lab, stats, _ = cv2.connectedComponentsWithStats(
        binary.astype(np.uint8), connectivity=8
    )
    keep = stats[:, cv2.CC_STAT_AREA] >= min_px
    keep[0] = False
    return keep[lab]


def _denoise_once(mask, min_blob_px, se):
    out = np.zeros_like(mask)
    for cls in (Label.STEM, Label.TOMATO):
        b = (mask == cls).astype(np.uint8)
        b = cv2.morphologyEx(b, cv2.MORPH_OPEN, se)
        b = cv2.morphologyEx(b, cv2.MORPH_CLOSE, se)
        b = _remove_small(b.astype(bool), min_blob_px)
        out[b] = cls
    return out


def denoise(mask, min_blob_px=25, kernel_radius=2, max_passes=10):
    """Per-class opening then closing with a disk, then small-blob removal.

    Tomato wins where the cleaned stem and tomato regions overlap. The
    filter is repeated until the mask stops changing, which makes the
    result idempotent.
    """
    if kernel_radius < 1:
        raise ValueError("kernel_radius must be >= 1")
    mask = check_label_mask(mask)
    se = disk(kernel_radius)
    for _ in range(max_passes):
        new = _denoise_once(mask, min_blob_px, se)
        if np.array_equal(new, mask):
            break
        mask = new
    return mask


@dataclass(frozen=True)
class RotatedRect:
    """Rotated crop window. ``size`` is ``(width, height)`` in px."""

    center: tuple
    size: tuple
    angle: float

    @property
    def out_shape(self):
        return int(np.ceil(self.size[1] - 1e-9)), int(np.ceil(self.size[0] - 1e-9))

    def _origin(self):
        h, w = self.out_shape
        return np.array([(w - 1) / 2.0, (h - 1) / 2.0])

    def _rot(self):
        c, s = np.cos(self.angle), np.sin(self.angle)
        return np.array([[c, -s], [s, c]])

    def to_original(self, pts):
        """Map crop-frame ``(x, y)`` points to original image coordinates."""
        pts = np.asarray(pts, dtype=float)
        return (pts - self._origin()) @ self._rot().T + np.asarray(self.center)

    def to_crop(self, pts):
        pts = np.asarray(pts, dtype=float)
        return (pts - np.asarray(self.center)) @ self._rot() + self._origin()

    def affine(self):
        """2x3 matrix mapping crop pixels to original pixels."""
        r = self._rot()
        t = np.asarray(self.center) - r @ self._origin()
        return np.hstack([r, t[:, None]])

    def to_dict(self):
        return {
            "center": [float(self.center[0]), float(self.center[1])],
            "size": [float(self.size[0]), float(self.size[1])],
            "angle": float(self.angle),
        }


def _fold_half_pi(angle):
    """Fold an angle into (-pi/2, pi/2]."""
    a = np.mod(angle + np.pi / 2.0, np.pi) - np.pi / 2.0
    if a <= -np.pi / 2.0 + 1e-12:
        a += np.pi
    return float(a)


def min_area_rect(points):
    """Minimum-area enclosing rectangle by rotating calipers over the hull.

    Returns ``(center, (width, height), angle)`` with ``width >= height`` and
    the angle of the width side folded into (-pi/2, pi/2]; squares are
    folded into (-pi/4, pi/4].
    """
    pts = np.asarray(points, dtype=np.float64)
    hull = cv2.convexHull(pts.astype(np.float32)).reshape(-1, 2).astype(np.float64)
    if len(hull) < 3:
        hull = pts
    edges = np.roll(hull, -1, axis=0) - hull
    angles = np.unique(np.round(np.mod(np.arctan2(edges[:, 1], edges[:, 0]), np.pi / 2), 12))
    if len(angles) == 0:
        angles = np.array([0.0])
    best = None
    for a in angles:
        c, s = np.cos(a), np.sin(a)
        # coordinates in a frame rotated by a
        u = hull[:, 0] * c + hull[:, 1] * s
        v = -hull[:, 0] * s + hull[:, 1] * c
        w, h = u.max() - u.min(), v.max() - v.min()
        area = w * h
        key = (round(area, 9), abs(_fold_half_pi(a)))
        if best is None or key < best[0]:
            uc, vc = 0.5 * (u.max() + u.min()), 0.5 * (v.max() + v.min())
            center = (uc * c - vc * s, uc * s + vc * c)
            best = (key, center, w, h, a)
    _, center, w, h, a = best
    if abs(w - h) < 1e-9:
        a = np.mod(a + np.pi / 4.0, np.pi / 2.0) - np.pi / 4.0
        if a <= -np.pi / 4.0 + 1e-12:
            a += np.pi / 2.0
        return center, (w, h), float(a)
    if w < h:
        w, h, a = h, w, a + np.pi / 2.0
    return center, (w, h), _fold_half_pi(a)


def crop(mask, margin=5):
    """Crop the mask to the rotated bounding rectangle of the foreground.

    The returned mask is the rectangle resampled (nearest neighbour) into an
    axis-aligned array; the ``RotatedRect`` maps crop coordinates back.
    """
    mask = check_label_mask(mask)
    ys, xs = np.nonzero(mask != Label.BACKGROUND)
    if len(xs) == 0:
        raise EmptyForeground("no foreground pixels to crop")
    corners = np.concatenate(
        [np.stack([xs + dx, ys + dy], axis=1) for dx in (-0.5, 0.5) for dy in (-0.5, 0.5)]
    )
    center, (w, h), angle = min_area_rect(corners)
    rect = RotatedRect(
        center=(float(center[0]), float(center[1])),
        size=(float(w + 2 * margin), float(h + 2 * margin)),
        angle=float(angle),
    )
    out_h, out_w = rect.out_shape
    cropped = cv2.warpAffine(
        mask,
        rect.affine(),
        (out_w, out_h),
        flags=cv2.INTER_NEAREST | cv2.WARP_INVERSE_MAP,
        borderMode=cv2.BORDER_CONSTANT,
        borderValue=int(Label.BACKGROUND),
    )
    return cropped, rect


class ColorSegmenter(BaseEstimator, TransformerMixin):
    """Fit colour thresholds on calibration images and label new ones.

    ``fit`` accepts one image or a sequence of images (their pixels are
    pooled). ``transform`` returns the denoised label mask of one image.
    """

    def __init__(
        self,
        random_state=0,
        max_iter=100,
        tol=1e-4,
        sample_size=20000,
        min_blob_px=25,
        kernel_radius=2,
    ):
        self.random_state = random_state
        self.max_iter = max_iter
        self.tol = tol
        self.sample_size = sample_size
        self.min_blob_px = min_blob_px
        self.kernel_radius = kernel_radius

    def fit(self, X, y=None):
        images = list(X) if isinstance(X, (list, tuple)) else [X]
        planes = [compute_channels(img) for img in images]
        a = np.concatenate([p[0].ravel() for p in planes])
        h = np.concatenate([p[1].ravel() for p in planes])
        self.thresholds_ = fit_thresholds(
            a,
            h,
            seed=self.random_state,
            max_iter=self.max_iter,
            tol=self.tol,
            sample_size=self.sample_size,
        )
        return self

    def transform(self, X):
        check_is_fitted(self, "thresholds_")
        raw = segment(X, self.thresholds_)
        return denoise(raw, self.min_blob_px, self.kernel_radius)
