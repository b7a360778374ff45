"""Synthetic truss scenes with exact ground truth.

A truss is described in millimetres in its own frame (peduncle roughly
along +x), then scaled, rotated and translated into the image. Ground
truth comes from that geometry, never from the rendered raster.
"""

import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import cv2
import numpy as np

from ._io import read_image, read_json, write_json, write_png
from ._validation import Label
from .exceptions import ManifestError, SpecViolation
from .geometry import cumulative_length, point_at, project_to_polyline
from .tomato import TomatoCircle, center_of_mass

SCHEMA_VERSION = 1

DEFAULT_PALETTE = {
    "background": (30, 80, 160),
    "stem": (70, 150, 40),
    "tomato": (200, 30, 25),
}


@dataclass
class Pedicel:
    arc: float
    angle: float
    length: float


@dataclass
class TomatoSpec:
    pedicel: int
    radius: float


@dataclass
class TrussSpec:
    """Scene description. Lengths in mm unless suffixed ``_px``.

    ``peduncle`` is the centreline in the truss frame. A pedicel leaves the
    peduncle at arc length ``arc`` at ``angle`` (radians, relative to the
    local tangent) and reaches its tomato after ``length``.
    """

    peduncle: list
    pedicels: list = field(default_factory=list)
    tomatoes: list = field(default_factory=list)
    translation_px: tuple = (320.0, 240.0)
    rotation: float = 0.0
    px_per_mm: float = 2.0
    image_size: tuple = (640, 480)
    palette: dict = field(default_factory=lambda: dict(DEFAULT_PALETTE))
    peduncle_width: float = 5.0
    pedicel_width: float = 3.5
    noise_sigma: float = 0.0
    highlights: bool = False
    max_overlap: float = 0.0
    clearance: float = 30.0

    def to_dict(self):
        d = asdict(self)
        d["peduncle"] = [list(map(float, p)) for p in self.peduncle]
        d["palette"] = {k: list(v) for k, v in self.palette.items()}
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["pedicels"] = [Pedicel(**p) for p in d.get("pedicels", [])]
        d["tomatoes"] = [TomatoSpec(**t) for t in d.get("tomatoes", [])]
        d["palette"] = {k: tuple(v) for k, v in d.get("palette", DEFAULT_PALETTE).items()}
        d["translation_px"] = tuple(d.get("translation_px", (320.0, 240.0)))
        d["image_size"] = tuple(d.get("image_size", (640, 480)))
        return cls(**d)


@dataclass
class GroundTruth:
    mask: np.ndarray
    circles: list
    junctions: np.ndarray
    peduncle: np.ndarray
    com: np.ndarray
    junction_arcs_mm: np.ndarray
    candidates_mm: list
    clearance: float
    px_per_mm: float

    def to_dict(self, mask_file=None):
        return {
            "schema_version": SCHEMA_VERSION,
            "px_per_mm": float(self.px_per_mm),
            "mask_file": mask_file,
            "circles": [c.to_dict() for c in self.circles],
            "junctions": [[float(x), float(y)] for x, y in self.junctions],
            "junction_arcs_mm": [float(s) for s in self.junction_arcs_mm],
            "peduncle": [[float(x), float(y)] for x, y in self.peduncle],
            "center_of_mass": None if self.com is None else [float(v) for v in self.com],
            "clearance_mm": float(self.clearance),
            "candidates_mm": [[float(a), float(b)] for a, b in self.candidates_mm],
        }

    @classmethod
    def from_dict(cls, d, mask=None):
        com = d.get("center_of_mass")
        return cls(
            mask=mask,
            circles=[TomatoCircle(c["cx"], c["cy"], c["r"]) for c in d["circles"]],
            junctions=np.asarray(d["junctions"], dtype=float).reshape(-1, 2),
            peduncle=np.asarray(d["peduncle"], dtype=float).reshape(-1, 2),
            com=None if com is None else np.asarray(com, dtype=float),
            junction_arcs_mm=np.asarray(d["junction_arcs_mm"], dtype=float),
            candidates_mm=[tuple(c) for c in d["candidates_mm"]],
            clearance=float(d["clearance_mm"]),
            px_per_mm=float(d["px_per_mm"]),
        )


class _Geometry:
    """Truss geometry resolved into image pixels."""

    def __init__(self, spec):
        self.spec = spec
        s = spec.px_per_mm
        c, n = math.cos(spec.rotation), math.sin(spec.rotation)
        self._R = np.array([[c, -n], [n, c]])
        self._t = np.asarray(spec.translation_px, dtype=float)
        ped = np.asarray(spec.peduncle, dtype=float)
        if ped.ndim != 2 or len(ped) < 2:
            raise SpecViolation("peduncle needs at least two points")
        self.ped_mm = ped
        self.cum_mm = cumulative_length(ped)
        self.peduncle = self.to_px(ped)
        self.junction_mm, self.pedicel_end_mm, self.tomato_mm = [], [], []
        for p in spec.pedicels:
            if not 0.0 < p.arc < self.cum_mm[-1]:
                raise SpecViolation(f"pedicel arc {p.arc} outside the peduncle")
            j = point_at(ped, self.cum_mm, p.arc)
            d = self._direction(p.arc, p.angle)
            self.junction_mm.append(j)
            self.pedicel_end_mm.append((j, d, p.length))
        for t in spec.tomatoes:
            if not 0 <= t.pedicel < len(spec.pedicels):
                raise SpecViolation(f"tomato refers to missing pedicel {t.pedicel}")
            j, d, length = self.pedicel_end_mm[t.pedicel]
            self.tomato_mm.append((j + d * (length + t.radius), t.radius))
        self.scale = s

    def _direction(self, arc, angle):
        a = point_at(self.ped_mm, self.cum_mm, max(arc - 1.0, 0.0))
        b = point_at(self.ped_mm, self.cum_mm, min(arc + 1.0, self.cum_mm[-1]))
        tang = math.atan2(b[1] - a[1], b[0] - a[0]) + angle
        return np.array([math.cos(tang), math.sin(tang)])

    def to_px(self, pts_mm):
        pts = np.asarray(pts_mm, dtype=float).reshape(-1, 2)
        return pts * self.spec.px_per_mm @ self._R.T + self._t

    def circles(self):
        return [
            TomatoCircle(float(c[0]), float(c[1]), float(r * self.scale))
            for c, r in ((self.to_px(cm)[0], r) for cm, r in self.tomato_mm)
        ]

    def pedicel_segments_px(self):
        segs = []
        for k, (j, d, length) in enumerate(self.pedicel_end_mm):
            radius = next(
                (t.radius for t in self.spec.tomatoes if t.pedicel == k), 0.0
            )
            end = j + d * (length + 0.5 * radius)
            segs.append(self.to_px(np.array([j, end])))
        return segs


def _seg_dist(p, a, b):
    d = b - a
    L2 = float(d @ d)
    t = 0.0 if L2 == 0 else min(max(float((p - a) @ d) / L2, 0.0), 1.0)
    return float(np.hypot(*(a + t * d - p)))


def validate(spec):
    """Raise ``SpecViolation`` when the scene breaks its invariants."""
    geo = _Geometry(spec)
    w, h = spec.image_size
    s = spec.px_per_mm
    circles = geo.circles()
    for i, a in enumerate(circles):
        for b in circles[i + 1 :]:
            depth = a.r + b.r - math.hypot(a.x - b.x, a.y - b.y)
            if depth > spec.max_overlap * 2.0 * min(a.r, b.r):
                raise SpecViolation("tomatoes overlap too much")
    margin = 3.0
    for c in circles:
        if c.x - c.r < margin or c.y - c.r < margin or c.x + c.r > w - 1 - margin or c.y + c.r > h - 1 - margin:
            raise SpecViolation("tomato outside the image")
        _, dist = project_to_polyline(geo.peduncle, c.center)
        if dist < c.r + (0.5 * spec.peduncle_width + 1.0) * s:
            raise SpecViolation("tomato covers the peduncle")
    segs = geo.pedicel_segments_px()
    for ti, t in enumerate(spec.tomatoes):
        for k, seg in enumerate(segs):
            if k == t.pedicel:
                continue
            if _seg_dist(circles[ti].center, seg[0], seg[1]) < circles[ti].r + (0.5 * spec.pedicel_width + 1.0) * s:
                raise SpecViolation("tomato covers another pedicel")
    stem_pts = np.vstack([geo.peduncle] + segs)
    pad = 0.5 * spec.peduncle_width * s + margin
    if (stem_pts[:, 0] < pad).any() or (stem_pts[:, 1] < pad).any() or (stem_pts[:, 0] > w - 1 - pad).any() or (stem_pts[:, 1] > h - 1 - pad).any():
        raise SpecViolation("stem outside the image")
    ped = geo.ped_mm
    chord = ped[-1] - ped[0]
    base = math.atan2(chord[1], chord[0])
    for a, b in zip(ped[:-1], ped[1:]):
        dev = abs((math.atan2(b[1] - a[1], b[0] - a[0]) - base + math.pi) % (2 * math.pi) - math.pi)
        if dev >= math.pi / 4:
            raise SpecViolation("peduncle bends by 45 degrees or more")
    return geo


def _draw_polyline(canvas, pts, value, width_px):
    shift = 4
    p = np.rint(np.asarray(pts) * (1 << shift)).astype(np.int32).reshape(-1, 1, 2)
    cv2.polylines(canvas, [p], False, int(value), thickness=max(int(round(width_px)), 1), lineType=cv2.LINE_8, shift=shift)


def _disk(shape, cx, cy, r):
    h, w = shape
    x0, x1 = max(int(math.floor(cx - r)), 0), min(int(math.ceil(cx + r)) + 1, w)
    y0, y1 = max(int(math.floor(cy - r)), 0), min(int(math.ceil(cy + r)) + 1, h)
    yy, xx = np.mgrid[y0:y1, x0:x1]
    return (slice(y0, y1), slice(x0, x1)), (xx - cx) ** 2 + (yy - cy) ** 2 <= r * r


def truth_candidates(junction_arcs_mm, clearance):
    arcs = np.sort(np.asarray(junction_arcs_mm, dtype=float))
    return [
        (float(a + clearance), float(b - clearance))
        for a, b in zip(arcs[:-1], arcs[1:])
        if b - a >= 2 * clearance
    ]


def render(spec, seed=0):
    """Rasterize a scene. Returns ``(rgb_image, GroundTruth)``."""
    geo = validate(spec)
    w, h = spec.image_size
    s = spec.px_per_mm
    labels = np.zeros((h, w), dtype=np.uint8)
    _draw_polyline(labels, geo.peduncle, Label.STEM, spec.peduncle_width * s)
    for seg in geo.pedicel_segments_px():
        _draw_polyline(labels, seg, Label.STEM, spec.pedicel_width * s)
    circles = geo.circles()
    for c in circles:
        sl, inside = _disk(labels.shape, c.x, c.y, c.r)
        labels[sl][inside] = Label.TOMATO

    palette = np.array(
        [spec.palette["background"], spec.palette["stem"], spec.palette["tomato"]], dtype=float
    )
    img = palette[labels]
    rng = np.random.default_rng(seed)
    if spec.highlights:
        for c in circles:
            hr = 0.12 * c.r
            sl, inside = _disk(labels.shape, c.x - 0.35 * c.r, c.y - 0.35 * c.r, hr)
            patch = img[sl]
            patch[inside] = 0.6 * patch[inside] + 0.4 * np.array([255.0, 200.0, 190.0])
            img[sl] = patch
    if spec.noise_sigma > 0:
        img = img + rng.normal(0.0, spec.noise_sigma, size=img.shape)
    img = np.clip(np.rint(img), 0, 255).astype(np.uint8)

    junc_arcs = np.array(sorted(p.arc for p in spec.pedicels), dtype=float)
    junctions = geo.to_px(np.array([point_at(geo.ped_mm, geo.cum_mm, a) for a in junc_arcs]).reshape(-1, 2))
    com = center_of_mass(circles).point if circles else None
    truth = GroundTruth(
        mask=labels,
        circles=circles,
        junctions=junctions,
        peduncle=geo.peduncle,
        com=com,
        junction_arcs_mm=junc_arcs,
        candidates_mm=truth_candidates(junc_arcs, spec.clearance),
        clearance=spec.clearance,
        px_per_mm=s,
    )
    return img, truth


DIFFICULTIES = ("simple", "realistic")


def _jitter_palette(rng, amount):
    out = {}
    for k, v in DEFAULT_PALETTE.items():
        out[k] = tuple(int(np.clip(c + rng.integers(-amount, amount + 1), 0, 255)) for c in v)
    return out


def random_spec(rng, difficulty="simple", px_per_mm=2.0, image_size=(640, 480), clearance=30.0):
    """Draw one truss description for the given difficulty."""
    if difficulty not in DIFFICULTIES:
        raise ValueError(f"difficulty must be one of {DIFFICULTIES}")
    simple = difficulty == "simple"
    n = 4 if simple else 5
    if simple:
        gaps = list(rng.uniform(74.0, 84.0, size=n - 1))
    else:
        gaps = list(rng.uniform(44.0, 54.0, size=n - 1))
        gaps[int(rng.integers(0, n - 1))] = float(rng.uniform(78.0, 88.0))
    ends = rng.uniform(20.0, 26.0, size=2)
    total = float(ends.sum() + sum(gaps))
    if simple:
        peduncle = [[-total / 2.0, 0.0], [total / 2.0, 0.0]]
    else:
        bend = math.radians(rng.uniform(-20.0, 20.0))
        ts = np.linspace(0.0, 1.0, 41)
        heading = bend * (ts - 0.5)
        step = total / (len(ts) - 1)
        xy = np.zeros((len(ts), 2))
        for i in range(1, len(ts)):
            a = 0.5 * (heading[i - 1] + heading[i])
            xy[i] = xy[i - 1] + step * np.array([math.cos(a), math.sin(a)])
        xy -= 0.5 * (xy[0] + xy[-1])
        peduncle = xy.tolist()
    arcs = ends[0] + np.concatenate([[0.0], np.cumsum(gaps)])
    if not simple:
        # the curved centreline is slightly longer than the nominal sum
        arcs = arcs * cumulative_length(np.asarray(peduncle))[-1] / total
    side0 = 1.0 if rng.random() < 0.5 else -1.0
    pedicels, tomatoes = [], []
    lo, hi = (65.0, 90.0) if simple else (65.0, 85.0)
    for k, a in enumerate(arcs):
        side = side0 * (1.0 if k % 2 == 0 else -1.0)
        angle = side * math.radians(rng.uniform(lo, hi))
        pedicels.append(Pedicel(float(a), float(angle), float(rng.uniform(14.0, 20.0))))
        radius = rng.uniform(20.0, 25.0) if simple else rng.uniform(18.0, 24.0)
        tomatoes.append(TomatoSpec(k, float(radius)))
    rot = math.radians(rng.uniform(-10.0, 10.0) if simple else rng.uniform(-12.0, 12.0))
    w, h = image_size
    return TrussSpec(
        peduncle=peduncle,
        pedicels=pedicels,
        tomatoes=tomatoes,
        translation_px=(w / 2.0 + rng.uniform(-8.0, 8.0), h / 2.0 + rng.uniform(-8.0, 8.0)),
        rotation=float(rot),
        px_per_mm=px_per_mm,
        image_size=tuple(image_size),
        palette=_jitter_palette(rng, 6 if simple else 12),
        peduncle_width=6.0 if simple else 4.5,
        pedicel_width=4.0 if simple else 3.5,
        noise_sigma=0.0 if simple else 3.0,
        highlights=not simple,
        max_overlap=0.0,
        clearance=clearance,
    )


def scene_seeds(n, seed):
    return [int(ss.generate_state(1)[0]) for ss in np.random.SeedSequence(seed).spawn(n)]


def make_scene(scene_seed, difficulty="simple", max_tries=200, **kw):
    rng = np.random.default_rng(scene_seed)
    for _ in range(max_tries):
        spec = random_spec(rng, difficulty, **kw)
        try:
            validate(spec)
        except SpecViolation:
            continue
        img, truth = render(spec, seed=scene_seed)
        return spec, img, truth
    raise SpecViolation(f"could not draw a valid {difficulty} scene in {max_tries} tries")


def corpus(n, seed=0, difficulty="simple", **kw):
    """``n`` deterministic scenes as ``(image, GroundTruth)`` pairs."""
    if n < 1:
        raise ValueError("n must be >= 1")
    out = []
    for ss in scene_seeds(n, seed):
        _, img, truth = make_scene(ss, difficulty, **kw)
        out.append((img, truth))
    return out


def write_corpus(out_dir, n, seed=0, difficulty="simple", **kw):
    """Write scenes, ground-truth sidecars and ``manifest.json``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, ss in enumerate(scene_seeds(n, seed)):
        spec, img, truth = make_scene(ss, difficulty, **kw)
        stem = f"scene_{i:04d}"
        write_png(out / f"{stem}.png", img)
        write_png(out / f"{stem}_mask.png", truth.mask)
        gt = truth.to_dict(mask_file=f"{stem}_mask.png")
        gt["scene_seed"] = ss
        gt["spec"] = spec.to_dict()
        write_json(out / f"{stem}.json", gt)
        entries.append({"image": f"{stem}.png", "truth": f"{stem}.json"})
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "seed": int(seed),
        "n": int(n),
        "difficulty": difficulty,
        "px_per_mm": float(kw.get("px_per_mm", 2.0)),
        "scenes": entries,
    }
    write_json(out / "manifest.json", manifest)
    return out / "manifest.json"


def load_manifest(path):
    """Read and check a corpus manifest. Returns ``(manifest, base_dir)``."""
    path = Path(path)
    m = read_json(path)
    if not isinstance(m, dict) or m.get("schema_version") != SCHEMA_VERSION:
        raise ManifestError(f"{path}: unsupported or missing schema_version")
    scenes = m.get("scenes")
    if not isinstance(scenes, list) or not scenes:
        raise ManifestError(f"{path}: manifest lists no scenes")
    for k, e in enumerate(scenes):
        if not isinstance(e, dict) or not {"image", "truth"} <= set(e):
            raise ManifestError(f"{path}: scene {k} needs 'image' and 'truth'")
    return m, path.parent


def load_scene(base_dir, entry):
    """Image and ``GroundTruth`` for one manifest entry."""
    base = Path(base_dir)
    img = read_image(base / entry["image"])
    d = read_json(base / entry["truth"])
    try:
        mask = None
        if d.get("mask_file"):
            mask = read_image(base / d["mask_file"], color=False)
        truth = GroundTruth.from_dict(d, mask=mask)
    except (KeyError, TypeError, ValueError) as exc:
        raise ManifestError(f"{entry['truth']}: malformed ground truth ({exc})") from exc
    return img, truth
