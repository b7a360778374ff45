"""End-to-end detection and grasp planning for one truss image."""

import math
import time
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import Label, check_rgb_image
from .config import PipelineConfig
from .exceptions import DegenerateInput, EmptyForeground, TrussError
from .grasp import GraspPlanner
from .imgproc import (
    classify_channels,
    compute_channels,
    crop,
    denoise,
    fit_thresholds,
    reference_thresholds,
)
from .peduncle import find_peduncle
from .skeleton import build_graph, prune_spurs, skeletonize
from .tomato import TomatoCircle, TomatoDetector, center_of_mass

SCHEMA_VERSION = 1
STAGES = ("segmentation", "tomato", "peduncle", "planning")


@dataclass
class DetectionResult:
    """Everything the pipeline found in one image, in original pixel coordinates."""

    mask: np.ndarray = None
    rect: object = None
    thresholds: object = None
    tomatoes: list = field(default_factory=list)
    com: object = None
    graph: object = None
    peduncle: object = None
    grasp: object = None
    failure: dict = None
    timings: dict = field(default_factory=dict)
    crop_transform: object = None

    @property
    def ok(self):
        return self.failure is None

    def to_dict(self, include_graph=True):
        """JSON-ready summary. Timings are left out so the output is reproducible."""
        d = {
            "schema_version": SCHEMA_VERSION,
            "ok": self.ok,
            "failure": self.failure,
            "crop": None if self.rect is None else self.rect.to_dict(),
            "tomatoes": [c.to_dict() for c in self.tomatoes],
            "center_of_mass": None if self.com is None else self.com.to_dict(),
            "peduncle": None if self.peduncle is None else self.peduncle.to_dict(),
            "grasp": None if self.grasp is None else self.grasp.to_dict(),
        }
        if include_graph:
            d["graph"] = (
                None if self.graph is None else self.graph.to_dict(self.crop_transform)
            )
        return d


def _failure(stage, exc):
    return {"stage": stage, "error": type(exc).__name__, "message": str(exc)}


class TrussPipeline(BaseEstimator):
    """Segmentation, tomato and peduncle detection, then grasp planning.

    ``fit`` optionally calibrates colour thresholds on a set of images; an
    unfitted pipeline fits them on each image it processes.
    """

    def __init__(self, config=None):
        self.config = config

    def _cfg(self):
        return PipelineConfig() if self.config is None else self.config

    def fit(self, X=None, y=None):
        cfg = self._cfg().validate()
        if X is not None:
            images = list(X) if isinstance(X, (list, tuple)) else [X]
            planes = [compute_channels(img) for img in images]
            self.thresholds_ = fit_thresholds(
                np.concatenate([p[0].ravel() for p in planes]),
                np.concatenate([p[1].ravel() for p in planes]),
                seed=cfg.segmentation.seed,
                max_iter=cfg.segmentation.max_iter,
                sample_size=cfg.segmentation.sample_size,
            )
        return self

    def _thresholds(self, a_star, hue, cfg):
        fitted = getattr(self, "thresholds_", None)
        if fitted is not None:
            return fitted
        if cfg.segmentation.mode == "reference":
            return reference_thresholds()
        try:
            return fit_thresholds(
                a_star,
                hue,
                seed=cfg.segmentation.seed,
                max_iter=cfg.segmentation.max_iter,
                sample_size=cfg.segmentation.sample_size,
            )
        except DegenerateInput:
            # a near-uniform image cannot be clustered; classify it against
            # the nominal class colours instead
            return reference_thresholds()

    def predict(self, X):
        """Run the pipeline on one RGB image and return a ``DetectionResult``."""
        cfg = self._cfg()
        img = check_rgb_image(X)
        res = DetectionResult()
        s = cfg.camera.px_per_mm
        stage = "segmentation"
        clock = time.perf_counter
        t0 = clock()
        tomato_error = None
        try:
            a_star, hue = compute_channels(img)
            res.thresholds = self._thresholds(a_star, hue, cfg)
            mask = denoise(
                classify_channels(a_star, hue, res.thresholds),
                cfg.segmentation.min_blob_px,
                cfg.segmentation.kernel_radius,
            )
            res.mask = mask
            if not (mask != Label.BACKGROUND).any():
                raise EmptyForeground("no truss pixels after segmentation")
            cropped, rect = crop(mask, cfg.segmentation.crop_margin)
            res.rect = rect
            res.crop_transform = rect.to_original
            t1 = clock()
            res.timings["segmentation"] = t1 - t0

            stage = "tomato"
            hough = cfg.tomato.hough(s)
            det = TomatoDetector(
                r_min=hough.r_min,
                r_max=hough.r_max,
                min_center_dist=hough.min_center_dist,
                accumulator_resolution=hough.accumulator_resolution,
                canny_low=hough.canny_low,
                canny_high=hough.canny_high,
                vote_threshold=hough.vote_threshold,
                min_overlap=cfg.tomato.min_overlap,
            )
            found = det.predict(cropped)
            if found:
                centers = rect.to_original(np.array([[c.x, c.y] for c in found]))
                res.tomatoes = [
                    TomatoCircle(float(x), float(y), c.r) for (x, y), c in zip(centers, found)
                ]
            try:
                res.com = center_of_mass(res.tomatoes)
            except TrussError as exc:
                tomato_error = exc
            t2 = clock()
            res.timings["tomato"] = t2 - t1

            # the stem is searched even without tomatoes so junctions can be scored
            stage = "peduncle"
            skel = skeletonize(cropped)
            graph = prune_spurs(build_graph(skel, s), cfg.peduncle.prune_len_mm, s)
            res.graph = graph
            ped = find_peduncle(
                graph,
                math.radians(cfg.peduncle.max_curvature_deg),
                cfg.peduncle.reference,
                cfg.peduncle.simplify_px or None,
            )
            res.peduncle = ped.transformed(rect.to_original)
            t3 = clock()
            res.timings["peduncle"] = t3 - t2
            if tomato_error is not None:
                stage = "tomato"
                raise tomato_error

            stage = "planning"
            obstacles = [
                rect.to_original(e.polyline) for e in graph.edges if e.id not in set(ped.path.edges)
            ]
            res.grasp = self._planner(cfg).predict(
                res.peduncle,
                res.com,
                stem=mask == Label.STEM,
                tomatoes=res.tomatoes,
                obstacles=obstacles,
            )
            res.timings["planning"] = clock() - t3
        except TrussError as exc:
            if tomato_error is not None:
                # the earlier stage's failure wins
                stage, exc = "tomato", tomato_error
            res.failure = _failure(stage, exc)
        res.timings["total"] = clock() - t0
        return res

    def _planner(self, cfg):
        g = cfg.grasp
        return GraspPlanner(
            gripper_length=g.gripper_length_mm,
            gripper_width=g.gripper_width_mm,
            tip_height=g.tip_height_mm,
            tip_thickness=g.tip_thickness_mm,
            tip_distance=g.tip_distance_mm,
            max_opening=g.max_opening_mm,
            clearance=g.clearance_mm,
            junction_margin=g.junction_margin_mm,
            px_per_mm=cfg.camera.px_per_mm,
            surface_z=g.surface_z_mm,
            peduncle_height=g.peduncle_height_mm,
            tangent_window=g.tangent_window_mm,
            approach_clearance=g.approach_clearance_mm,
            lift_height=g.lift_height_mm,
            place_xy=g.place_xy_mm,
            workspace=g.workspace_mm,
            endpoint_bounds=g.endpoint_bounds,
            clearance_check=g.clearance_check,
        )
