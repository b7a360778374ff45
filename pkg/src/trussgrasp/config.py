"""Pipeline configuration loaded from YAML.

Every section maps onto a dataclass; unknown sections or keys are rejected.
Example::

    camera:
      px_per_mm: 2.0
    tomato:
      diameter_mm: [30, 60]
    grasp:
      clearance_mm: 30
"""

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from .exceptions import ConfigError
from .tomato import HoughConfig


@dataclass
class CameraConfig:
    px_per_mm: float = 2.0


@dataclass
class SegmentationConfig:
    seed: int = 0
    # "kmeans" fits thresholds per image, "reference" uses fixed class colours
    mode: str = "kmeans"
    max_iter: int = 100
    sample_size: int = 20000
    min_blob_px: int = 25
    kernel_radius: int = 2
    crop_margin: int = 5


@dataclass
class TomatoConfig:
    diameter_mm: tuple = (30.0, 60.0)
    min_center_dist_px: float = 40.0
    accumulator_resolution: float = 1.0
    canny_low: float = 50.0
    canny_high: float = 150.0
    vote_threshold: float = 0.35
    min_overlap: float = 0.5

    def hough(self, px_per_mm):
        lo, hi = self.diameter_mm
        return HoughConfig(
            r_min=0.5 * lo * px_per_mm,
            r_max=0.5 * hi * px_per_mm,
            min_center_dist=self.min_center_dist_px,
            accumulator_resolution=self.accumulator_resolution,
            canny_low=self.canny_low,
            canny_high=self.canny_high,
            vote_threshold=self.vote_threshold,
        )


@dataclass
class PeduncleConfig:
    prune_len_mm: float = 10.0
    max_curvature_deg: float = 45.0
    reference: str = "path"
    # Douglas-Peucker tolerance for the arc parametrization used in planning
    simplify_px: float = 1.0


@dataclass
class GraspConfig:
    gripper_length_mm: float = 40.0
    gripper_width_mm: float = 10.0
    tip_height_mm: float = 10.0
    tip_thickness_mm: float = 3.0
    tip_distance_mm: float = 0.0
    max_opening_mm: float = 60.0
    clearance_mm: float = None
    junction_margin_mm: float = 3.0
    surface_z_mm: float = 0.0
    peduncle_height_mm: float = 20.0
    tangent_window_mm: float = 5.0
    approach_clearance_mm: float = 50.0
    lift_height_mm: float = 50.0
    place_xy_mm: tuple = None
    workspace_mm: dict = None
    endpoint_bounds: bool = False
    clearance_check: bool = False


@dataclass
class EvalConfig:
    tomato_match_ratio: float = 0.5
    junction_match_mm: float = 5.0


@dataclass
class OutputConfig:
    overlay: bool = False
    include_graph: bool = True


@dataclass
class PipelineConfig:
    camera: CameraConfig = field(default_factory=CameraConfig)
    segmentation: SegmentationConfig = field(default_factory=SegmentationConfig)
    tomato: TomatoConfig = field(default_factory=TomatoConfig)
    peduncle: PeduncleConfig = field(default_factory=PeduncleConfig)
    grasp: GraspConfig = field(default_factory=GraspConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def validate(self):
        if self.camera.px_per_mm <= 0:
            raise ConfigError("camera.px_per_mm must be positive")
        if self.segmentation.mode not in ("kmeans", "reference"):
            raise ConfigError("segmentation.mode must be 'kmeans' or 'reference'")
        if self.segmentation.kernel_radius < 1:
            raise ConfigError("segmentation.kernel_radius must be >= 1")
        if self.peduncle.reference not in ("path", "edge"):
            raise ConfigError("peduncle.reference must be 'path' or 'edge'")
        if self.peduncle.simplify_px is not None and self.peduncle.simplify_px < 0:
            raise ConfigError("peduncle.simplify_px must be >= 0")
        if not 0 < self.peduncle.max_curvature_deg <= 90:
            raise ConfigError("peduncle.max_curvature_deg must lie in (0, 90]")
        d = self.tomato.diameter_mm
        if len(d) != 2:
            raise ConfigError("tomato.diameter_mm must be [min, max]")
        try:
            self.tomato.hough(self.camera.px_per_mm)
        except ValueError as exc:
            raise ConfigError(f"tomato: {exc}") from exc
        g = self.grasp
        clearance = g.gripper_width_mm + 20.0 if g.clearance_mm is None else g.clearance_mm
        if clearance <= g.gripper_width_mm:
            raise ConfigError("grasp.clearance_mm must exceed the gripper width")
        if g.junction_margin_mm < 0:
            raise ConfigError("grasp.junction_margin_mm must be >= 0")
        if self.eval.tomato_match_ratio <= 0 or self.eval.junction_match_mm <= 0:
            raise ConfigError("eval match thresholds must be positive")
        return self

    def to_dict(self):
        return asdict(self)


_SEQUENCE_KEYS = {"diameter_mm", "place_xy_mm"}


def _build(cls, data, where):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be a mapping")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")
    kw = {}
    for k, v in data.items():
        if k in _SEQUENCE_KEYS and v is not None:
            v = tuple(float(x) for x in v)
        if k == "workspace_mm" and v is not None:
            v = {axis: (float(lo), float(hi)) for axis, (lo, hi) in v.items()}
        kw[k] = v
    try:
        return cls(**kw)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def from_dict(data):
    data = data or {}
    if not isinstance(data, dict):
        raise ConfigError("configuration root must be a mapping")
    sections = {f.name: f for f in fields(PipelineConfig)}
    unknown = sorted(set(data) - set(sections))
    if unknown:
        raise ConfigError(f"unknown config section(s): {', '.join(unknown)}")
    built = {}
    for name, f in sections.items():
        built[name] = _build(f.default_factory().__class__, data.get(name), name)
    return PipelineConfig(**built).validate()


def load_config(path=None):
    """Read a YAML file; ``None`` gives the defaults."""
    if path is None:
        return PipelineConfig().validate()
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
    return from_dict(data)
