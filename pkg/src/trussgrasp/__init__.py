"""Vine-tomato truss detection and caging grasp planning."""

from .config import PipelineConfig, load_config
from .evaluation import EvalCounts, ErrorStats, match_points, metrics
from .exceptions import (
    ConfigError,
    DegenerateEdge,
    DegenerateInput,
    EmptyForeground,
    EmptyStem,
    ManifestError,
    NoStem,
    NoTomatoes,
    NoValidGrasp,
    OutOfWorkspace,
    SpecViolation,
    TrussError,
)
from .grasp import EndEffectorModel, GraspConstraints, GraspPlan, GraspPlanner
from .imgproc import ColorSegmenter, RotatedRect, SegmentationThresholds
from .peduncle import GraphPath, PeduncleResult, find_peduncle
from .pipeline import DetectionResult, TrussPipeline
from .skeleton import StemGraph
from .tomato import HoughConfig, TomatoCircle, TomatoDetector, TrussCenterOfMass

__version__ = "0.1.0"

__all__ = [
    "ColorSegmenter",
    "ConfigError",
    "DegenerateEdge",
    "DegenerateInput",
    "DetectionResult",
    "EmptyForeground",
    "EmptyStem",
    "EndEffectorModel",
    "ErrorStats",
    "EvalCounts",
    "GraphPath",
    "GraspConstraints",
    "GraspPlan",
    "GraspPlanner",
    "HoughConfig",
    "ManifestError",
    "NoStem",
    "NoTomatoes",
    "NoValidGrasp",
    "OutOfWorkspace",
    "PeduncleResult",
    "PipelineConfig",
    "RotatedRect",
    "SegmentationThresholds",
    "SpecViolation",
    "StemGraph",
    "TomatoCircle",
    "TomatoDetector",
    "TrussCenterOfMass",
    "TrussError",
    "TrussPipeline",
    "find_peduncle",
    "load_config",
    "match_points",
    "metrics",
]
