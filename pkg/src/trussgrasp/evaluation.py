"""Detection metrics against synthetic ground truth.

Ratios whose denominator is zero are reported as ``None``. Standard
deviations use the population divisor ``n``.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import project_to_polyline


@dataclass(frozen=True)
class EvalCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn) < 0:
            raise ValueError("counts must be non-negative")

    @property
    def tpr(self):
        d = self.tp + self.fn
        return self.tp / d if d else None

    @property
    def fdr(self):
        d = self.fp + self.tp
        return self.fp / d if d else None

    def __add__(self, other):
        return EvalCounts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)

    def to_dict(self):
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tpr": self.tpr, "fdr": self.fdr}


@dataclass(frozen=True)
class ErrorStats:
    n: int
    mean_abs: float
    std: float

    def to_dict(self):
        return {"n": self.n, "mean_abs_mm": self.mean_abs, "std_mm": self.std}


def metrics(tp, fp, fn):
    return EvalCounts(int(tp), int(fp), int(fn))


def match_points(detected, truth, max_dist):
    """Greedy nearest-first one-to-one matching.

    Returns ``(pairs, unmatched_detected, unmatched_truth)`` where ``pairs``
    holds ``(i_detected, j_truth, distance)`` and the others are index lists.
    Equal distances are resolved by index so the outcome does not depend on
    floating-point noise in the sort.
    """
    if max_dist <= 0:
        raise ValueError("max_dist must be positive")
    det = np.asarray(detected, dtype=float).reshape(-1, 2)
    tru = np.asarray(truth, dtype=float).reshape(-1, 2)
    cand = []
    for i, p in enumerate(det):
        for j, q in enumerate(tru):
            d = math.hypot(p[0] - q[0], p[1] - q[1])
            if d <= max_dist:
                cand.append((d, i, j))
    cand.sort()
    used_i, used_j, pairs = set(), set(), []
    for d, i, j in cand:
        if i in used_i or j in used_j:
            continue
        used_i.add(i)
        used_j.add(j)
        pairs.append((i, j, d))
    pairs.sort(key=lambda t: t[1])
    return (
        pairs,
        [i for i in range(len(det)) if i not in used_i],
        [j for j in range(len(tru)) if j not in used_j],
    )


def counts_from_match(pairs, unmatched_detected, unmatched_truth):
    return EvalCounts(len(pairs), len(unmatched_detected), len(unmatched_truth))


def error_stats(errors, px_per_mm=1.0):
    """Mean absolute error and population std, converted from px to mm.

    ``errors`` may be distances or ``(i, j, distance)`` match pairs.
    """
    vals = [e[2] if isinstance(e, (tuple, list)) else e for e in errors]
    v = np.abs(np.asarray(vals, dtype=float)) / float(px_per_mm)
    if len(v) == 0:
        return ErrorStats(0, None, None)
    return ErrorStats(len(v), float(v.mean()), float(v.std()))


@dataclass
class SceneEval:
    name: str
    tomatoes: EvalCounts
    junctions: EvalCounts
    center_err_px: list = field(default_factory=list)
    radius_err_px: list = field(default_factory=list)
    junction_err_px: list = field(default_factory=list)
    com_err_px: float = None
    failure_stage: str = None
    has_grasp: bool = False
    grasp_clearance_mm: float = None
    grasp_caged: bool = None
    grasp_offset_mm: float = None
    truth_has_candidate: bool = False

    def to_dict(self):
        return {
            "name": self.name,
            "tomatoes": self.tomatoes.to_dict(),
            "junctions": self.junctions.to_dict(),
            "center_err_px": [float(e) for e in self.center_err_px],
            "radius_err_px": [float(e) for e in self.radius_err_px],
            "junction_err_px": [float(e) for e in self.junction_err_px],
            "com_err_px": self.com_err_px,
            "failure_stage": self.failure_stage,
            "has_grasp": self.has_grasp,
            "grasp_clearance_mm": self.grasp_clearance_mm,
            "grasp_caged": self.grasp_caged,
            "grasp_offset_mm": self.grasp_offset_mm,
            "truth_has_candidate": self.truth_has_candidate,
        }


def check_grasp_against_truth(point, truth):
    """Clearance (mm) to the nearest true junction and whether junctions cage it.

    The grasp point is projected onto the true peduncle; caging needs a true
    junction on each side along the peduncle.
    """
    s = truth.px_per_mm
    arc_px, offset_px = project_to_polyline(truth.peduncle, point)
    arc = arc_px / s
    junc = np.asarray(truth.junction_arcs_mm, dtype=float)
    if len(junc) == 0:
        return None, False, offset_px / s
    clearance = float(np.min(np.abs(junc - arc)))
    caged = bool((junc <= arc).any() and (junc >= arc).any())
    return clearance, caged, offset_px / s


def evaluate_scene(result, truth, name="", tomato_match_ratio=0.5, junction_match_mm=5.0):
    """Compare one ``DetectionResult`` with its ``GroundTruth``."""
    s = truth.px_per_mm
    gt_c = [(c.x, c.y) for c in truth.circles]
    det_c = [(c.x, c.y) for c in result.tomatoes]
    if truth.circles:
        tol = tomato_match_ratio * float(np.mean([c.r for c in truth.circles]))
    else:
        tol = tomato_match_ratio * 20.0 * s
    pairs, ud, ut = match_points(det_c, gt_c, tol)
    tomatoes = counts_from_match(pairs, ud, ut)
    radius_err = [abs(result.tomatoes[i].r - truth.circles[j].r) for i, j, _ in pairs]

    det_j = [] if result.peduncle is None else list(result.peduncle.junctions)
    jp, jd, jt = match_points(det_j, truth.junctions, junction_match_mm * s)
    junctions = counts_from_match(jp, jd, jt)

    com_err = None
    if result.com is not None and truth.com is not None:
        com_err = float(math.hypot(result.com.x - truth.com[0], result.com.y - truth.com[1]))

    ev = SceneEval(
        name=name,
        tomatoes=tomatoes,
        junctions=junctions,
        center_err_px=[d for _, _, d in pairs],
        radius_err_px=radius_err,
        junction_err_px=[d for _, _, d in jp],
        com_err_px=com_err,
        failure_stage=None if result.failure is None else result.failure["stage"],
        has_grasp=result.grasp is not None,
        truth_has_candidate=bool(truth.candidates_mm),
    )
    if result.grasp is not None:
        ev.grasp_clearance_mm, ev.grasp_caged, ev.grasp_offset_mm = check_grasp_against_truth(
            result.grasp.point, truth
        )
    return ev


def _ratio(num, den):
    return num / den if den else None


def aggregate(scenes, px_per_mm, clearance_mm, tomato_match_ratio=0.5, junction_match_mm=5.0):
    """Corpus report dict; independent of the order of ``scenes``."""
    scenes = sorted(scenes, key=lambda e: e.name)
    n = len(scenes)
    if n == 0:
        raise ValueError("cannot aggregate an empty corpus")
    tom = sum((e.tomatoes for e in scenes), EvalCounts())
    jun = sum((e.junctions for e in scenes), EvalCounts())
    flat = lambda attr: [v for e in scenes for v in getattr(e, attr)]  # noqa: E731
    com = [e.com_err_px for e in scenes if e.com_err_px is not None]
    failures = {}
    for e in scenes:
        if e.failure_stage:
            failures[e.failure_stage] = failures.get(e.failure_stage, 0) + 1
    grasps = [e for e in scenes if e.has_grasp]
    violations = [
        e.name
        for e in grasps
        if not e.grasp_caged or e.grasp_clearance_mm is None or e.grasp_clearance_mm < clearance_mm
    ]
    return {
        "n_scenes": n,
        "px_per_mm": float(px_per_mm),
        "match": {
            "tomato_ratio_of_mean_radius": float(tomato_match_ratio),
            "junction_mm": float(junction_match_mm),
        },
        "std_divisor": "n",
        "tomatoes": tom.to_dict(),
        "junctions": jun.to_dict(),
        "errors": {
            "tomato_center": error_stats(flat("center_err_px"), px_per_mm).to_dict(),
            "tomato_radius": error_stats(flat("radius_err_px"), px_per_mm).to_dict(),
            "center_of_mass": error_stats(com, px_per_mm).to_dict(),
            "junction": error_stats(flat("junction_err_px"), px_per_mm).to_dict(),
        },
        "grasp": {
            "n_plans": len(grasps),
            "yield": _ratio(len(grasps), n),
            "n_truth_graspable": sum(e.truth_has_candidate for e in scenes),
            "clearance_mm": float(clearance_mm),
            "violations": violations,
        },
        "failures": dict(sorted(failures.items())),
        "scenes": [e.to_dict() for e in scenes],
    }


def _pct(v):
    return "n/a" if v is None else f"{100.0 * v:.1f}%"


def _pm(st):
    if not st["n"]:
        return "n/a"
    return f"{st['mean_abs_mm']:.2f} +- {st['std_mm']:.2f} mm (n={st['n']})"


def format_table(report, timings=None):
    """Plain-text summary of a report."""
    rows = [
        ("scenes", str(report["n_scenes"])),
        ("tomato TPR", _pct(report["tomatoes"]["tpr"])),
        ("tomato FDR", _pct(report["tomatoes"]["fdr"])),
        ("junction TPR", _pct(report["junctions"]["tpr"])),
        ("junction FDR", _pct(report["junctions"]["fdr"])),
        ("tomato centre error", _pm(report["errors"]["tomato_center"])),
        ("tomato radius error", _pm(report["errors"]["tomato_radius"])),
        ("centre of mass error", _pm(report["errors"]["center_of_mass"])),
        ("junction error", _pm(report["errors"]["junction"])),
        (
            "grasp-pose yield",
            f"{_pct(report['grasp']['yield'])} ({report['grasp']['n_plans']}/{report['n_scenes']})",
        ),
    ]
    for stage, k in report["failures"].items():
        rows.append((f"failures: {stage}", str(k)))
    if timings:
        t = np.asarray(timings, dtype=float)
        rows.append(("runtime per image", f"{t.mean():.2f} +- {t.std():.2f} s"))
    width = max(len(k) for k, _ in rows)
    return "\n".join(f"{k.ljust(width)}  {v}" for k, v in rows) + "\n"
