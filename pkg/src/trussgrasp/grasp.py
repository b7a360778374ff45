"""Geometry-based grasp planning on the detected peduncle.

Arc positions along the peduncle are in mm; image points are in pixels of
the original image. World coordinates are the image plane scaled to mm
(x right, y down) with z up from the supporting surface.
"""

import math
from dataclasses import dataclass, field

import cv2
import numpy as np
from sklearn.base import BaseEstimator

from .exceptions import NoValidGrasp, OutOfWorkspace
from .geometry import cumulative_length, fold_orientation, point_at


@dataclass(frozen=True)
class EndEffectorModel:
    """Parallel gripper with L-shaped fingertips; dimensions in mm."""

    length: float = 40.0
    width: float = 10.0
    tip_height: float = 10.0
    tip_thickness: float = 3.0
    tip_distance: float = 0.0
    max_opening: float = 60.0
    soft_pad: bool = True

    def __post_init__(self):
        for name in ("length", "width", "tip_height", "tip_thickness", "max_opening"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0 <= self.tip_distance <= self.max_opening:
            raise ValueError("tip_distance must lie in [0, max_opening]")

    @property
    def z_offset(self):
        # tool frame sits so the fingertip mid-height is level with the peduncle
        return 0.5 * self.tip_height


@dataclass(frozen=True)
class GraspConstraints:
    """Space condition parameters.

    ``clearance`` is the minimum arc distance (mm) between the grasp point
    and any junction; ``junction_margin`` is added to it while planning to
    absorb junction localisation error.
    """

    clearance: float
    px_per_mm: float
    min_peduncle_diameter: float = 0.0
    junction_margin: float = 0.0

    @classmethod
    def for_gripper(cls, ee, px_per_mm, margin=20.0, **kw):
        return cls(clearance=ee.width + margin, px_per_mm=px_per_mm, **kw)

    def validate(self, ee):
        if self.clearance <= ee.width:
            raise ValueError("clearance must exceed the gripper width")
        if self.px_per_mm <= 0:
            raise ValueError("px_per_mm must be positive")


@dataclass(frozen=True)
class CandidateSegment:
    s_a: float
    s_b: float
    left: int = None
    right: int = None

    @property
    def length(self):
        return self.s_b - self.s_a

    def to_dict(self):
        return {"s_a_mm": float(self.s_a), "s_b_mm": float(self.s_b)}


@dataclass
class GraspPlan:
    point: tuple
    s: float
    yaw: float
    z: float
    pose: tuple
    waypoints: list
    candidates: list = field(default_factory=list)
    peduncle_diameter: float = None

    def to_dict(self):
        x, y, z, yaw = self.pose
        return {
            "grasp_point_px": [float(self.point[0]), float(self.point[1])],
            "grasp_point_mm": [float(x), float(y)],
            "arc_position_mm": float(self.s),
            "yaw": float(self.yaw),
            "z_mm": float(self.z),
            "waypoints": [
                {"name": name, "x": float(px), "y": float(py), "z": float(pz), "yaw": float(pyaw)}
                for name, (px, py, pz, pyaw) in self.waypoints
            ],
            "candidates": [c.to_dict() for c in self.candidates],
            "peduncle_diameter_mm": None
            if self.peduncle_diameter is None
            else float(self.peduncle_diameter),
        }


def _junction_arcs_mm(p, px_per_mm):
    return np.sort(np.asarray(p.junction_arcs, dtype=float)) / px_per_mm


def _bounds(p, px_per_mm, endpoint_bounds):
    arcs = list(_junction_arcs_mm(p, px_per_mm))
    if endpoint_bounds:
        arcs = sorted(set(arcs) | {0.0, p.length / px_per_mm})
    return arcs


def check_rigid_caging(p, seg, px_per_mm=1.0, endpoint_bounds=False):
    """True iff a caging bound (junction) lies on each side of the segment."""
    arcs = _bounds(p, px_per_mm, endpoint_bounds)
    return any(s <= seg.s_a for s in arcs) and any(s >= seg.s_b for s in arcs)


def check_soft_caging(peduncle_diameter, ee):
    """True iff the pads are compressed when the gripper closes fully."""
    if peduncle_diameter <= 0:
        raise ValueError("peduncle diameter must be positive")
    return peduncle_diameter > ee.tip_distance


def candidate_segments(p, gc, endpoint_bounds=False):
    """Inter-junction intervals shrunk by the clearance at both ends."""
    L = gc.clearance + gc.junction_margin
    arcs = _bounds(p, gc.px_per_mm, endpoint_bounds)
    out = []
    for k in range(len(arcs) - 1):
        seg = CandidateSegment(arcs[k] + L, arcs[k + 1] - L, k, k + 1)
        if seg.s_b >= seg.s_a and check_rigid_caging(p, seg, gc.px_per_mm, endpoint_bounds):
            out.append(seg)
    return out


def _closest_on_interval(poly, cum, a, b, target):
    """Closest point to ``target`` on the sub-polyline between arcs ``a`` and ``b``."""
    inner = (cum > a) & (cum < b)
    arcs = np.concatenate([[a], cum[inner], [b]])
    pts = np.vstack([point_at(poly, cum, a), poly[inner], point_at(poly, cum, b)])
    best = (math.inf, a, pts[0])
    for i in range(len(pts) - 1):
        p0, p1 = pts[i], pts[i + 1]
        d = p1 - p0
        L2 = float(d @ d)
        t = 0.0 if L2 == 0 else min(max(float((target - p0) @ d) / L2, 0.0), 1.0)
        q = p0 + t * d
        dist = float(np.hypot(*(q - target)))
        s = arcs[i] + t * (arcs[i + 1] - arcs[i])
        if dist < best[0] - 1e-12 or (abs(dist - best[0]) <= 1e-12 and s < best[1]):
            best = (dist, s, q)
    return best


def select_grasp(cands, com, p, px_per_mm=1.0, accept=None, step_px=1.0):
    """Point of the candidate intervals closest to the centre of mass.

    Returns ``(s_mm, point_px)``. The optimum is found exactly by projecting
    onto each polyline piece. With an ``accept(point, s_mm)`` predicate the
    intervals are instead sampled every ``step_px`` and the closest accepted
    sample is returned.
    """
    if not cands:
        raise NoValidGrasp("no candidate grasp segment satisfies the constraints")
    target = np.asarray(getattr(com, "point", com), dtype=float)
    poly = np.asarray(p.polyline, dtype=float)
    cum = cumulative_length(poly)
    if accept is None:
        best = None
        for c in cands:
            dist, s, q = _closest_on_interval(poly, cum, c.s_a * px_per_mm, c.s_b * px_per_mm, target)
            if best is None or dist < best[0] - 1e-12 or (abs(dist - best[0]) <= 1e-12 and s < best[1]):
                best = (dist, s, q)
        return best[1] / px_per_mm, (float(best[2][0]), float(best[2][1]))
    samples = []
    for c in cands:
        a, b = c.s_a * px_per_mm, c.s_b * px_per_mm
        n = max(int(math.ceil((b - a) / step_px)), 0)
        for s in np.linspace(a, b, n + 1):
            q = point_at(poly, cum, s)
            samples.append((float(np.hypot(*(q - target))), float(s), q))
    samples.sort(key=lambda t: (t[0], t[1]))
    for dist, s, q in samples:
        if accept((float(q[0]), float(q[1])), s / px_per_mm):
            return s / px_per_mm, (float(q[0]), float(q[1]))
    raise NoValidGrasp("every candidate grasp location is blocked")


def tangent_yaw(p, s_mm, px_per_mm=1.0, window_mm=5.0):
    """Peduncle direction at ``s_mm`` from a central difference over +-window."""
    poly = np.asarray(p.polyline, dtype=float)
    cum = cumulative_length(poly)
    s = s_mm * px_per_mm
    h = window_mm * px_per_mm
    a = point_at(poly, cum, s - h)
    b = point_at(poly, cum, s + h)
    d = b - a
    if not d.any():
        d = poly[-1] - poly[0]
    return fold_orientation(math.atan2(d[1], d[0]))


def _check_workspace(waypoints, workspace):
    if not workspace:
        return
    for name, pose in waypoints:
        for axis, val in zip("xyz", pose[:3]):
            lo, hi = workspace.get(axis, (-math.inf, math.inf))
            if not lo <= val <= hi:
                raise OutOfWorkspace(f"{name} waypoint {axis}={val:.1f} mm outside [{lo}, {hi}]")


def plan_pose(
    s_mm,
    p,
    ee,
    surface_z=0.0,
    peduncle_height=0.0,
    px_per_mm=1.0,
    tangent_window=5.0,
    approach_clearance=50.0,
    lift_height=50.0,
    place_xy=None,
    workspace=None,
):
    """Lift a 2-D grasp location to a 3-D pose with its waypoint sequence."""
    poly = np.asarray(p.polyline, dtype=float)
    cum = cumulative_length(poly)
    q = point_at(poly, cum, s_mm * px_per_mm)
    yaw = tangent_yaw(p, s_mm, px_per_mm, tangent_window)
    z = surface_z + peduncle_height + ee.z_offset
    x, y = q[0] / px_per_mm, q[1] / px_per_mm
    px, py = (x, y) if place_xy is None else place_xy
    waypoints = [
        ("pre_grasp", (x, y, z + approach_clearance, yaw)),
        ("grasp", (x, y, z, yaw)),
        ("lift", (x, y, z + lift_height, yaw)),
        ("place", (float(px), float(py), z, yaw)),
    ]
    _check_workspace(waypoints, workspace)
    return GraspPlan(
        point=(float(q[0]), float(q[1])),
        s=float(s_mm),
        yaw=float(yaw),
        z=float(z),
        pose=(float(x), float(y), float(z), float(yaw)),
        waypoints=waypoints,
    )


def estimate_peduncle_diameter(stem, polyline, px_per_mm=1.0):
    """Mean stem thickness (mm) under the polyline, from the distance transform."""
    stem = np.asarray(stem).astype(np.uint8)
    if not stem.any() or len(polyline) == 0:
        return 0.0
    dt = cv2.distanceTransform(stem, cv2.DIST_L2, 5)
    pts = np.rint(np.asarray(polyline, dtype=float)).astype(int)
    h, w = stem.shape
    ok = (pts[:, 0] >= 0) & (pts[:, 0] < w) & (pts[:, 1] >= 0) & (pts[:, 1] < h)
    vals = dt[pts[ok, 1], pts[ok, 0]]
    vals = vals[vals > 0]
    if len(vals) == 0:
        return 0.0
    return float(max(2.0 * vals.mean() - 1.0, 1.0) / px_per_mm)


def footprint_blocked(point, yaw, ee, px_per_mm, tomatoes=(), polylines=()):
    """Whether the open gripper's footprint touches a tomato or another stem part.

    The footprint is a rectangle spanning the gripper width along the
    peduncle and the gripper length across it.
    """
    c, s = math.cos(yaw), math.sin(yaw)
    half_along = 0.5 * ee.width * px_per_mm
    half_across = 0.5 * ee.length * px_per_mm
    p0 = np.asarray(point, dtype=float)

    def local(pts):
        d = np.asarray(pts, dtype=float).reshape(-1, 2) - p0
        return np.column_stack([d @ [c, s], d @ [-s, c]])

    for t in tomatoes:
        u, v = local([[t.x, t.y]])[0]
        du = max(abs(u) - half_along, 0.0)
        dv = max(abs(v) - half_across, 0.0)
        if math.hypot(du, dv) <= t.r:
            return True
    for poly in polylines:
        uv = local(poly)
        if np.any((np.abs(uv[:, 0]) <= half_along) & (np.abs(uv[:, 1]) <= half_across)):
            return True
    return False


class GraspPlanner(BaseEstimator):
    """Plan a caging grasp on a detected peduncle."""

    def __init__(
        self,
        gripper_length=40.0,
        gripper_width=10.0,
        tip_height=10.0,
        tip_thickness=3.0,
        tip_distance=0.0,
        max_opening=60.0,
        clearance=None,
        junction_margin=0.0,
        px_per_mm=2.0,
        surface_z=0.0,
        peduncle_height=20.0,
        tangent_window=5.0,
        approach_clearance=50.0,
        lift_height=50.0,
        place_xy=None,
        workspace=None,
        endpoint_bounds=False,
        clearance_check=False,
    ):
        self.gripper_length = gripper_length
        self.gripper_width = gripper_width
        self.tip_height = tip_height
        self.tip_thickness = tip_thickness
        self.tip_distance = tip_distance
        self.max_opening = max_opening
        self.clearance = clearance
        self.junction_margin = junction_margin
        self.px_per_mm = px_per_mm
        self.surface_z = surface_z
        self.peduncle_height = peduncle_height
        self.tangent_window = tangent_window
        self.approach_clearance = approach_clearance
        self.lift_height = lift_height
        self.place_xy = place_xy
        self.workspace = workspace
        self.endpoint_bounds = endpoint_bounds
        self.clearance_check = clearance_check

    def end_effector(self):
        return EndEffectorModel(
            length=self.gripper_length,
            width=self.gripper_width,
            tip_height=self.tip_height,
            tip_thickness=self.tip_thickness,
            tip_distance=self.tip_distance,
            max_opening=self.max_opening,
        )

    def constraints(self):
        ee = self.end_effector()
        L = ee.width + 20.0 if self.clearance is None else self.clearance
        gc = GraspConstraints(L, self.px_per_mm, junction_margin=self.junction_margin)
        gc.validate(ee)
        return gc

    def fit(self, X=None, y=None):
        self.end_effector_ = self.end_effector()
        self.constraints_ = self.constraints()
        return self

    def predict(self, peduncle, com, stem=None, tomatoes=(), obstacles=()):
        ee = self.end_effector()
        gc = self.constraints()
        diameter = None
        if stem is not None:
            diameter = estimate_peduncle_diameter(stem, peduncle.polyline, self.px_per_mm)
            if diameter > 0 and not check_soft_caging(diameter, ee):
                raise NoValidGrasp("peduncle thinner than the closed fingertip gap")
        cands = candidate_segments(peduncle, gc, self.endpoint_bounds)
        accept = None
        if self.clearance_check:

            def accept(point, s):
                yaw = tangent_yaw(peduncle, s, self.px_per_mm, self.tangent_window)
                return not footprint_blocked(point, yaw, ee, self.px_per_mm, tomatoes, obstacles)

        s, _ = select_grasp(cands, com, peduncle, self.px_per_mm, accept=accept)
        plan = plan_pose(
            s,
            peduncle,
            ee,
            surface_z=self.surface_z,
            peduncle_height=self.peduncle_height,
            px_per_mm=self.px_per_mm,
            tangent_window=self.tangent_window,
            approach_clearance=self.approach_clearance,
            lift_height=self.lift_height,
            place_xy=self.place_xy,
            workspace=self.workspace,
        )
        plan.candidates = cands
        plan.peduncle_diameter = diameter
        return plan
