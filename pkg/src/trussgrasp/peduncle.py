"""Peduncle search: the longest curvature-limited simple path in the stem graph."""

import math
from dataclasses import dataclass

import cv2
import numpy as np

from .exceptions import DegenerateEdge, NoStem
from .geometry import cumulative_length, curvature, edge_orientation, polyline_length

__all__ = [
    "GraphPath",
    "PeduncleResult",
    "curvature",
    "edge_orientation",
    "find_peduncle",
    "path_junctions",
]


@dataclass(frozen=True)
class GraphPath:
    vertices: tuple
    edges: tuple
    length: float
    theta: float

    @property
    def start(self):
        return self.vertices[0]


@dataclass
class PeduncleResult:
    path: GraphPath
    junctions: list
    polyline: np.ndarray
    junction_ids: list
    junction_arcs: np.ndarray

    @property
    def arc(self):
        return cumulative_length(self.polyline)

    @property
    def length(self):
        return float(self.arc[-1]) if len(self.polyline) else 0.0

    def transformed(self, transform):
        """Copy with all coordinates passed through ``transform`` (rigid maps only)."""
        junctions = [tuple(map(float, p)) for p in transform(np.asarray(self.junctions).reshape(-1, 2))]
        return PeduncleResult(
            self.path,
            junctions,
            transform(self.polyline),
            list(self.junction_ids),
            self.junction_arcs.copy(),
        )

    def to_dict(self):
        return {
            "length_px": self.length,
            "vertices": list(self.path.vertices),
            "edges": list(self.path.edges),
            "polyline": [[float(x), float(y)] for x, y in self.polyline],
            "junctions": [[float(x), float(y)] for x, y in self.junctions],
            "junction_arcs_px": [float(s) for s in self.junction_arcs],
        }


def _theta(p, q):
    try:
        return edge_orientation(p, q)
    except DegenerateEdge:
        return None


def _adjacency(g):
    adj = {v.id: [] for v in g.vertices}
    for e in g.edges:
        adj[e.u].append((e.id, e.v))
        if e.v != e.u:
            adj[e.v].append((e.id, e.u))
    for lst in adj.values():
        lst.sort()
    return adj


def compliant(g, origin, current, last_edge, edge, max_curvature, reference="path"):
    """Whether ``edge`` may extend a path from ``origin`` currently at ``current``.

    ``reference="path"`` compares against the origin-to-current orientation,
    ``"edge"`` against the previous edge. Degenerate orientations never block.
    """
    if reference == "edge":
        ref = None if last_edge is None or math.isnan(last_edge.theta) else last_edge.theta
    else:
        ref = _theta(g.vertices[origin].position, g.vertices[current].position)
    if ref is None or math.isnan(edge.theta):
        return True
    return curvature(ref, edge.theta) <= max_curvature + 1e-12


def find_peduncle(g, max_curvature=math.pi / 4, reference="path", simplify_px=None):
    """Longest simple path whose every extension respects the curvature limit.

    A path is started from every vertex (tails first, then the rest, by id).
    At each vertex the path is extended along every unvisited edge whose
    orientation is within ``max_curvature`` of the reference orientation;
    a vertex where no edge complies ends the path, and the path that a split
    would start there is covered by the search from that vertex. Ties in
    length go to the lexicographically smallest ``(start, edge ids)``.

    With ``simplify_px`` the reported polyline and junction arcs come from a
    Douglas-Peucker simplification of each edge, which removes the length
    excess of a pixel staircase. The search itself uses the graph lengths.
    """
    if reference not in ("path", "edge"):
        raise ValueError("reference must be 'path' or 'edge'")
    if not g.edges:
        raise NoStem("stem graph has no edges")
    adj = _adjacency(g)
    edges = g.edges
    tails = [v.id for v in g.vertices if v.degree == 1]
    others = [v.id for v in g.vertices if v.degree != 1]
    best = {"len": -1.0, "key": None, "verts": None, "edges": None}

    def consider(vs, es):
        length = math.fsum(edges[e].length for e in es)
        key = (vs[0], tuple(es))
        if length > best["len"] or (length == best["len"] and key < best["key"]):
            best.update(len=length, key=key, verts=tuple(vs), edges=tuple(es))

    def dfs(vs, es, visited):
        cur = vs[-1]
        last = edges[es[-1]] if es else None
        for eid, nxt in adj[cur]:
            if nxt in visited:
                continue
            e = edges[eid]
            if es and not compliant(g, vs[0], cur, last, e, max_curvature, reference):
                continue
            vs.append(nxt)
            es.append(eid)
            visited.add(nxt)
            consider(vs, es)
            dfs(vs, es, visited)
            visited.discard(nxt)
            vs.pop()
            es.pop()

    for s in tails + others:
        dfs([s], [], {s})
    if best["verts"] is None:
        raise NoStem("stem graph has only closed loops")
    verts, eids = best["verts"], best["edges"]
    theta = _theta(g.vertices[verts[0]].position, g.vertices[verts[-1]].position)
    path = GraphPath(verts, eids, best["len"], float("nan") if theta is None else theta)
    return peduncle_from_path(g, path, simplify_px)


def simplify(poly, tolerance):
    """Douglas-Peucker simplification keeping both end points."""
    poly = np.asarray(poly, dtype=float)
    if tolerance is None or len(poly) < 3:
        return poly
    out = cv2.approxPolyDP(poly.astype(np.float32).reshape(-1, 1, 2), float(tolerance), False)
    out = out.reshape(-1, 2).astype(float)
    # keep the exact end points, approxPolyDP returns float32 copies
    out[0], out[-1] = poly[0], poly[-1]
    return out


def _edge_pieces(g, path, simplify_px=None):
    return [
        simplify(g.edges[eid].oriented_from(vid), simplify_px)
        for vid, eid in zip(path.vertices[:-1], path.edges)
    ]


def path_polyline(g, path, simplify_px=None):
    pieces = _edge_pieces(g, path, simplify_px)
    pieces = [p if k == 0 else p[1:] for k, p in enumerate(pieces)]
    return np.concatenate(pieces) if pieces else np.zeros((0, 2))


def path_junctions(g, path):
    """Path vertices of graph degree >= 3, in path order, as ``(id, (x, y))``."""
    return [
        (vid, (float(g.vertices[vid].x), float(g.vertices[vid].y)))
        for vid in path.vertices
        if g.vertices[vid].degree >= 3
    ]


def peduncle_from_path(g, path, simplify_px=None):
    poly = path_polyline(g, path, simplify_px)
    arcs_at_vertex = [0.0]
    for piece in _edge_pieces(g, path, simplify_px):
        arcs_at_vertex.append(arcs_at_vertex[-1] + polyline_length(piece))
    juncs = path_junctions(g, path)
    index = {vid: i for i, vid in enumerate(path.vertices)}
    return PeduncleResult(
        path=path,
        junctions=[p for _, p in juncs],
        polyline=poly,
        junction_ids=[vid for vid, _ in juncs],
        junction_arcs=np.array([arcs_at_vertex[index[vid]] for vid, _ in juncs], dtype=float),
    )
