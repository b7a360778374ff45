"""Stem skeletonization and skeleton-to-graph conversion with spur pruning.

Points are ``(x, y)`` = ``(column, row)`` with pixel centres on integers.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage
from skimage.morphology import skeletonize as _thin

from ._validation import Label, check_binary, check_label_mask
from .exceptions import DegenerateEdge, EmptyStem
from .geometry import edge_orientation, polyline_length

_EIGHT = np.ones((3, 3), dtype=int)
_OFFSETS = [(dx, dy) for dy in (-1, 0, 1) for dx in (-1, 0, 1) if dx or dy]


@dataclass
class Vertex:
    id: int
    x: float
    y: float
    degree: int = 0
    pixels: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=int))

    @property
    def position(self):
        return np.array([self.x, self.y])

    @property
    def kind(self):
        if self.degree == 1:
            return "tail"
        if self.degree >= 3:
            return "junction"
        return "other"


@dataclass
class Edge:
    id: int
    u: int
    v: int
    polyline: np.ndarray
    pixels: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=int))
    length: float = 0.0
    theta: float = float("nan")

    def other(self, vid):
        return self.v if vid == self.u else self.u

    def oriented_from(self, vid):
        """Polyline running away from vertex ``vid``."""
        return self.polyline if vid == self.u else self.polyline[::-1]


def _orientation(p, q):
    try:
        return edge_orientation(p, q)
    except DegenerateEdge:
        return float("nan")


def make_edge(eid, u, v, polyline, pixels=None, vertices=None):
    poly = np.asarray(polyline, dtype=float)
    pix = np.zeros((0, 2), dtype=int) if pixels is None else np.asarray(pixels, dtype=int).reshape(-1, 2)
    theta = float("nan")
    if vertices is not None:
        theta = _orientation(vertices[u].position, vertices[v].position)
    return Edge(eid, u, v, poly, pix, polyline_length(poly), theta)


@dataclass
class StemGraph:
    """Undirected multigraph of stem branches; ids equal list positions."""

    vertices: list
    edges: list

    def incident(self, vid):
        return [e for e in self.edges if e.u == vid or e.v == vid]

    def tails(self):
        return [v.id for v in self.vertices if v.degree == 1]

    def junctions(self):
        return [v.id for v in self.vertices if v.degree >= 3]

    @classmethod
    def from_edges(cls, positions, pairs, polylines=None):
        """Build a graph from vertex positions and ``(u, v)`` pairs.

        Edges without a polyline are straight segments.
        """
        verts = {i: Vertex(i, float(p[0]), float(p[1])) for i, p in enumerate(positions)}
        edges = {}
        for k, (u, v) in enumerate(pairs):
            poly = (
                np.array([positions[u], positions[v]], dtype=float)
                if polylines is None or polylines[k] is None
                else np.asarray(polylines[k], dtype=float)
            )
            edges[k] = make_edge(k, u, v, poly, vertices=verts)
        return _compact(verts, edges, drop_isolated=False)

    def to_dict(self, transform=None):
        tf = (lambda pts: np.asarray(pts, dtype=float)) if transform is None else transform
        out_v = []
        for v in self.vertices:
            x, y = tf(np.array([[v.x, v.y]]))[0]
            out_v.append(
                {"id": v.id, "x": float(x), "y": float(y), "degree": v.degree, "kind": v.kind}
            )
        out_e = []
        for e in self.edges:
            out_e.append(
                {
                    "id": e.id,
                    "u": e.u,
                    "v": e.v,
                    "length_px": float(e.length),
                    "theta": None if math.isnan(e.theta) else float(e.theta),
                    "polyline": [[float(a), float(b)] for a, b in tf(e.polyline)],
                }
            )
        return {"vertices": out_v, "edges": out_e}


def _recount(verts, edges):
    for v in verts.values():
        v.degree = 0
    for e in edges.values():
        verts[e.u].degree += 1
        verts[e.v].degree += 1


def _compact(verts, edges, drop_isolated=True):
    """Renumber vertices and edges to 0..n-1, keeping their relative order."""
    _recount(verts, edges)
    keep = [i for i in sorted(verts) if not (drop_isolated and verts[i].degree == 0)]
    vmap = {old: new for new, old in enumerate(keep)}
    new_v = [replace(verts[old], id=vmap[old]) for old in keep]
    new_e = []
    for new, old in enumerate(sorted(edges)):
        e = edges[old]
        new_e.append(replace(e, id=new, u=vmap[e.u], v=vmap[e.v]))
    return StemGraph(new_v, new_e)


def _as_work(g):
    verts = {v.id: replace(v) for v in g.vertices}
    edges = {e.id: replace(e) for e in g.edges}
    return verts, edges


def _dissolve(verts, edges, vid):
    """Merge the two edges meeting at a degree-2 vertex into one."""
    inc = [e for e in edges.values() if e.u == vid or e.v == vid]
    if len(inc) != 2:
        return False
    e1, e2 = sorted(inc, key=lambda e: e.id)
    a, b = e1.other(vid), e2.other(vid)
    poly1 = e1.oriented_from(a)
    poly2 = e2.oriented_from(vid)
    poly = np.concatenate([poly1, poly2[1:]])
    pixels = np.concatenate([e1.pixels, verts[vid].pixels, e2.pixels])
    del edges[e1.id], edges[e2.id], verts[vid]
    edges[e1.id] = make_edge(e1.id, a, b, poly, pixels, verts)
    _recount(verts, edges)
    return True


def _dissolve_all(verts, edges):
    changed = True
    while changed:
        changed = False
        _recount(verts, edges)
        for vid in sorted(verts):
            v = verts[vid]
            if v.degree == 2 and _dissolve(verts, edges, vid):
                changed = True
                break


# neighbour order x1..x8: E, NE, N, NW, W, SW, S, SE as (dx, dy)
_RING = [(1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1)]


def _is_simple(sk, x, y):
    """8-connectivity Yokoi number equals one: deleting the pixel keeps topology."""
    h, w = sk.shape
    xb = []
    for dx, dy in _RING:
        nx, ny = x + dx, y + dy
        xb.append(0 if 0 <= nx < w and 0 <= ny < h and sk[ny, nx] else 1)
    xb += xb[:2]
    return sum(xb[k] - xb[k] * xb[k + 1] * xb[k + 2] for k in (0, 2, 4, 6)) == 1


def _blocks(sk):
    return sk[:-1, :-1] & sk[1:, :-1] & sk[:-1, 1:] & sk[1:, 1:]


def _topology(img):
    return ndimage.label(img, structure=_EIGHT)[1], ndimage.label(~img)[1]


def _reroute(sk, allowed, by, bx):
    """Move one pixel of a 2x2 block to a free neighbour, keeping topology.

    Needed where two diagonal strokes pass through each other: every pixel
    of the block is then essential and plain deletion cannot help.
    """
    ref = _topology(sk)
    h, w = sk.shape
    for y, x in ((by, bx), (by, bx + 1), (by + 1, bx), (by + 1, bx + 1)):
        for dx, dy in _RING:
            nx, ny = x + dx, y + dy
            if not (0 <= nx < w and 0 <= ny < h) or sk[ny, nx] or not allowed[ny, nx]:
                continue
            sk[y, x], sk[ny, nx] = False, True
            y0, x0 = max(min(y, ny) - 2, 0), max(min(x, nx) - 2, 0)
            local = _blocks(sk[y0 : max(y, ny) + 3, x0 : max(x, nx) + 3]).any()
            if not local and _topology(sk) == ref:
                return True
            sk[y, x], sk[ny, nx] = True, False
    return False


def _break_blocks(sk, allowed):
    """Remove fully-on 2x2 blocks, deleting simple pixels where possible."""
    changed = True
    while changed:
        changed = False
        for by, bx in np.argwhere(_blocks(sk)):
            for y, x in ((by, bx), (by, bx + 1), (by + 1, bx), (by + 1, bx + 1)):
                if sk[by : by + 2, bx : bx + 2].all() and _is_simple(sk, x, y):
                    sk[y, x] = False
                    changed = True
    for by, bx in np.argwhere(_blocks(sk)):
        if sk[by : by + 2, bx : bx + 2].all():
            _reroute(sk, allowed, by, bx)
    return sk


def skeletonize(mask):
    """One-pixel-wide skeleton of the stem class (boolean image)."""
    mask = check_label_mask(mask)
    stem = mask == Label.STEM
    if not stem.any():
        raise EmptyStem("no stem pixels")
    # the thinning pass can leave 2x2 clusters at junctions and around
    # pinholes; their simple pixels are removed without changing topology
    return _break_blocks(_thin(stem), stem)


def _neighbors(x, y, on):
    h, w = on.shape
    for dx, dy in _OFFSETS:
        nx, ny = x + dx, y + dy
        if 0 <= nx < w and 0 <= ny < h and on[ny, nx]:
            yield nx, ny


def build_graph(skel, px_per_mm=None):
    """Convert a skeleton into a ``StemGraph``.

    Pixels with other than two skeleton neighbours are vertex pixels; touching
    vertex pixels form one vertex at their centroid. Runs of two-neighbour
    pixels become edges. Vertices left with degree 2 are dissolved into the
    adjoining edges and degree-0 vertices are dropped. ``px_per_mm`` is
    accepted for interface symmetry; lengths stay in pixels.
    """
    sk = check_binary(skel, "skeleton")
    count = ndimage.convolve(sk.astype(int), _EIGHT, mode="constant") - sk
    vert_px = sk & (count != 2)
    chain_px = sk & (count == 2)
    vlab, nv = ndimage.label(vert_px, structure=_EIGHT)
    clab, nc = ndimage.label(chain_px, structure=_EIGHT)

    verts = {}
    if nv:
        ys, xs = np.nonzero(vlab)
        order = np.argsort(vlab[ys, xs], kind="stable")
        ys, xs = ys[order], xs[order]
        splits = np.cumsum(np.bincount(vlab[ys, xs], minlength=nv + 1)[1:])[:-1]
        for k, (gx, gy) in enumerate(zip(np.split(xs, splits), np.split(ys, splits))):
            pix = np.column_stack([gx, gy])
            verts[k + 1] = Vertex(k + 1, float(gx.mean()), float(gy.mean()), 0, pix)
    next_vid = nv + 1

    edges = {}
    if nc:
        ys, xs = np.nonzero(clab)
        order = np.argsort(clab[ys, xs], kind="stable")
        ys, xs = ys[order], xs[order]
        splits = np.cumsum(np.bincount(clab[ys, xs], minlength=nc + 1)[1:])[:-1]
        for gx, gy in zip(np.split(xs, splits), np.split(ys, splits)):
            comp = set(zip(gx.tolist(), gy.tolist()))
            cdeg = {p: sum(1 for q in _neighbors(*p, chain_px) if q in comp) for p in comp}
            ends = sorted((p for p in comp if cdeg[p] < 2), key=lambda p: (p[1], p[0]))
            if not ends:
                # closed loop without branch points: promote one pixel to a vertex
                p0 = min(comp, key=lambda p: (p[1], p[0]))
                comp.discard(p0)
                vlab[p0[1], p0[0]] = next_vid
                verts[next_vid] = Vertex(next_vid, float(p0[0]), float(p0[1]), 0, np.array([p0]))
                next_vid += 1
                if not comp:
                    continue
                cdeg = {p: sum(1 for q in _neighbors(*p, chain_px) if q in comp) for p in comp}
                ends = sorted((p for p in comp if cdeg[p] < 2), key=lambda p: (p[1], p[0]))
            path = _walk(ends[0], comp, chain_px)
            ext_start = _external(path[0], sk, vlab, exclude=set(path))
            ext_end = _external(path[-1], sk, vlab, exclude=set(path))
            if len(path) == 1:
                labels = ext_start
                if len(labels) < 2:
                    labels = labels * 2
                u, v = labels[0], labels[1]
            else:
                u, v = ext_start[0], ext_end[0]
            pts = np.array(path, dtype=float)
            poly = np.vstack([verts[u].position, pts, verts[v].position])
            eid = len(edges)
            edges[eid] = make_edge(eid, u, v, poly, np.array(path, dtype=int), verts)

    _recount(verts, edges)
    _dissolve_all(verts, edges)
    return _compact(verts, edges)


def _walk(start, comp, chain_px):
    path = [start]
    seen = {start}
    cur = start
    while True:
        nxt = [q for q in _neighbors(*cur, chain_px) if q in comp and q not in seen]
        if not nxt:
            return path
        cur = min(nxt, key=lambda q: (q[1], q[0]))
        seen.add(cur)
        path.append(cur)


def _external(p, sk, vlab, exclude):
    labels = []
    for q in _neighbors(*p, sk):
        if q in exclude:
            continue
        lab = int(vlab[q[1], q[0]])
        if lab:
            labels.append(lab)
    return labels


def prune_spurs(g, min_len_mm=10.0, px_per_mm=1.0):
    """Remove junction-tail edges shorter than ``min_len_mm``.

    The shortest offending spur is removed first; a junction left with two
    edges is dissolved into a single edge. Repeats until no spur qualifies.
    """
    thr = float(min_len_mm) * float(px_per_mm)
    verts, edges = _as_work(g)
    # merge chains through degree-2 vertices first so spur lengths are whole branches
    _dissolve_all(verts, edges)
    while True:
        spurs = []
        for e in edges.values():
            if e.u == e.v:
                continue
            du, dv = verts[e.u].degree, verts[e.v].degree
            if ((du == 1 and dv >= 3) or (dv == 1 and du >= 3)) and e.length < thr:
                spurs.append((e.length, e.id))
        if not spurs:
            break
        _, eid = min(spurs)
        e = edges.pop(eid)
        tail, junction = (e.u, e.v) if verts[e.u].degree == 1 else (e.v, e.u)
        del verts[tail]
        _recount(verts, edges)
        if verts[junction].degree == 2:
            _dissolve(verts, edges, junction)
    _dissolve_all(verts, edges)
    return _compact(verts, edges)
