"""Linear networks: construction, shortest paths and h-neighbourhoods.

A location is an ``(edge, offset)`` pair with the offset measured in arc
length from the edge's ``u`` endpoint.  All estimation uses arc length
only; polyline geometry is carried for output and validation.

Shortest-path ties are broken by the lexicographically smallest sequence
of crossed vertex ids, so neighbourhoods are deterministic.
"""

from __future__ import annotations

import heapq
import itertools
import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from typing import Any, Hashable

import numpy as np

from .errors import NetworkError

__all__ = [
    "Vertex",
    "Edge",
    "EdgeEnd",
    "LinearNetwork",
    "NetworkPoint",
    "PathResult",
    "SignedOffset",
    "NeighborhoodDatum",
    "Neighborhood",
    "build_network",
    "network_distance",
    "h_neighborhood",
    "direct_access_filter",
    "crossing_allowed",
]

VertexId = Hashable
EdgeId = Hashable
# (edge id, "u" | "v"): one end of an edge, as seen from the vertex it touches
EdgeEnd = tuple


@dataclass(frozen=True)
class Vertex:
    id: VertexId
    coords: tuple[float, ...]


@dataclass(frozen=True)
class Edge:
    id: EdgeId
    u: VertexId
    v: VertexId
    length: float
    polyline: tuple[tuple[float, ...], ...] | None = None

    def end_vertex(self, end: str) -> VertexId:
        return self.u if end == "u" else self.v

    def end_offset(self, end: str) -> float:
        return 0.0 if end == "u" else self.length


def _id_key(i):
    # ints sort before strings; comparable across mixed id types
    if isinstance(i, (int, np.integer)) and not isinstance(i, bool):
        return (0, int(i), "")
    return (1, 0, str(i))


class LinearNetwork:
    """Immutable network of vertices joined by curve edges.

    Build with :func:`build_network`.  ``adjacency[v]`` lists the edge ends
    ``(edge_id, end)`` incident to ``v``; a self-loop contributes both ends.
    """

    def __init__(self, vertices: dict, edges: dict, adjacency: dict):
        self._vertices = vertices
        self._edges = edges
        self._adjacency = {k: tuple(v) for k, v in adjacency.items()}
        order = sorted(vertices, key=_id_key)
        self._rank = {vid: r for r, vid in enumerate(order)}

    @property
    def vertices(self) -> Mapping[VertexId, Vertex]:
        return self._vertices

    @property
    def edges(self) -> Mapping[EdgeId, Edge]:
        return self._edges

    @property
    def adjacency(self) -> Mapping[VertexId, tuple]:
        return self._adjacency

    def edge(self, edge_id) -> Edge:
        try:
            return self._edges[edge_id]
        except KeyError:
            raise NetworkError(f"unknown edge id {edge_id!r}", edge_id) from None

    def degree(self, vertex_id) -> int:
        return len(self._adjacency.get(vertex_id, ()))

    def rank(self, vertex_id) -> int:
        return self._rank[vertex_id]

    def edge_ids(self) -> list:
        return sorted(self._edges, key=_id_key)

    def vertex_ids(self) -> list:
        return sorted(self._vertices, key=_id_key)

    @property
    def total_length(self) -> float:
        return float(sum(e.length for e in self._edges.values()))

    def point_vertex(self, p: "NetworkPoint") -> VertexId | None:
        """Vertex a point coincides with, if it sits on an edge endpoint."""
        e = self.edge(p.edge)
        if p.offset == 0.0:
            return e.u
        if p.offset == e.length:
            return e.v
        return None

    def validate_point(self, p: "NetworkPoint") -> None:
        e = self.edge(p.edge)
        if not (0.0 <= p.offset <= e.length) or math.isnan(p.offset):
            raise NetworkError(
                f"offset {p.offset} outside [0, {e.length}] on edge {p.edge!r}", p.edge
            )

    def __repr__(self):
        return f"LinearNetwork(vertices={len(self._vertices)}, edges={len(self._edges)})"


def _polyline_length(poly) -> float:
    pts = np.asarray(poly, dtype=float)
    return float(np.sum(np.linalg.norm(np.diff(pts, axis=0), axis=1)))


def build_network(vertices: Iterable, edges: Iterable) -> LinearNetwork:
    """Validate raw vertex and edge records and build a network.

    ``vertices`` holds ``(id, coords)`` pairs or mappings with ``id`` and
    ``coords``; ``edges`` holds ``(id, u, v, length[, polyline])`` tuples or
    mappings with ``id, u, v, length`` and optional ``polyline``.
    """
    vmap: dict = {}
    for rec in vertices:
        if isinstance(rec, Mapping):
            vid, coords = rec["id"], rec.get("coords", ())
        else:
            vid, coords = rec[0], rec[1]
        if vid in vmap:
            raise NetworkError(f"duplicate vertex id {vid!r}", vid)
        coords = tuple(float(c) for c in coords)
        if coords and len(coords) not in (2, 3):
            raise NetworkError(f"vertex {vid!r} must have 2 or 3 coordinates", vid)
        vmap[vid] = Vertex(vid, coords)
    if not vmap:
        raise NetworkError("network needs at least one vertex")

    emap: dict = {}
    adjacency: dict = {vid: [] for vid in vmap}
    for rec in edges:
        if isinstance(rec, Mapping):
            eid, u, v, length = rec["id"], rec["u"], rec["v"], rec["length"]
            polyline = rec.get("polyline")
        else:
            eid, u, v, length = rec[:4]
            polyline = rec[4] if len(rec) > 4 else None
        if eid in emap:
            raise NetworkError(f"duplicate edge id {eid!r}", eid)
        for end in (u, v):
            if end not in vmap:
                raise NetworkError(f"edge {eid!r} references unknown vertex {end!r}", end)
        length = float(length)
        if not length > 0.0 or math.isinf(length):
            raise NetworkError(f"edge {eid!r} has non-positive length {length}", eid)
        if polyline is not None:
            polyline = tuple(tuple(float(c) for c in pt) for pt in polyline)
            if len(polyline) < 2:
                raise NetworkError(f"edge {eid!r} polyline needs at least two points", eid)
            chord = _polyline_length(polyline)
            if abs(chord - length) > 1e-9 * length:
                raise NetworkError(
                    f"edge {eid!r} polyline length {chord} disagrees with declared length {length}",
                    eid,
                )
        emap[eid] = Edge(eid, u, v, length, polyline)
        adjacency[u].append((eid, "u"))
        adjacency[v].append((eid, "v"))
    if not emap:
        raise NetworkError("network needs at least one edge")
    return LinearNetwork(vmap, emap, adjacency)


@dataclass(frozen=True, order=True)
class NetworkPoint:
    edge: Any
    offset: float


@dataclass(frozen=True)
class PathResult:
    distance: float
    vertex_sequence: tuple = ()
    edge_sequence: tuple = ()


@dataclass(frozen=True)
class SignedOffset:
    value: float

    def __abs__(self):
        return abs(self.value)

    def __float__(self):
        return float(self.value)


@dataclass(frozen=True)
class NeighborhoodDatum:
    """A datum inside the h-window of an evaluation point.

    ``segments`` lists ``(edge_id, delta)`` along the path from the
    evaluation point, each ``delta`` a displacement in that edge's own
    offset coordinate.  ``crossings`` lists ``(vertex, in_end, out_end)``
    for every vertex passed.
    """

    point: NetworkPoint
    signed_offset: SignedOffset
    vertices_crossed: tuple
    terminal_edge: Any
    segments: tuple = ()
    crossings: tuple = ()
    index: int | None = None


@dataclass
class Neighborhood:
    """Data within distance ``< h`` plus assumption-violation flags."""

    x: NetworkPoint
    h: float
    data: list = field(default_factory=list)
    loop_warning: bool = False
    short_edge_warning: bool = False

    @property
    def warning(self) -> bool:
        return self.loop_warning or self.short_edge_warning

    def __iter__(self):
        return iter(self.data)

    def __len__(self):
        return len(self.data)

    def __getitem__(self, i):
        return self.data[i]


# ---------------------------------------------------------------------------
# bounded single-source shortest paths from a network point


@dataclass(frozen=True)
class _Route:
    dist: float
    vertices: tuple
    ranks: tuple
    segments: tuple
    crossings: tuple
    arrival: EdgeEnd
    exit_sign: float


@dataclass(frozen=True)
class Candidate:
    """One way of reaching points on ``edge`` from the source.

    ``kind`` is ``"direct"`` (same edge, no vertex) or the end ("u"/"v")
    through which the edge is entered.
    """

    edge: Any
    kind: str
    base: float
    entry: float
    prefix: tuple
    crossings: tuple
    vertices: tuple
    ranks: tuple
    exit_sign: float

    def distance(self, s: np.ndarray, x_offset: float, length: float) -> np.ndarray:
        if self.kind == "direct":
            return np.abs(s - x_offset)
        if self.kind == "u":
            return self.base + s
        return self.base + (length - s)

    def signed(self, s: np.ndarray, x_offset: float, length: float) -> np.ndarray:
        if self.kind == "direct":
            return s - x_offset
        return self.exit_sign * self.distance(s, x_offset, length)

    def segments_for(self, s: float) -> tuple:
        return self.prefix + ((self.edge, float(s) - self.entry),)


class Reach:
    """Shortest routes from ``x`` to every vertex closer than ``cutoff``."""

    def __init__(self, net: LinearNetwork, x: NetworkPoint, cutoff: float = math.inf):
        net.validate_point(x)
        self.net = net
        self.x = x
        self.cutoff = cutoff
        self.best: dict = {}
        self._run()

    def _run(self):
        net, x = self.net, self.x
        e = net.edge(x.edge)
        heap = []
        tick = itertools.count()
        for end, d, sign in (("u", x.offset, -1.0), ("v", e.length - x.offset, 1.0)):
            w = e.end_vertex(end)
            r = _Route(
                dist=d,
                vertices=(w,),
                ranks=(net.rank(w),),
                segments=((e.id, e.end_offset(end) - x.offset),),
                crossings=(),
                arrival=(e.id, end),
                exit_sign=sign,
            )
            if d < self.cutoff:
                heapq.heappush(heap, (d, r.ranks, next(tick), r))
        best = self.best
        while heap:
            d, _, _, r = heapq.heappop(heap)
            w = r.vertices[-1]
            if w in best:
                continue
            best[w] = r
            for f_id, end in net.adjacency[w]:
                if (f_id, end) == r.arrival:
                    continue  # no U-turns
                f = net.edge(f_id)
                other = "v" if end == "u" else "u"
                w2 = f.end_vertex(other)
                d2 = d + f.length
                if d2 >= self.cutoff or w2 in best:
                    continue
                delta = f.length if end == "u" else -f.length
                r2 = _Route(
                    dist=d2,
                    vertices=r.vertices + (w2,),
                    ranks=r.ranks + (net.rank(w2),),
                    segments=r.segments + ((f_id, delta),),
                    crossings=r.crossings + ((w, r.arrival, (f_id, end)),),
                    arrival=(f_id, other),
                    exit_sign=r.exit_sign,
                )
                heapq.heappush(heap, (d2, r2.ranks, next(tick), r2))

    def candidates(self, edge_id) -> list[Candidate]:
        """Routes onto ``edge_id`` in tie-break order (direct first)."""
        f = self.net.edge(edge_id)
        out = []
        if edge_id == self.x.edge:
            out.append(Candidate(edge_id, "direct", 0.0, self.x.offset, (), (), (), (), 0.0))
        for end in ("u", "v"):
            w = f.end_vertex(end)
            r = self.best.get(w)
            if r is None or r.arrival == (edge_id, end):
                continue
            out.append(
                Candidate(
                    edge=edge_id,
                    kind=end,
                    base=r.dist,
                    entry=f.end_offset(end),
                    prefix=r.segments,
                    crossings=r.crossings + ((w, r.arrival, (edge_id, end)),),
                    vertices=r.vertices,
                    ranks=r.ranks,
                    exit_sign=r.exit_sign,
                )
            )
        direct = [c for c in out if c.kind == "direct"]
        rest = sorted((c for c in out if c.kind != "direct"), key=lambda c: (c.ranks, c.kind))
        return direct + rest

    def assign(self, edge_id, s) -> tuple[np.ndarray, np.ndarray, list[Candidate]]:
        """Shortest distance and chosen candidate index for offsets ``s``."""
        s = np.asarray(s, dtype=float)
        cands = self.candidates(edge_id)
        if not cands:
            return np.full(s.shape, np.inf), np.full(s.shape, -1, dtype=int), cands
        length = self.net.edge(edge_id).length
        dmat = np.vstack([c.distance(s, self.x.offset, length) for c in cands])
        # argmin keeps the first minimum, i.e. the tie-break order
        choice = np.argmin(dmat, axis=0)
        dist = dmat[choice, np.arange(s.size)] if s.size else np.empty(0)
        return dist, choice, cands

    def warnings(self, h: float) -> tuple[bool, bool]:
        """``(loop_warning, short_edge_warning)`` for the h-window of ``x``."""
        net, x = self.net, self.x
        xe = net.edge(x.edge)
        dist = {w: r.dist for w, r in self.best.items()}
        near = {w for w, d in dist.items() if d < h}
        short = xe.length < h or any(
            net.edge(f).length < h for w in near for f, _ in net.adjacency[w]
        )
        loop = False
        # the evaluation edge, split at x into two half-edges
        for end, half in (("u", x.offset), ("v", xe.length - x.offset)):
            w = xe.end_vertex(end)
            r = self.best.get(w)
            if r is None:
                continue
            tree = len(r.segments) == 1 and r.arrival == (xe.id, end)
            if not tree and r.dist + half < 2 * h:
                loop = True
        touched = {f for w in dist for f, _ in net.adjacency[w]}
        for f_id in touched:
            if f_id == xe.id:
                continue
            f = net.edge(f_id)
            da, db = dist.get(f.u, math.inf), dist.get(f.v, math.inf)
            ra, rb = self.best.get(f.u), self.best.get(f.v)
            tree = (rb is not None and rb.arrival == (f_id, "v") and f.u != f.v) or (
                ra is not None and ra.arrival == (f_id, "u") and f.u != f.v
            )
            if not tree and da + db + f.length < 2 * h:
                loop = True
        return loop, short


def network_distance(net: LinearNetwork, a: NetworkPoint, b: NetworkPoint) -> PathResult:
    """Shortest-path distance between two network points.

    Returns ``inf`` with empty sequences when no path exists.
    """
    net.validate_point(b)
    if a == b:
        return PathResult(0.0)
    reach = Reach(net, a)
    dist, choice, cands = reach.assign(b.edge, np.array([b.offset]))
    if choice[0] < 0 or not math.isfinite(dist[0]):
        return PathResult(math.inf)
    c = cands[choice[0]]
    if c.kind == "direct":
        return PathResult(float(dist[0]), (), (a.edge,))
    edges = tuple(seg[0] for seg in c.segments_for(b.offset))
    return PathResult(float(dist[0]), c.vertices, edges)


def h_neighborhood(
    net: LinearNetwork,
    x: NetworkPoint,
    h: float,
    data: Iterable[NetworkPoint],
    toward: VertexId | None = None,
) -> Neighborhood:
    """All data strictly within network distance ``h`` of ``x``.

    Signed offsets are positive in the direction of increasing offset on
    ``x``'s edge; pass ``toward`` (an endpoint of that edge) to make the
    direction toward/through that vertex positive instead.
    """
    if not h > 0:
        raise ValueError(f"bandwidth must be positive, got {h}")
    data = list(data)
    reach = Reach(net, x, cutoff=2 * h)
    loop, short = reach.warnings(h)
    xe = net.edge(x.edge)
    flip = -1.0 if (toward is not None and toward == xe.u and xe.u != xe.v) else 1.0

    by_edge: dict = {}
    for i, p in enumerate(data):
        net.validate_point(p)
        by_edge.setdefault(p.edge, []).append(i)

    out = []
    for edge_id in sorted(by_edge, key=_id_key):
        idx = by_edge[edge_id]
        s = np.array([data[i].offset for i in idx])
        dist, choice, cands = reach.assign(edge_id, s)
        length = net.edge(edge_id).length
        for j, i in enumerate(idx):
            if not dist[j] < h:
                continue
            c = cands[choice[j]]
            signed = float(c.signed(s[j : j + 1], x.offset, length)[0]) * flip
            out.append(
                NeighborhoodDatum(
                    point=data[i],
                    signed_offset=SignedOffset(signed),
                    vertices_crossed=tuple(cr[0] for cr in c.crossings),
                    terminal_edge=edge_id,
                    segments=c.segments_for(s[j]) if c.kind != "direct" else ((edge_id, s[j] - x.offset),),
                    crossings=c.crossings,
                    index=i,
                )
            )
    out.sort(key=lambda d: d.index)
    return Neighborhood(x=x, h=h, data=out, loop_warning=loop, short_edge_warning=short)


def crossing_allowed(crossing, accepted) -> bool:
    """Whether a single ``(vertex, in_end, out_end)`` crossing has access.

    ``accepted`` is either a set of vertex ids (every transition through
    those vertices is allowed) or a mapping from vertex id to groups of edge
    ends; a transition is then allowed only within one group.
    """
    v, in_end, out_end = crossing
    if isinstance(accepted, Mapping):
        groups = accepted.get(v)
        if not groups:
            return False
        return any(in_end in g and out_end in g for g in groups)
    return v in accepted


def direct_access_filter(neighborhood, accepted) -> list:
    """Keep only data whose every crossed vertex passed the equality test."""
    data = neighborhood.data if isinstance(neighborhood, Neighborhood) else list(neighborhood)
    return [d for d in data if all(crossing_allowed(c, accepted) for c in d.crossings)]
