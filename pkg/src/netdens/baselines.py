"""Kernel estimators used for comparison.

``naive_kde`` applies a kernel to the shortest-path distance and does not
conserve mass near junctions.  The equal-split estimators propagate each
event's kernel through vertices, splitting what is left of the tail:

* ESDK: each of the ``J - 1`` onward edges gets weight ``1 / (J - 1)``;
* ESCK: onward edges get ``2 / J`` and the edge the tail arrived on gets a
  reflected copy of weight ``2 / J - 1``, which keeps the estimate
  continuous across the vertex.

At a degree-one vertex both reflect the whole tail back.  The weight of a
walk is the same in both directions, so the estimate at ``x`` is computed
by walking outward from ``x`` once and summing over the events met.
"""

from __future__ import annotations

import csv
from collections.abc import Iterable, Mapping
from dataclasses import dataclass

import numpy as np

from .errors import RecursionLimitError
from .kernels import EPANECHNIKOV, Kernel
from .network import LinearNetwork, NetworkPoint, Reach

__all__ = [
    "EventSet",
    "SplitKernelTerm",
    "group_events",
    "naive_kde",
    "esdk",
    "esck",
    "split_weights",
    "BASELINES",
    "baseline_profile",
    "write_baseline_csv",
]

MAX_DEPTH = 64
PRUNE = 1e-12


@dataclass(frozen=True, eq=False)
class EventSet:
    """Event offsets grouped by edge and sorted; ``total`` is N."""

    by_edge: dict
    total: int

    def on(self, edge_id) -> np.ndarray:
        return self.by_edge.get(edge_id, _EMPTY)


_EMPTY = np.empty(0)


def group_events(net: LinearNetwork, events) -> EventSet:
    if isinstance(events, EventSet):
        return events
    if isinstance(events, Mapping):
        raw = {k: np.asarray(v, dtype=float) for k, v in events.items()}
    else:
        tmp: dict = {}
        for p in events:
            tmp.setdefault(p.edge, []).append(p.offset)
        raw = {k: np.asarray(v, dtype=float) for k, v in tmp.items()}
    for k in raw:
        net.edge(k)
    total = int(sum(v.size for v in raw.values()))
    if total == 0:
        raise ValueError("no events")
    return EventSet({k: np.sort(v) for k, v in raw.items()}, total)


def naive_kde(net: LinearNetwork, events, x: NetworkPoint, h: float, kernel: Kernel = EPANECHNIKOV) -> float:
    """``(1/N) sum K_h(d(x_i, x))`` with shortest-path distance ``d``."""
    ev = group_events(net, events)
    reach = Reach(net, x, cutoff=h)
    touched = {x.edge} | {f for w, r in reach.best.items() if r.dist < h for f, _ in net.adjacency[w]}
    acc = 0.0
    for f in touched:
        s = ev.on(f)
        if s.size == 0:
            continue
        d, _, _ = reach.assign(f, s)
        acc += float(np.sum(kernel(d / h)))
    return acc / (ev.total * h)


@dataclass(frozen=True)
class SplitKernelTerm:
    """A piece of the kernel travelling along one edge.

    The piece enters ``edge`` at offset ``entry`` moving in ``direction``
    (+1 toward larger offsets) after ``travelled`` arc length, carrying
    ``weight``.  ``lo``/``hi`` bound the offsets it covers.
    """

    edge: object
    entry: float
    direction: int
    travelled: float
    weight: float
    depth: int
    lo: float
    hi: float
    closed_hi: bool = True


def split_weights(J: int, continuous: bool) -> tuple[float, float]:
    """``(onward, reflected)`` weights at a vertex of degree ``J``."""
    if J <= 1:
        return 0.0, 1.0
    if continuous:
        return 2.0 / J, 2.0 / J - 1.0
    return 1.0 / (J - 1), 0.0


def _equal_split(net, events, x, h, kernel, continuous):
    ev = group_events(net, events)
    net.validate_point(x)
    e = net.edge(x.edge)
    t = x.offset
    stack = [
        SplitKernelTerm(x.edge, t, +1, 0.0, 1.0, 0, t, e.length, True),
        SplitKernelTerm(x.edge, t, -1, 0.0, 1.0, 0, 0.0, t, False),
    ]
    acc = 0.0
    while stack:
        term = stack.pop()
        f = net.edge(term.edge)
        s = ev.on(term.edge)
        if s.size:
            i0 = np.searchsorted(s, term.lo, side="left")
            i1 = np.searchsorted(s, term.hi, side="right" if term.closed_hi else "left")
            if i1 > i0:
                d = term.travelled + np.abs(s[i0:i1] - term.entry)
                acc += term.weight * float(np.sum(kernel(d / h)))
        end = "v" if term.direction > 0 else "u"
        reach_end = term.travelled + abs(f.end_offset(end) - term.entry)
        if reach_end >= h:
            continue
        w = f.end_vertex(end)
        ends = net.adjacency[w]
        onward, reflected = split_weights(len(ends), continuous)
        nxt = []
        for g_id, g_end in ends:
            share = reflected if (g_id, g_end) == (term.edge, end) else onward
            wt = term.weight * share
            if abs(wt) < PRUNE:
                continue
            g = net.edge(g_id)
            entry = g.end_offset(g_end)
            nxt.append(
                SplitKernelTerm(g_id, entry, +1 if g_end == "u" else -1, reach_end, wt,
                                term.depth + 1, 0.0, g.length, True)
            )
        if nxt and term.depth + 1 > MAX_DEPTH:
            raise RecursionLimitError(
                f"equal-split enumeration exceeded depth {MAX_DEPTH}; h is large relative to edge lengths"
            )
        stack.extend(nxt)
    return acc / (ev.total * h)


def esdk(net: LinearNetwork, events, x: NetworkPoint, h: float, kernel: Kernel = EPANECHNIKOV) -> float:
    """Equal-split discontinuous kernel estimate at ``x``."""
    return _equal_split(net, events, x, h, kernel, continuous=False)


def esck(net: LinearNetwork, events, x: NetworkPoint, h: float, kernel: Kernel = EPANECHNIKOV) -> float:
    """Equal-split continuous kernel estimate at ``x``."""
    return _equal_split(net, events, x, h, kernel, continuous=True)


BASELINES = {"KDE": naive_kde, "ESDK": esdk, "ESCK": esck}


def baseline_profile(method: str, net: LinearNetwork, events, h: float, grid: Iterable[NetworkPoint],
                     kernel: Kernel = EPANECHNIKOV) -> list:
    fn = BASELINES[method.upper()]
    ev = group_events(net, events)
    return [(p.edge, p.offset, fn(net, ev, p, h, kernel)) for p in grid]


def write_baseline_csv(rows, path, method: str) -> None:
    """Same columns as the main profile; ``stderr`` is empty, ``regime`` names the method."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["edge_id", "offset", "density", "stderr", "regime"])
        for edge, off, val in rows:
            w.writerow([edge, repr(float(off)), repr(float(val)), "", method.lower()])
