"""Simple binning of event locations into per-edge histograms.

Each edge of length ``L`` is cut into ``n = max(1, round(L / w))`` equal
bins, so the bins tile every edge exactly.  Heights ``c / (N * width)``
form a histogram of total area one over the whole network.
"""

from __future__ import annotations

import csv
from collections.abc import Iterable
from dataclasses import dataclass

import numpy as np

from .network import LinearNetwork, NetworkPoint, _id_key

__all__ = [
    "BinConfig",
    "BinnedEdge",
    "BinnedNetwork",
    "VARIANCE_FLOOR",
    "bin_events",
    "bin_offsets",
    "default_bin_width",
    "plugin_variance",
    "merge_binned",
    "write_histogram_csv",
]

VARIANCE_FLOOR = 1e-12


@dataclass(frozen=True)
class BinConfig:
    width: float

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError(f"bin width must be positive, got {self.width}")


@dataclass(frozen=True, eq=False)
class BinnedEdge:
    edge: object
    centers: np.ndarray
    counts: np.ndarray
    heights: np.ndarray
    actual_width: float
    total: int

    @property
    def n_bins(self) -> int:
        return int(self.centers.size)

    @property
    def length(self) -> float:
        return self.n_bins * self.actual_width


@dataclass(frozen=True, eq=False)
class BinnedNetwork:
    edges: dict
    total: int

    def __getitem__(self, edge_id) -> BinnedEdge:
        return self.edges[edge_id]

    def area(self) -> float:
        return float(sum(np.sum(b.heights) * b.actual_width for b in self.edges.values()))


def default_bin_width(h: float, h_max: float | None = None) -> float:
    """Bin width ``h**2 / (20 * h_max)``; with a single bandwidth, ``h / 20``."""
    h_max = h if h_max is None else h_max
    return h * h / (20.0 * h_max)


def _frozen(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


def bin_offsets(offsets: np.ndarray, length: float, n_bins: int) -> np.ndarray:
    """Bin index of each offset; ties on a bin edge go to the higher bin."""
    idx = np.floor(offsets * n_bins / length).astype(np.int64)
    # bin edges k*L/n carry one rounding; compare against them directly
    idx = np.where((idx + 1) * length / n_bins <= offsets, idx + 1, idx)
    idx = np.where(idx * length / n_bins > offsets, idx - 1, idx)
    return np.clip(idx, 0, n_bins - 1)


def bin_events(net: LinearNetwork, events: Iterable[NetworkPoint], cfg: BinConfig | float) -> BinnedNetwork:
    """Histogram events on every edge of ``net``.

    ``events`` may be an iterable of :class:`NetworkPoint` or a mapping
    ``edge_id -> array of offsets``.
    """
    if not isinstance(cfg, BinConfig):
        cfg = BinConfig(float(cfg))
    if isinstance(events, dict):
        grouped = {k: np.asarray(v, dtype=float) for k, v in events.items()}
    else:
        tmp: dict = {}
        for p in events:
            tmp.setdefault(p.edge, []).append(p.offset)
        grouped = {k: np.asarray(v, dtype=float) for k, v in tmp.items()}
    total = int(sum(v.size for v in grouped.values()))
    if total == 0:
        raise ValueError("cannot bin an empty event list")
    for k, v in grouped.items():
        e = net.edge(k)
        if v.size and (v.min() < 0.0 or v.max() > e.length or np.isnan(v).any()):
            raise ValueError(f"event offsets outside [0, {e.length}] on edge {k!r}")

    out = {}
    for edge_id in net.edge_ids():
        e = net.edges[edge_id]
        n_bins = max(1, int(round(e.length / cfg.width)))
        width = e.length / n_bins
        centers = (np.arange(n_bins) + 0.5) * width
        offs = grouped.get(edge_id)
        if offs is None or offs.size == 0:
            counts = np.zeros(n_bins, dtype=np.int64)
        else:
            counts = np.bincount(bin_offsets(offs, e.length, n_bins), minlength=n_bins).astype(np.int64)
        heights = counts / (total * width)
        out[edge_id] = BinnedEdge(
            edge_id, _frozen(centers), _frozen(counts), _frozen(heights), width, total
        )
    return BinnedNetwork(out, total)


def merge_binned(a: BinnedNetwork, b: BinnedNetwork) -> BinnedNetwork:
    """Combine histograms of disjoint event sets binned with the same widths."""
    total = a.total + b.total
    out = {}
    for k, ea in a.edges.items():
        eb = b.edges[k]
        if ea.n_bins != eb.n_bins:
            raise ValueError(f"edge {k!r} binned with different widths")
        counts = ea.counts + eb.counts
        heights = counts / (total * ea.actual_width)
        out[k] = BinnedEdge(k, ea.centers, _frozen(counts), _frozen(heights), ea.actual_width, total)
    return BinnedNetwork(out, total)


def plugin_variance(m, total: int, width) -> np.ndarray:
    """Response variance ``m/(N w) - m**2/N`` clamped below at a tiny floor."""
    m = np.asarray(m, dtype=float)
    return np.maximum(m / (total * np.asarray(width)) - m * m / total, VARIANCE_FLOOR)


def write_histogram_csv(binned: BinnedNetwork, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["edge_id", "center", "count", "height"])
        for k in sorted(binned.edges, key=_id_key):
            b = binned.edges[k]
            for c, n, y in zip(b.centers, b.counts, b.heights):
                w.writerow([k, repr(float(c)), int(n), repr(float(y))])
