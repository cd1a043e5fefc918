"""Reading and writing networks and event files.

Network JSON::

    {"vertices": [{"id": ..., "coords": [x, y(, z)]}, ...],
     "edges": [{"id": ..., "u": ..., "v": ..., "length": L,
                "polyline": [[x, y], ...]}, ...]}

Events CSV has the header ``edge_id,offset``.  Edge ids in the CSV are
matched to the network's ids by their string form.
"""

from __future__ import annotations

import csv
import json
import math

from .errors import NetworkError
from .network import LinearNetwork, NetworkPoint, _id_key, build_network

__all__ = ["load_network", "network_to_json", "write_network", "load_events", "write_events"]


def load_network(path) -> LinearNetwork:
    with open(path) as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict) or "vertices" not in doc or "edges" not in doc:
        raise NetworkError(f"{path}: expected an object with 'vertices' and 'edges'")
    return build_network(doc["vertices"], doc["edges"])


def network_to_json(net: LinearNetwork) -> dict:
    verts = [{"id": v, "coords": list(net.vertices[v].coords)} for v in net.vertex_ids()]
    edges = []
    for k in net.edge_ids():
        e = net.edges[k]
        rec = {"id": e.id, "u": e.u, "v": e.v, "length": e.length}
        if e.polyline is not None:
            rec["polyline"] = [list(p) for p in e.polyline]
        edges.append(rec)
    return {"vertices": verts, "edges": edges}


def write_network(net: LinearNetwork, path) -> None:
    with open(path, "w") as fh:
        json.dump(network_to_json(net), fh, indent=2)
        fh.write("\n")


def load_events(path, net: LinearNetwork) -> list[NetworkPoint]:
    by_name = {str(k): k for k in net.edges}
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"edge_id", "offset"} <= set(reader.fieldnames):
            raise ValueError(f"{path}: header must contain edge_id,offset")
        for lineno, row in enumerate(reader, start=2):
            key = row["edge_id"].strip()
            if key not in by_name:
                raise NetworkError(f"{path}:{lineno}: unknown edge id {key!r}", key)
            try:
                off = float(row["offset"])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: bad offset {row['offset']!r}") from None
            p = NetworkPoint(by_name[key], off)
            if math.isnan(off):
                raise ValueError(f"{path}:{lineno}: offset is NaN")
            net.validate_point(p)
            out.append(p)
    if not out:
        raise ValueError(f"{path}: no events")
    return out


def write_events(events, path) -> None:
    """``events`` is a list of points or a mapping ``edge_id -> offsets``."""
    if isinstance(events, dict):
        pts = [(k, float(s)) for k in sorted(events, key=_id_key) for s in events[k]]
    else:
        pts = [(p.edge, float(p.offset)) for p in events]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["edge_id", "offset"])
        for k, s in pts:
            w.writerow([k, repr(s)])
