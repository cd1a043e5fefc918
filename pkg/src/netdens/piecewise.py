"""Constrained local piecewise-linear fits around network vertices.

Near a vertex where the one-sided limits were judged equal, all edges share
one intercept (the density at the evaluation point) and each edge keeps its
own slope.  A datum reached through vertices ``v1, ..., vk`` along edges
``e_l, e_a1, ..., e_ak`` is modelled by chaining first-order Taylor
expansions, so its design row holds the displacement travelled on each
edge.  Slopes are expressed in each edge's own offset coordinate, which
keeps rows exact for any truth that is linear on every edge.
"""

from __future__ import annotations

import csv
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .binning import BinnedNetwork, plugin_variance
from .errors import InsufficientSupportError, SingularDesignError
from .kernels import EPANECHNIKOV, Kernel
from .lpr import fit_local_poly
from .network import (
    LinearNetwork,
    Neighborhood,
    NetworkPoint,
    Reach,
    _id_key,
    direct_access_filter,
    h_neighborhood,
)
from .wls import sandwich, solve_wls

__all__ = [
    "ConstrainedDesign",
    "ConstrainedFit",
    "VertexDiagnostics",
    "PointEstimate",
    "REGIMES",
    "bin_points",
    "window_neighborhood",
    "build_constrained_design",
    "build_equal_slope_design",
    "constrained_estimate",
    "equal_slope_estimate",
    "vertex_diagnostics",
    "estimate_at",
    "profile_grid",
    "density_profile",
    "write_profile_csv",
]

REGIMES = ("interior", "constrained", "constrained_equal_slope", "edge_restricted")


@dataclass(frozen=True, eq=False)
class ConstrainedDesign:
    """Weighted regression system for one evaluation point.

    ``columns[0]`` is ``"intercept"``; the rest are edge ids (or
    ``"slope"`` for the equal-slope design).  ``widths`` holds each row's bin
    width, needed by the plug-in response variance.
    """

    x: NetworkPoint
    h: float
    columns: tuple
    X: np.ndarray
    weights: np.ndarray
    response: np.ndarray
    widths: np.ndarray
    total: int
    rows: tuple = ()

    @property
    def n_rows(self) -> int:
        return int(self.X.shape[0])


@dataclass(frozen=True, eq=False)
class ConstrainedFit:
    m_hat: float
    covariance: np.ndarray
    beta: np.ndarray
    design: ConstrainedDesign
    condition: float

    @property
    def se(self) -> float:
        return math.sqrt(max(float(self.covariance[0, 0]), 0.0))


def bin_points(binned: BinnedNetwork, edge_ids) -> tuple[list, list]:
    """Bin centres as network points plus ``(edge_id, bin_index)`` labels."""
    pts, labels = [], []
    for k in edge_ids:
        b = binned[k]
        for i, c in enumerate(b.centers):
            pts.append(NetworkPoint(k, float(c)))
            labels.append((k, i))
    return pts, labels


def _touched_edges(net: LinearNetwork, reach: Reach, h: float) -> list:
    out = {reach.x.edge}
    for w, r in reach.best.items():
        if r.dist < h:
            out.update(f for f, _ in net.adjacency[w])
    return sorted(out, key=_id_key)


def window_neighborhood(
    net: LinearNetwork, binned: BinnedNetwork, x: NetworkPoint, h: float
) -> tuple[Neighborhood, list]:
    """h-neighbourhood of ``x`` among bin centres, with bin labels."""
    reach = Reach(net, x, cutoff=h)
    pts, labels = bin_points(binned, _touched_edges(net, reach, h))
    return h_neighborhood(net, x, h, pts), labels


def _bin_lookup(binned: BinnedNetwork, datum):
    # data are bin centres, so the offset identifies the bin
    b = binned[datum.point.edge]
    i = int(np.clip(round(datum.point.offset / b.actual_width - 0.5), 0, b.n_bins - 1))
    return datum.point.edge, i


def _assemble(x, h, columns, rows_X, data, binned, kernel):
    if not data:
        raise InsufficientSupportError(f"no data within h={h:g} of {x}", 0)
    dist = np.array([abs(d.signed_offset.value) for d in data])
    w = kernel(dist / h) / h
    keep = w > 0
    X = np.asarray(rows_X, dtype=float)[keep]
    ids = [_bin_lookup(binned, d) for d, k in zip(data, keep) if k]
    y = np.array([binned[e].heights[i] for e, i in ids])
    widths = np.array([binned[e].actual_width for e, _ in ids])
    w = w[keep]
    # drop slope columns that never vary (edges without data or path share)
    used = [0] + [j for j in range(1, X.shape[1]) if np.any(X[:, j] != 0.0)]
    X = X[:, used]
    columns = tuple(columns[j] for j in used)
    if X.shape[0] < X.shape[1]:
        raise InsufficientSupportError(
            f"{X.shape[0]} rows for {X.shape[1]} coefficients at {x}; "
            "increase h or use the edge-restricted fit",
            X.shape[0],
        )
    return ConstrainedDesign(
        x=x, h=h, columns=columns, X=X, weights=w, response=y, widths=widths,
        total=binned.total, rows=tuple(ids),
    )


def _neighborhood_data(net, binned, x, h, neighborhood, accepted):
    if neighborhood is None:
        neighborhood, _ = window_neighborhood(net, binned, x, h)
    data = list(neighborhood.data if isinstance(neighborhood, Neighborhood) else neighborhood)
    if accepted is not None:
        data = direct_access_filter(data, accepted)
    return data


def build_constrained_design(
    net: LinearNetwork,
    x: NetworkPoint,
    binned: BinnedNetwork,
    h: float,
    kernel: Kernel = EPANECHNIKOV,
    *,
    neighborhood=None,
    accepted=None,
) -> ConstrainedDesign:
    """Shared-intercept, per-edge-slope design at ``x``.

    ``neighborhood`` defaults to the bin centres within ``h`` of ``x``;
    ``accepted`` (vertex set or vertex -> groups mapping) applies the
    direct-access filter first.  Each row is ``[1, d_e1, d_e2, ...]`` where
    ``d_e`` is the signed displacement along edge ``e`` on the datum's path.
    """
    data = _neighborhood_data(net, binned, x, h, neighborhood, accepted)
    columns = [x.edge]
    for d in data:
        for e, _ in d.segments:
            if e not in columns:
                columns.append(e)
    columns = ["intercept"] + sorted(columns, key=lambda e: (e != x.edge, _id_key(e)))
    col = {e: j for j, e in enumerate(columns) if j > 0}
    rows = np.zeros((len(data), len(columns)))
    rows[:, 0] = 1.0
    for r, d in enumerate(data):
        for e, delta in d.segments:
            rows[r, col[e]] += delta
    return _assemble(x, h, tuple(columns), rows, data, binned, kernel)


def build_equal_slope_design(
    net: LinearNetwork,
    x: NetworkPoint,
    binned: BinnedNetwork,
    h: float,
    kernel: Kernel = EPANECHNIKOV,
    *,
    neighborhood=None,
    accepted=None,
) -> ConstrainedDesign:
    """Design ``[1, s_i]`` with ``s_i`` the signed path offset from ``x``.

    With every crossed vertex's slopes tied to the evaluation edge's, the
    chained row collapses to the full signed path distance.
    """
    data = _neighborhood_data(net, binned, x, h, neighborhood, accepted)
    rows = np.array([[1.0, d.signed_offset.value] for d in data]).reshape(-1, 2)
    return _assemble(x, h, ("intercept", "slope"), rows, data, binned, kernel)


def constrained_estimate(design: ConstrainedDesign) -> ConstrainedFit:
    """WLS intercept of ``design`` with its sandwich covariance."""
    p = design.X.shape[1]
    scale = np.array([1.0] + [design.h] * (p - 1))
    res = solve_wls(design.X, design.weights, design.response, scale=scale)
    fitted = design.X @ res.beta
    var = plugin_variance(fitted, design.total, design.widths)
    cov = sandwich(design.X, design.weights, res.bread, var)
    return ConstrainedFit(float(res.beta[0]), cov, res.beta, design, res.condition)


def equal_slope_estimate(
    net: LinearNetwork,
    x: NetworkPoint,
    binned: BinnedNetwork,
    h: float,
    kernel: Kernel = EPANECHNIKOV,
    *,
    neighborhood=None,
    accepted=None,
) -> ConstrainedFit:
    return constrained_estimate(
        build_equal_slope_design(net, x, binned, h, kernel, neighborhood=neighborhood, accepted=accepted)
    )


# ---------------------------------------------------------------------------
# leading-order bias and variance near a vertex


@dataclass(frozen=True, eq=False)
class VertexDiagnostics:
    """Expansion of the constrained fit's moments in ``delta = (v - x)/h``.

    Kernel moments ``mu[j][i]`` and ``r[j][i]`` are taken over the part of
    the window ``(-1, 1)`` that edge end ``j`` occupies in the signed
    coordinate ``(x_i - x)/h`` (positive toward the vertex).  Column 0 is
    the intercept and column 1 the evaluation edge.
    """

    columns: tuple
    delta: float
    U0: np.ndarray
    U1: np.ndarray
    R0: np.ndarray
    R1: np.ndarray
    M0: np.ndarray
    M1: np.ndarray
    C: float
    bias_leading: float
    variance_leading: float
    variance_zeroth: float
    dropped: tuple = ()
    regions: dict = field(default_factory=dict)


def _region_moments(kernel, lo, hi, n=4):
    mu = np.zeros(n)
    r = np.zeros(n)
    if hi <= lo:
        return mu, r
    for i in range(n):
        mu[i] = integrate.quad(lambda u: u**i * kernel(u), lo, hi, epsabs=1e-12, epsrel=1e-12)[0]
        r[i] = integrate.quad(lambda u: u**i * kernel(u) ** 2, lo, hi, epsabs=1e-12, epsrel=1e-12)[0]
    return mu, r


def _vertex_side(net, x, vertex):
    e = net.edge(x.edge)
    if e.u == vertex and e.v == vertex:
        raise ValueError("evaluation edge is a loop at the vertex")
    if e.v == vertex:
        return "v", e.length - x.offset, x.offset
    if e.u == vertex:
        return "u", x.offset, e.length - x.offset
    raise ValueError(f"vertex {vertex!r} is not an endpoint of edge {x.edge!r}")


def _plugin_curvatures(net, binned, x, vertex, h, kernel, x_end):
    curv = {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for f, end in net.adjacency[vertex]:
            if (f, end) == (x.edge, x_end):
                continue
            b = binned[f]
            fit = fit_local_poly(b, 0.0 if end == "u" else b.length, h, 2, kernel)
            curv[(f, end)] = fit.derivative(2)
        fit = fit_local_poly(binned[x.edge], x.offset, h, 2, kernel)
        curv["x"] = fit.derivative(2)
    return curv


def vertex_diagnostics(
    net: LinearNetwork,
    x: NetworkPoint,
    vertex,
    h: float,
    omega: float,
    N: int,
    m_hat: float,
    curvatures: dict | None = None,
    kernel: Kernel = EPANECHNIKOV,
    binned: BinnedNetwork | None = None,
) -> VertexDiagnostics:
    """Leading bias and variance of the constrained fit at ``x`` near ``vertex``.

    ``curvatures`` maps each other edge end ``(edge_id, end)`` at the vertex
    to ``m''`` there, and the key ``"x"`` to ``m''`` at ``x`` on its own
    edge; missing values are estimated from local quadratic fits on
    ``binned``.  Variance is ``C / (N h)`` times the first-order expansion
    of ``e1' U^-1 M U^-1 e1`` with ``C = m - omega m**2``.
    """
    x_end, to_v, away = _vertex_side(net, x, vertex)
    delta = to_v / h
    if not delta < 1.0:
        raise ValueError("vertex must lie strictly inside the h-window of x")
    if curvatures is None or len(curvatures) < net.degree(vertex):
        if binned is None:
            raise ValueError("curvatures or binned data are required")
        plug = _plugin_curvatures(net, binned, x, vertex, h, kernel, x_end)
        curvatures = {**plug, **(curvatures or {})}

    ends = [(x.edge, x_end)] + [fe for fe in net.adjacency[vertex] if fe != (x.edge, x_end)]
    regions = {ends[0]: (-min(1.0, away / h), delta)}
    for f, end in ends[1:]:
        regions[(f, end)] = (delta, min(1.0, delta + net.edge(f).length / h))
    mom = {e: _region_moments(kernel, *regions[e]) for e in ends}
    dropped = tuple(e for e in ends[1:] if mom[e][0][0] <= 1e-14)
    ends = [e for e in ends if e not in dropped]
    J = len(ends)
    n = J + 1
    mu = [mom[e][0] for e in ends]
    rr = [mom[e][1] for e in ends]
    c2 = [curvatures["x"]] + [curvatures[e] for e in ends[1:]]
    others = range(1, J)

    U0 = np.zeros((n, n))
    U1 = np.zeros((n, n))
    M0 = np.zeros((n, n))
    M1 = np.zeros((n, n))
    U0[0, 0] = sum(m[0] for m in mu)
    M0[0, 0] = sum(r[0] for r in rr)
    for j in range(J):
        U0[0, j + 1] = U0[j + 1, 0] = mu[j][1]
        U0[j + 1, j + 1] = mu[j][2]
        M0[0, j + 1] = M0[j + 1, 0] = rr[j][1]
        M0[j + 1, j + 1] = rr[j][2]
    s_mu0 = sum(mu[j][0] for j in others)
    s_r0 = sum(rr[j][0] for j in others)
    U1[0, 1] = U1[1, 0] = s_mu0
    M1[0, 1] = M1[1, 0] = s_r0
    for j in others:
        U1[0, j + 1] = U1[j + 1, 0] = -mu[j][0]
        U1[1, j + 1] = U1[j + 1, 1] = mu[j][1]
        U1[j + 1, j + 1] = -2.0 * mu[j][1]
        M1[0, j + 1] = M1[j + 1, 0] = -rr[j][0]
        M1[1, j + 1] = M1[j + 1, 1] = rr[j][1]
        M1[j + 1, j + 1] = -2.0 * rr[j][1]

    R0 = np.zeros(n)
    R1 = np.zeros(n)
    R0[0] = c2[0] * mu[0][2] + sum(c2[j] * mu[j][2] for j in others)
    R0[1] = c2[0] * mu[0][3]
    R1[0] = -2.0 * sum(c2[j] * mu[j][1] for j in others)
    R1[1] = sum(c2[j] * mu[j][2] for j in others)
    for j in others:
        R0[j + 1] = c2[j] * mu[j][3]
        R1[j + 1] = -3.0 * c2[j] * mu[j][2]

    if np.linalg.cond(U0) > 1e12:
        raise SingularDesignError("moment matrix U0 is singular", float(np.linalg.cond(U0)))
    Ui = np.linalg.inv(U0)
    e1 = np.zeros(n)
    e1[0] = 1.0
    bias = 0.5 * h * h * e1 @ Ui @ (R0 + delta * (R1 - U1 @ Ui @ R0))
    q0 = e1 @ Ui @ M0 @ Ui @ e1
    q1 = e1 @ Ui @ (M1 - U1 @ Ui @ M0 - M0 @ Ui @ U1) @ Ui @ e1
    C = m_hat - omega * m_hat * m_hat
    scale = C / (N * h)
    return VertexDiagnostics(
        columns=("intercept",) + tuple(ends),
        delta=delta,
        U0=U0, U1=U1, R0=R0, R1=R1, M0=M0, M1=M1,
        C=C,
        bias_leading=float(bias),
        variance_leading=float(scale * (q0 + delta * q1)),
        variance_zeroth=float(scale * q0),
        dropped=dropped,
        regions={e: regions[e] for e in ends},
    )


# ---------------------------------------------------------------------------
# full pipeline at a point and along every edge


@dataclass(frozen=True)
class PointEstimate:
    edge: object
    offset: float
    density: float
    stderr: float
    regime: str
    n_rows: int = 0
    flags: tuple = ()


def _window_vertices(net, reach, h):
    return [w for w, r in reach.best.items() if r.dist < h and net.degree(w) >= 2]


def estimate_at(
    net: LinearNetwork,
    binned: BinnedNetwork,
    x: NetworkPoint,
    h: float,
    decisions,
    kernel: Kernel = EPANECHNIKOV,
    *,
    use_slopes: bool = True,
) -> PointEstimate:
    """Density at ``x`` using the regime dictated by the vertex decisions.

    * no junction within ``h``: local linear fit on ``x``'s edge (interior);
    * junctions within ``h`` but no datum with direct access through one:
      local linear fit on ``x``'s edge only (edge_restricted);
    * otherwise the shared-intercept fit over direct-access data, with
      slopes tied through every crossed vertex when the slope test accepts
      at all of them (constrained_equal_slope).

    A constrained system with too few rows falls back to the edge-restricted
    fit and records the ``fallback`` flag.
    """
    net.validate_point(x)
    reach = Reach(net, x, cutoff=h)
    if not _window_vertices(net, reach, h):
        fit = fit_local_poly(binned[x.edge], x.offset, h, 1, kernel)
        return PointEstimate(x.edge, x.offset, fit.m_hat, fit.se, "interior", fit.n_effective)

    def restricted(flags=()):
        fit = fit_local_poly(binned[x.edge], x.offset, h, 1, kernel)
        return PointEstimate(x.edge, x.offset, fit.m_hat, fit.se, "edge_restricted", fit.n_effective, flags)

    nb, _ = window_neighborhood(net, binned, x, h)
    data = direct_access_filter(nb, decisions.accepted_groups())
    crossings = {c for d in data for c in d.crossings}
    if not crossings:
        return restricted()
    equal_slope = use_slopes and all(decisions.slope_accepted(c) for c in crossings)
    try:
        if equal_slope:
            design = build_equal_slope_design(net, x, binned, h, kernel, neighborhood=data)
        else:
            design = build_constrained_design(net, x, binned, h, kernel, neighborhood=data)
        fit = constrained_estimate(design)
    except (InsufficientSupportError, SingularDesignError):
        return restricted(("fallback",))
    regime = "constrained_equal_slope" if equal_slope else "constrained"
    return PointEstimate(x.edge, x.offset, fit.m_hat, fit.se, regime, design.n_rows)


def profile_grid(length: float, h: float, step: float | None = None) -> np.ndarray:
    """Offsets ``0, step, ..., length`` with default step ``min(h/4, length/20)``."""
    step = min(h / 4.0, length / 20.0) if step is None else step
    n = max(1, int(math.ceil(length / step - 1e-9)))
    return np.linspace(0.0, length, n + 1)


def density_profile(
    net: LinearNetwork,
    binned: BinnedNetwork,
    h: float,
    decisions,
    kernel: Kernel = EPANECHNIKOV,
    *,
    step: float | None = None,
    threads: int | None = None,
    use_slopes: bool = True,
) -> list[PointEstimate]:
    """Estimates on a regular grid along every edge, in edge-id order."""
    pts = []
    for k in net.edge_ids():
        for s in profile_grid(net.edge(k).length, h, step):
            pts.append(NetworkPoint(k, float(s)))
    fn = lambda p: estimate_at(net, binned, p, h, decisions, kernel, use_slopes=use_slopes)  # noqa: E731
    workers = threads or os.cpu_count() or 1
    if workers <= 1 or len(pts) < 8:
        return [fn(p) for p in pts]
    if use_slopes:
        # fill the lazily computed slope reports before going parallel
        for v, rep in decisions.reports.items():
            for g in rep.groups:
                if len(g) >= 2:
                    for end in g:
                        decisions.slope_report(v, end)
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, pts))


def write_profile_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["edge_id", "offset", "density", "stderr", "regime"])
        for r in rows:
            w.writerow([r.edge, repr(float(r.offset)), repr(float(r.density)), repr(float(r.stderr)), r.regime])
