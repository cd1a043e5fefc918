"""Local polynomial regression on the binned histogram of one edge."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .binning import BinnedEdge, plugin_variance
from .errors import InsufficientSupportError
from .kernels import EPANECHNIKOV, Kernel, local_linear_constants
from .wls import solve_wls, sandwich

__all__ = [
    "LocalFit",
    "EdgeLimit",
    "LeadingOrderDiagnostics",
    "fit_local_poly",
    "estimate_edge_limit_at_vertex",
    "leading_order_diagnostics",
]


@dataclass(frozen=True, eq=False)
class LocalFit:
    """Coefficients of a local polynomial centred at ``x0``.

    ``beta_hat[s] * s!`` estimates the ``s``-th derivative at ``x0``.
    ``window`` is the visible part of the kernel support in units of
    ``h`` (``(-1, 1)`` away from edge ends).
    """

    beta_hat: np.ndarray
    covariance: np.ndarray
    x0: float
    h: float
    degree: int
    n_effective: int
    window: tuple[float, float]
    condition: float
    interpolates: bool
    edge: object = None

    @property
    def m_hat(self) -> float:
        return float(self.beta_hat[0])

    @property
    def se(self) -> float:
        return math.sqrt(max(float(self.covariance[0, 0]), 0.0))

    def derivative(self, s: int) -> float:
        return math.factorial(s) * float(self.beta_hat[s])


def fit_local_poly(
    bins: BinnedEdge,
    x0: float,
    h: float,
    p: int = 1,
    kernel: Kernel = EPANECHNIKOV,
) -> LocalFit:
    """Weighted least-squares polynomial of degree ``p`` in ``(x_i - x0)``.

    Weights are ``K((x_i - x0) / h) / h``; the covariance is the sandwich
    with plug-in response variances computed from the local fitted values.
    """
    if not h > 0:
        raise ValueError(f"bandwidth must be positive, got {h}")
    if p < 0:
        raise ValueError("degree must be non-negative")
    d = bins.centers - x0
    w_all = kernel(d / h) / h
    keep = w_all > 0
    n_eff = int(keep.sum())
    if n_eff < p + 1:
        raise InsufficientSupportError(
            f"only {n_eff} bins with positive weight around x0={x0:g} (need {p + 1})", n_eff
        )
    d = d[keep]
    w = w_all[keep]
    y = bins.heights[keep]
    X = np.vander(d, p + 1, increasing=True)
    res = solve_wls(X, w, y, scale=h ** np.arange(p + 1))
    fitted = X @ res.beta
    var = plugin_variance(fitted, bins.total, bins.actual_width)
    cov = sandwich(X, w, res.bread, var)
    length = bins.length
    window = (max(-1.0, -x0 / h), min(1.0, (length - x0) / h))
    if n_eff == p + 1:
        warnings.warn(f"local fit at x0={x0:g} interpolates {n_eff} bins", RuntimeWarning, stacklevel=2)
    return LocalFit(
        beta_hat=res.beta,
        covariance=cov,
        x0=float(x0),
        h=float(h),
        degree=p,
        n_effective=n_eff,
        window=window,
        condition=res.condition,
        interpolates=n_eff == p + 1,
        edge=bins.edge,
    )


@dataclass(frozen=True, eq=False)
class EdgeLimit:
    """One-sided estimate at an edge end: value, sandwich variance, diagnostics."""

    edge: object
    end: str
    m_hat: float
    var: float
    asymptotic_var: float
    fit: LocalFit
    short_edge: bool = False


def estimate_edge_limit_at_vertex(
    bins: BinnedEdge,
    end: str,
    h: float,
    kernel: Kernel = EPANECHNIKOV,
    p: int = 1,
) -> EdgeLimit:
    """Limit of the density as the ``end`` ('u' or 'v') vertex is approached.

    Uses only this edge's bins.  With ``p=1`` this is the local linear
    boundary estimate; ``p=2`` is used for slope limits.
    """
    if end not in ("u", "v"):
        raise ValueError("end must be 'u' or 'v'")
    length = bins.length
    short = length < h
    if short:
        warnings.warn(f"edge {bins.edge!r} is shorter than the bandwidth", RuntimeWarning, stacklevel=2)
    x0 = 0.0 if end == "u" else length
    fit = fit_local_poly(bins, x0, h, p, kernel)
    diag = leading_order_diagnostics(fit, bins.total, bins.actual_width, kernel=kernel)
    return EdgeLimit(
        edge=bins.edge,
        end=end,
        m_hat=fit.m_hat,
        var=float(fit.covariance[0, 0]),
        asymptotic_var=diag.variance_leading,
        fit=fit,
        short_edge=short,
    )


@dataclass(frozen=True)
class LeadingOrderDiagnostics:
    """Leading-order bias and variance of a single-edge local linear fit."""

    bias_leading: float | None
    variance_leading: float
    C: float
    Q: float
    bias_factor: float


def leading_order_diagnostics(
    fit: LocalFit,
    N: int,
    omega: float,
    c: float | None = None,
    kernel: Kernel = EPANECHNIKOV,
) -> LeadingOrderDiagnostics:
    """Plug-in leading bias and variance for ``fit``.

    ``c`` is the boundary fraction (window ``(-c, 1)``); by default the
    fit's own visible window is used, which also covers windows truncated
    on both sides.  The bias needs a curvature estimate and is only returned
    for fits of degree two or more.
    """
    lo, hi = (-c, 1.0) if c is not None else fit.window
    bias_factor, q = local_linear_constants(kernel, lo, hi)
    m = fit.m_hat
    C = m / (N * fit.h) - omega * m * m / (N * fit.h)
    bias = None
    if fit.degree >= 2:
        bias = 0.5 * fit.h**2 * bias_factor * fit.derivative(2)
    return LeadingOrderDiagnostics(bias, C * q, C, q, bias_factor)
