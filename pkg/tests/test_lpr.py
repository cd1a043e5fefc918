import math
import warnings

import numpy as np
import pytest

from netdens.binning import BinnedEdge, bin_events, plugin_variance
from netdens.errors import InsufficientSupportError
from netdens.kernels import EPANECHNIKOV, local_linear_constants
from netdens.lpr import estimate_edge_limit_at_vertex, fit_local_poly, leading_order_diagnostics
from netdens.network import build_network


def make_edge(heights, width=0.05, total=1000, edge="e"):
    heights = np.asarray(heights, dtype=float)
    n = heights.size
    centers = (np.arange(n) + 0.5) * width
    counts = np.rint(heights * total * width).astype(np.int64)
    return BinnedEdge(edge, centers, counts, heights, width, total)


def brute_force_wls(centers, heights, x0, h, p, width, total):
    """Normal equations summed term by term, no vectorised helpers."""
    k = p + 1
    A = [[0.0] * k for _ in range(k)]
    b = [0.0] * k
    rows = []
    for c, y in zip(centers, heights):
        u = (c - x0) / h
        w = 0.75 * (1 - u * u) / h if abs(u) < 1 else 0.0
        if w == 0.0:
            continue
        x = [(c - x0) ** j for j in range(k)]
        rows.append((x, w))
        for i in range(k):
            b[i] += w * x[i] * y
            for j in range(k):
                A[i][j] += w * x[i] * x[j]
    beta = np.linalg.solve(np.array(A), np.array(b))
    Ainv = np.linalg.inv(np.array(A))
    meat = np.zeros((k, k))
    for x, w in rows:
        fitted = sum(beta[j] * x[j] for j in range(k))
        v = max(fitted / (total * width) - fitted**2 / total, 1e-12)
        meat += w * w * v * np.outer(x, x)
    return beta, Ainv @ meat @ Ainv


@pytest.mark.filterwarnings("ignore:local fit")
@pytest.mark.parametrize("h", [0.025, 0.13, 0.3, 0.9])
def test_linear_heights_are_reproduced(h):
    b = make_edge(np.zeros(100), width=0.01)
    b = make_edge(0.4 + 1.7 * b.centers, width=0.01)
    for x0 in np.linspace(0, b.length, 23):
        fit = fit_local_poly(b, x0, h, 1)
        assert fit.m_hat == pytest.approx(0.4 + 1.7 * x0, abs=1e-10)
        assert fit.derivative(1) == pytest.approx(1.7, abs=1e-9)


@pytest.mark.parametrize("p", [0, 1, 2])
def test_constant_heights(p):
    b = make_edge(np.full(30, 2.5))
    for x0 in (0.0, 0.31, 1.5):
        assert fit_local_poly(b, x0, 0.2, p).m_hat == pytest.approx(2.5, abs=1e-10)


def test_matches_brute_force_normal_equations(rng):
    for _ in range(40):
        n = int(rng.integers(6, 31))
        heights = rng.gamma(2.0, 1.0, n)
        b = make_edge(heights)
        p = int(rng.integers(0, 3))
        x0 = float(rng.uniform(0, b.length))
        h = float(rng.uniform(4, 12)) * b.actual_width
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            fit = fit_local_poly(b, x0, h, p)
        beta, cov = brute_force_wls(b.centers, heights, x0, h, p, b.actual_width, b.total)
        np.testing.assert_allclose(fit.beta_hat, beta, rtol=1e-10, atol=1e-10)
        np.testing.assert_allclose(fit.covariance, cov, rtol=1e-8, atol=1e-12)


def test_covariance_symmetric_psd(rng):
    b = make_edge(rng.gamma(2.0, 1.0, 25))
    fit = fit_local_poly(b, 0.4, 0.3, 2)
    np.testing.assert_allclose(fit.covariance, fit.covariance.T, atol=1e-15)
    assert np.linalg.eigvalsh(fit.covariance).min() > -1e-15


def test_scale_equivariance(rng):
    heights = rng.gamma(2.0, 1.0, 25)
    f1 = fit_local_poly(make_edge(heights), 0.5, 0.3, 1)
    f2 = fit_local_poly(make_edge(2.0 * heights), 0.5, 0.3, 1)
    np.testing.assert_array_equal(f2.beta_hat, 2.0 * f1.beta_hat)
    f3 = fit_local_poly(make_edge(3.7 * heights), 0.5, 0.3, 1)
    np.testing.assert_allclose(f3.beta_hat, 3.7 * f1.beta_hat, rtol=1e-13)


def test_bins_outside_window_do_not_matter(rng):
    heights = rng.gamma(2.0, 1.0, 40)
    b1 = make_edge(heights)
    far = np.abs(b1.centers - 0.5) >= 0.3
    moved = heights.copy()
    moved[far] = rng.gamma(2.0, 1.0, far.sum())
    f1 = fit_local_poly(b1, 0.5, 0.3, 1)
    f2 = fit_local_poly(make_edge(moved), 0.5, 0.3, 1)
    np.testing.assert_array_equal(f1.beta_hat, f2.beta_hat)


def test_insufficient_support():
    b = make_edge(np.ones(20))
    with pytest.raises(InsufficientSupportError) as info:
        fit_local_poly(b, 0.0, 0.04, 1)  # sees only the first bin
    assert info.value.n_effective == 1
    with pytest.warns(RuntimeWarning, match="interpolates"):
        fit = fit_local_poly(b, 0.0, 0.08, 1)
    assert fit.interpolates


def test_linear_density_recovered_at_vertex():
    b = make_edge(np.zeros(20))
    b = make_edge(3.0 - 2.0 * b.centers)
    for end, val in (("u", 3.0), ("v", 1.0)):
        lim = estimate_edge_limit_at_vertex(b, end, 0.25)
        assert lim.m_hat == pytest.approx(val, abs=1e-10)
        assert lim.var > 0 and lim.asymptotic_var > 0


def test_short_edge_warns():
    b = make_edge(np.ones(10), width=0.05)
    with pytest.warns(RuntimeWarning, match="shorter"):
        assert estimate_edge_limit_at_vertex(b, "u", 0.6).short_edge


def test_uniform_boundary_estimate_within_mc_error():
    net = build_network([(0, (0, 0)), (1, (1, 0))], [("e", 0, 1, 1.0)])
    rng = np.random.default_rng(5)
    b = bin_events(net, {"e": rng.random(1000)}, 0.01)
    lim = estimate_edge_limit_at_vertex(b["e"], "u", 0.2)
    assert abs(lim.m_hat - 1.0) < 3 * math.sqrt(lim.var)


def test_interior_bias_uses_second_moment():
    b = make_edge(np.zeros(40))
    b = make_edge(1.0 + 0.5 * (b.centers - 1.0) ** 2)
    fit = fit_local_poly(b, 1.0, 0.4, 2)
    d = leading_order_diagnostics(fit, b.total, b.actual_width)
    assert fit.window == (-1.0, 1.0)
    assert d.bias_factor == pytest.approx(0.2, abs=1e-14)  # sigma_2 of Epanechnikov
    assert d.bias_leading == pytest.approx(0.5 * 0.16 * 0.2 * 1.0, rel=1e-8)


def test_linear_truth_has_no_leading_bias():
    b = make_edge(np.zeros(40))
    b = make_edge(1.0 + 0.5 * b.centers)
    d = leading_order_diagnostics(fit_local_poly(b, 0.0, 0.4, 2), b.total, b.actual_width)
    assert d.bias_leading == pytest.approx(0.0, abs=1e-9)
    assert leading_order_diagnostics(fit_local_poly(b, 0.0, 0.4, 1), 1000, 0.05).bias_leading is None


def test_boundary_fraction_override():
    b = make_edge(np.ones(40))
    fit = fit_local_poly(b, 0.0, 0.4, 1)
    d = leading_order_diagnostics(fit, 1000, 0.05, c=0.0)
    assert d.Q == pytest.approx(local_linear_constants(EPANECHNIKOV, 0.0, 1.0)[1])
    assert d.variance_leading == pytest.approx((1 / 400 - 0.05 / 400) * d.Q, rel=1e-10)


@pytest.mark.parametrize("x0", [0.0, 0.5])
def test_leading_variance_matches_monte_carlo(x0):
    net = build_network([(0, (0, 0)), (1, (1, 0))], [("e", 0, 1, 1.0)])
    rng = np.random.default_rng(17)
    # small h so that the O(1/N) term left out of the leading order is minor
    N, h, w = 2000, 0.05, 0.0025
    est = []
    for _ in range(500):
        b = bin_events(net, {"e": rng.random(N)}, w)["e"]
        est.append(fit_local_poly(b, x0, h, 1).m_hat)
    b = bin_events(net, {"e": rng.random(N)}, w)["e"]
    pred = leading_order_diagnostics(fit_local_poly(b, x0, h, 1), N, w).variance_leading
    mc = np.var(est, ddof=1)
    assert abs(pred / mc - 1) < 0.25


def test_plugin_variance_consistent_with_sandwich():
    b = make_edge(np.full(40, 1.0), width=0.025)
    fit = fit_local_poly(b, 0.5, 0.2, 1)
    var = plugin_variance(np.ones(1), b.total, b.actual_width)[0]
    # interior constant fit: sandwich ~ var * sum(w^2) / (sum w)^2
    w = EPANECHNIKOV((b.centers - 0.5) / 0.2) / 0.2
    assert fit.covariance[0, 0] == pytest.approx(var * np.sum(w**2) / np.sum(w) ** 2, rel=0.02)
