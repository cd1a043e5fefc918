"""Small dense weighted least-squares solves with sandwich covariance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import SingularDesignError

__all__ = ["WLSResult", "solve_wls", "sandwich"]

COND_LIMIT = 1e10


@dataclass(frozen=True)
class WLSResult:
    beta: np.ndarray
    bread: np.ndarray  # (X'WX)^{-1}
    condition: float
    method: str


def solve_wls(X, w, y, scale=None) -> WLSResult:
    """Minimise ``sum w_i (y_i - X_i beta)^2``.

    ``scale`` divides the columns before solving (e.g. powers of the
    bandwidth) to keep the normal matrix well conditioned; the returned
    coefficients are in the original units.  Cholesky on the normal matrix
    is used unless its condition number exceeds 1e10, in which case a QR of
    ``sqrt(W) X`` takes over.
    """
    X = np.asarray(X, dtype=float)
    w = np.asarray(w, dtype=float)
    y = np.asarray(y, dtype=float)
    p = X.shape[1]
    scale = np.ones(p) if scale is None else np.asarray(scale, dtype=float)
    Xs = X / scale
    A = Xs.T @ (w[:, None] * Xs)
    b = Xs.T @ (w * y)
    cond = float(np.linalg.cond(A)) if p else 1.0
    method = "cholesky"
    if np.isfinite(cond) and cond <= COND_LIMIT:
        try:
            cf = linalg.cho_factor(A, check_finite=False)
            beta_s = linalg.cho_solve(cf, b, check_finite=False)
            inv_s = linalg.cho_solve(cf, np.eye(p), check_finite=False)
        except linalg.LinAlgError:
            method = "qr"
    else:
        method = "qr"
    if method == "qr":
        sw = np.sqrt(w)
        Q, R = np.linalg.qr(sw[:, None] * Xs)
        diag = np.abs(np.diag(R))
        if diag.size == 0 or diag.min() <= 1e-12 * max(diag.max(), 1.0):
            raise SingularDesignError(
                f"weighted design is singular (condition number {cond:.3e})", cond
            )
        beta_s = linalg.solve_triangular(R, Q.T @ (sw * y))
        Rinv = linalg.solve_triangular(R, np.eye(p))
        inv_s = Rinv @ Rinv.T
    beta = beta_s / scale
    bread = inv_s / np.outer(scale, scale)
    return WLSResult(beta, bread, cond, method)


def sandwich(X, w, bread, var) -> np.ndarray:
    """``bread (X' W V W X) bread`` for diagonal response variance ``var``."""
    X = np.asarray(X, dtype=float)
    wx = np.asarray(w, dtype=float)[:, None] * X
    meat = wx.T @ (np.asarray(var, dtype=float)[:, None] * wx)
    cov = bread @ meat @ bread
    return 0.5 * (cov + cov.T)
