"""Compact symmetric kernels and their (truncated) moments.

Every kernel here is a polynomial in ``|u|`` on ``(-1, 1)``, so moments over
any sub-interval have closed forms.  :func:`moment_quad` gives an
independent quadrature route used to cross-check them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial import Polynomial
from scipy import integrate

from .errors import DegenerateMomentsError

__all__ = [
    "Kernel",
    "MomentTable",
    "EPANECHNIKOV",
    "BIWEIGHT",
    "TRIWEIGHT",
    "TRIANGULAR",
    "KERNELS",
    "get_kernel",
    "kernel_eval",
    "moment",
    "moment_quad",
    "truncated_moments",
    "q_constant",
    "local_linear_constants",
]


@dataclass(frozen=True)
class Kernel:
    """Symmetric kernel ``K(u) = P(|u|)`` on ``(-1, 1)``, zero elsewhere.

    ``coef`` holds the coefficients of ``P`` in increasing degree.
    """

    name: str
    coef: tuple[float, ...]
    _poly: Polynomial = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_poly", Polynomial(self.coef))

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        a = np.abs(u)
        out = np.where(a < 1.0, self._poly(a), 0.0)
        return out if out.ndim else float(out)

    @property
    def poly(self) -> Polynomial:
        return self._poly

    def derivative_bound(self) -> float:
        """Sup of ``|K'|`` on the support (finite for all polynomial kernels)."""
        grid = np.linspace(0.0, 1.0, 2001)
        return float(np.max(np.abs(self._poly.deriv()(grid))))


EPANECHNIKOV = Kernel("epanechnikov", (0.75, 0.0, -0.75))
BIWEIGHT = Kernel("biweight", (15 / 16, 0.0, -30 / 16, 0.0, 15 / 16))
TRIWEIGHT = Kernel("triweight", (35 / 32, 0.0, -105 / 32, 0.0, 105 / 32, 0.0, -35 / 32))
TRIANGULAR = Kernel("triangular", (1.0, -1.0))

KERNELS = {k.name: k for k in (EPANECHNIKOV, BIWEIGHT, TRIWEIGHT, TRIANGULAR)}


def get_kernel(name: str | Kernel) -> Kernel:
    if isinstance(name, Kernel):
        return name
    try:
        return KERNELS[name.lower()]
    except KeyError:
        raise ValueError(
            f"unknown kernel {name!r}; choose from {sorted(KERNELS)}"
        ) from None


def kernel_eval(k: Kernel, u):
    """Evaluate ``K(u)``; zero for ``|u| >= 1``."""
    return k(u)


def _half_integral(poly: Polynomial, p: int, a: float, b: float) -> float:
    # int_a^b w^p poly(w) dw for 0 <= a <= b <= 1
    if b <= a:
        return 0.0
    integrand = Polynomial([0.0] * p + [1.0]) * poly
    anti = integrand.integ()
    return float(anti(b) - anti(a))


def moment(k: Kernel, p: int, lo: float = -1.0, hi: float = 1.0, squared: bool = False) -> float:
    """Closed-form ``int_lo^hi u^p K(u)^s du`` with ``s = 2`` if ``squared``.

    Limits are clipped to the support ``[-1, 1]``.
    """
    lo = max(-1.0, float(lo))
    hi = min(1.0, float(hi))
    if hi <= lo:
        return 0.0
    poly = k.poly * k.poly if squared else k.poly
    total = 0.0
    if hi > 0.0:
        total += _half_integral(poly, p, max(lo, 0.0), hi)
    if lo < 0.0:
        # u = -w on the negative half
        total += (-1.0) ** p * _half_integral(poly, p, max(-hi, 0.0), -lo)
    return total


def moment_quad(k: Kernel, p: int, lo: float = -1.0, hi: float = 1.0, squared: bool = False) -> float:
    """Same integral as :func:`moment` by adaptive quadrature (abs tol 1e-10)."""
    lo = max(-1.0, float(lo))
    hi = min(1.0, float(hi))
    if hi <= lo:
        return 0.0
    power = 2 if squared else 1
    points = [0.0] if lo < 0.0 < hi else None
    val, _ = integrate.quad(
        lambda u: u**p * k(u) ** power, lo, hi, epsabs=1e-10, epsrel=1e-12, points=points, limit=200
    )
    return float(val)


@dataclass(frozen=True)
class MomentTable:
    """Full-support and truncated kernel moments at boundary fraction ``c``.

    ``sigma[i]`` = int u^i K, ``R[i]`` = int u^i K^2 over (-1, 1);
    ``mu[p]`` and ``Rc[p]`` are the same integrals over ``(-c, 1)``.
    """

    kernel: str
    c: float
    sigma: tuple[float, ...]
    R: tuple[float, ...]
    mu: tuple[float, ...]
    Rc: tuple[float, ...]


@lru_cache(maxsize=4096)
def _truncated_cached(name: str, c: float, pmax: int) -> MomentTable:
    k = KERNELS[name]
    sigma = tuple(moment(k, i) for i in range(4))
    R = tuple(moment(k, i, squared=True) for i in range(3))
    mu = tuple(moment(k, i, -c, 1.0) for i in range(pmax + 1))
    Rc = tuple(moment(k, i, -c, 1.0, squared=True) for i in range(pmax + 1))
    return MomentTable(name, c, sigma, R, mu, Rc)


def truncated_moments(k: Kernel, c: float, pmax: int = 3) -> MomentTable:
    """Moments visible from a point at distance ``c*h`` from a boundary."""
    if not 0.0 <= c <= 1.0:
        raise ValueError(f"boundary fraction must lie in [0, 1], got {c}")
    if k.name in KERNELS and KERNELS[k.name] == k:
        return _truncated_cached(k.name, round(float(c), 12), pmax)
    sigma = tuple(moment(k, i) for i in range(4))
    R = tuple(moment(k, i, squared=True) for i in range(3))
    mu = tuple(moment(k, i, -c, 1.0) for i in range(pmax + 1))
    Rc = tuple(moment(k, i, -c, 1.0, squared=True) for i in range(pmax + 1))
    return MomentTable(k.name, c, sigma, R, mu, Rc)


def local_linear_constants(k: Kernel, lo: float = -1.0, hi: float = 1.0) -> tuple[float, float]:
    """Leading bias factor and variance constant of a local linear fit.

    The visible kernel window is ``[lo, hi]``.  Returns ``(B, Q)`` where the
    leading bias is ``0.5 h^2 B m''(x)`` and the leading variance is
    ``C(N, h, w, x) Q``.  With ``mu_i`` the window moments and ``r_i`` the
    squared-kernel moments::

        B = (mu2^2 - mu1 mu3) / (mu0 mu2 - mu1^2)
        Q = (r0 mu2^2 - 2 r1 mu1 mu2 + r2 mu1^2) / (mu0 mu2 - mu1^2)^2
    """
    m0, m1, m2, m3 = (moment(k, i, lo, hi) for i in range(4))
    r0, r1, r2 = (moment(k, i, lo, hi, squared=True) for i in range(3))
    det = m0 * m2 - m1 * m1
    if det <= 1e-14:
        raise DegenerateMomentsError(
            f"kernel window [{lo:g}, {hi:g}] gives a singular local design (det={det:.3e})"
        )
    bias = (m2 * m2 - m1 * m3) / det
    q = (r0 * m2 * m2 - 2.0 * r1 * m1 * m2 + r2 * m1 * m1) / det**2
    return bias, q


def q_constant(k: Kernel, c: float) -> float:
    """Variance constant ``Q_K`` at boundary fraction ``c`` (``c = 1``: interior)."""
    if not 0.0 <= c <= 1.0:
        raise ValueError(f"boundary fraction must lie in [0, 1], got {c}")
    return local_linear_constants(k, -c, 1.0)[1]
