"""Uniform order statistics, the special functions they need, and quadrature.

The price quantile a bidder faces in an ``m``-unit auction is the ``m``-th
smallest of the other bidders' uniform quantiles, so every expected revenue
in this package is an integral of a revenue curve against the density

    eta_{m:n}(q) = n * C(n-1, m-1) * (1-q)^(n-m) * q^(m-1).

For ``m > n`` the order statistic does not exist and the price quantile is
the point mass at ``q = 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, NamedTuple, Sequence

import numpy as np

__all__ = [
    "QuadratureConfig",
    "QuadratureResult",
    "QuadratureError",
    "DegenerateOrderStatistic",
    "integrate",
    "log_density",
    "density",
    "density_breakpoints",
    "expect_under",
    "expect_under_full",
    "log_beta",
    "reg_inc_beta",
    "reg_inc_beta_pair",
    "beta_tail_expectation",
    "beta_tail_log_moment",
    "harmonic_diff",
    "single_crossing_quantile",
]

# Gauss-Kronrod 7/15 nodes on [-1, 1] (non-negative half, descending).
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
# 7-point Gauss weights, living on _XGK[1], _XGK[3], _XGK[5], _XGK[7].
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

_ROUNDOFF = 50 * np.finfo(float).eps
_MAX_LIVE_PANELS = 1 << 15

_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])  # 15 nodes, ascending
_KW = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GW = np.zeros(15)
_GW[[1, 3, 5]] = _WG[:3]
_GW[7] = _WG[3]
_GW[[9, 11, 13]] = _WG[2::-1]


@dataclass(frozen=True)
class QuadratureConfig:
    """Error control for the adaptive panel integrator."""

    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    max_depth: int = 60

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("quadrature tolerances must be positive")
        if self.max_depth < 10:
            raise ValueError("max_depth must be at least 10")


DEFAULT_QUADRATURE = QuadratureConfig()


class QuadratureResult(NamedTuple):
    value: float
    error: float
    converged: bool
    panels: int


class QuadratureError(RuntimeError):
    """Raised when adaptive refinement hits ``max_depth`` before meeting tolerance.

    The best available estimate and its error bound are kept on the exception.
    """

    def __init__(self, estimate: float, error: float):
        super().__init__(
            f"quadrature did not converge: estimate {estimate!r}, error bound {error!r}"
        )
        self.estimate = estimate
        self.error = error


class DegenerateOrderStatistic(ValueError):
    """The requested order statistic has no density (``m > n``)."""


def integrate(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    breakpoints: Iterable[float] = (),
    cfg: QuadratureConfig = DEFAULT_QUADRATURE,
    noise: float = 0.0,
) -> QuadratureResult:
    """Adaptive G7/K15 quadrature of a vectorised ``f`` over ``[a, b]``.

    Panels start at the supplied breakpoints and are bisected level by level
    until each panel's Kronrod-Gauss difference is within its width-share of
    the global tolerance, or below the relative evaluation noise of ``f``
    (at least 50 ulps, raised by ``noise``). Accepted panels are summed with
    ``math.fsum`` so the result does not depend on evaluation order.
    """
    if not b > a:
        return QuadratureResult(0.0, 0.0, True, 0)
    cuts = sorted({a, b, *(float(p) for p in breakpoints if a < p < b)})
    lo = np.array(cuts[:-1])
    hi = np.array(cuts[1:])
    width = b - a
    accepted_vals: list[float] = []
    accepted_errs: list[float] = []
    converged = True
    depth = 0
    estimate = None
    while lo.size:
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        x = mid[:, None] + half[:, None] * _NODES[None, :]
        fx = np.asarray(f(x), dtype=float)
        kron = half * (fx @ _KW)
        gauss = half * (fx @ _GW)
        err = np.abs(kron - gauss)
        if not np.all(np.isfinite(kron)):
            raise FloatingPointError("integrand is not finite on [%r, %r]" % (a, b))
        if estimate is None:
            estimate = math.fsum(kron)
        else:
            estimate = math.fsum(accepted_vals) + math.fsum(kron)
        tol = max(cfg.abs_tol, cfg.rel_tol * abs(estimate))
        # differences at the roundoff level of the panel cannot be refined away
        floor = max(_ROUNDOFF, noise) * half * (np.abs(fx) @ _KW)
        ok = (err <= tol * (hi - lo) / width) | (err <= floor)
        if depth >= cfg.max_depth or (~ok).sum() > _MAX_LIVE_PANELS:
            if not np.all(ok):
                converged = False
            ok = np.ones_like(ok)
        accepted_vals.extend(kron[ok].tolist())
        accepted_errs.extend(err[ok].tolist())
        lo, hi, mid = lo[~ok], hi[~ok], mid[~ok]
        lo, hi = np.concatenate([lo, mid]), np.concatenate([mid, hi])
        depth += 1
    value = math.fsum(accepted_vals)
    error = math.fsum(accepted_errs)
    return QuadratureResult(value, error, converged, len(accepted_vals))


def _log_binom(n: int, k: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def log_density(m: int, n: int, q):
    """Log of the density of the ``m``-th smallest of ``n`` uniforms.

    Works for scalars and arrays; ``q`` should lie in ``(0, 1)``.
    """
    if m > n:
        raise DegenerateOrderStatistic(f"order statistic {m} of {n} is a point mass at 1")
    if m < 1:
        raise ValueError("order index must be at least 1")
    q = np.asarray(q, dtype=float)
    const = math.log(n) + _log_binom(n - 1, m - 1)
    with np.errstate(divide="ignore"):
        out = const + (n - m) * np.log1p(-q) if n > m else np.full_like(q, const)
        if m > 1:
            out = out + (m - 1) * np.log(q)
    return out if out.ndim else float(out)


def density(m: int, n: int, q):
    return np.exp(log_density(m, n, q))


def density_breakpoints(m: int, n: int) -> list[float]:
    """Quantiles that bracket the bulk of ``eta_{m:n}``, used to seed panels."""
    if m > n:
        return []
    mean = m / (n + 1)
    sd = math.sqrt(m * (n - m + 1) / ((n + 1) ** 2 * (n + 2)))
    pts = [mean]
    if n > 1:
        pts.append((m - 1) / (n - 1))
    for k in (1, 3, 6, 10, 16):
        pts.extend((mean - k * sd, mean + k * sd))
    return sorted(p for p in pts if 0 < p < 1)


def expect_under_full(
    m: int,
    n: int,
    f: Callable[[np.ndarray], np.ndarray],
    breakpoints: Sequence[float] = (),
    cfg: QuadratureConfig = DEFAULT_QUADRATURE,
) -> QuadratureResult:
    """Like :func:`expect_under` but returns value, error bound and status."""
    if m > n:
        val = float(np.asarray(f(np.array([1.0])), dtype=float)[0])
        if val < 0:
            raise ValueError("integrand must be non-negative")
        return QuadratureResult(val, 0.0, True, 0)
    const = math.log(n) + _log_binom(n - 1, m - 1)

    def integrand(q):
        fq = np.asarray(f(q), dtype=float)
        if np.any(fq < -1e-14):
            raise ValueError("integrand must be non-negative")
        logd = const + (n - m) * np.log1p(-q) + (m - 1) * np.log(q)
        return fq * np.exp(logd)

    pts = list(breakpoints) + density_breakpoints(m, n)
    return integrate(integrand, 0.0, 1.0, pts, cfg)


def expect_under(
    m: int,
    n: int,
    f: Callable[[np.ndarray], np.ndarray],
    breakpoints: Sequence[float] = (),
    cfg: QuadratureConfig = DEFAULT_QUADRATURE,
) -> float:
    """``E[f(q_{m:n})]``: integral of ``f`` against ``eta_{m:n}`` on ``[0, 1]``.

    ``breakpoints`` must contain every kink of ``f``. For ``m > n`` the point
    mass convention gives ``f(1)``. Raises :class:`QuadratureError` (carrying
    the best estimate) if refinement stops at ``cfg.max_depth``.
    """
    res = expect_under_full(m, n, f, breakpoints, cfg)
    if not res.converged:
        raise QuadratureError(res.value, res.error)
    return res.value


# ---------------------------------------------------------------- special functions

_HALF_LOG_2PI = 0.5 * math.log(2 * math.pi)


def _stirling_delta(z: float) -> float:
    """``lgamma(z) - [(z - 1/2) ln z - z + ln(2 pi)/2]``."""
    if z >= 8:
        r = 1.0 / z
        r2 = r * r
        return r * (1 / 12 + r2 * (-1 / 360 + r2 * (1 / 1260 + r2 * (
            -1 / 1680 + r2 * (1 / 1188 + r2 * (-691 / 360360 + r2 / 156))))))
    return math.lgamma(z) - ((z - 0.5) * math.log(z) - z + _HALF_LOG_2PI)


def _rlog1(x: float) -> float:
    """``x - ln(1 + x)`` without cancellation for small ``|x|``."""
    if abs(x) > 0.25:
        return x - math.log1p(x)
    w = x / (2.0 + x)
    w2 = w * w
    # ln(1+x) = 2 atanh(w) and x - 2w = w x
    s, term, k = 0.0, w * w2, 3
    while True:
        add = term / k
        s += add
        if abs(add) <= 1e-17 * abs(s):
            break
        term *= w2
        k += 2
    return w * x - 2.0 * s


def log_beta(a: float, b: float) -> float:
    """``ln B(a, b)`` with Stirling-series bookkeeping for large arguments."""
    if a <= 0 or b <= 0:
        raise ValueError("beta parameters must be positive")
    lo, hi = min(a, b), max(a, b)
    if lo >= 8:
        corr = _stirling_delta(lo) + _stirling_delta(hi) - _stirling_delta(lo + hi)
        s = lo + hi
        return (_HALF_LOG_2PI - 0.5 * math.log(hi) + (lo - 0.5) * math.log(lo / s)
                + hi * math.log1p(-lo / s) + corr)
    if hi >= 8:
        # lgamma(hi) - lgamma(lo + hi) without subtracting two large numbers
        diff = (-(hi - 0.5) * math.log1p(lo / hi) - lo * math.log(lo + hi) + lo
                + _stirling_delta(hi) - _stirling_delta(lo + hi))
        return math.lgamma(lo) + diff
    return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)


def _prefactor(a: float, b: float, x: float, y: float) -> float:
    """``x^a y^b / B(a, b)`` with ``y = 1 - x`` supplied exactly."""
    if min(a, b) >= 8:
        s = a + b
        lam = a - s * x if x <= 0.5 else s * y - b
        corr = _stirling_delta(a) + _stirling_delta(b) - _stirling_delta(s)
        root = math.sqrt(a * b / (2 * math.pi * s))
        if abs(lam) > 0.5 * min(a, b):
            # far from the mean lam / a cancels; the plain logs do not
            return root * math.exp(a * math.log(x * s / a) + b * math.log(y * s / b) - corr)
        u = _rlog1(-lam / a)
        v = _rlog1(lam / b)
        return root * math.exp(-(a * u + b * v) - corr)
    return math.exp(a * math.log(x) + b * math.log(y) - log_beta(a, b))


_FPMIN = 1e-300


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, 20000):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 3e-16:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction failed for a={a}, b={b}, x={x}")


def reg_inc_beta_pair(a: float, b: float, x: float) -> tuple[float, float]:
    """``(I_x(a, b), 1 - I_x(a, b))``, each computed without cancellation.

    The continued fraction is evaluated on whichever side of
    ``x = (a + 1) / (a + b + 2)`` converges fast; the other member of the pair
    is then its complement, which is never the small one.
    """
    if a <= 0 or b <= 0:
        raise ValueError("beta parameters must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0:
        return 0.0, 1.0
    if x == 1.0:
        return 1.0, 0.0
    y = 1.0 - x
    if x < (a + 1.0) / (a + b + 2.0):
        lower = _prefactor(a, b, x, y) * _betacf(a, b, x) / a
        return lower, 1.0 - lower
    upper = _prefactor(b, a, y, x) * _betacf(b, a, y) / b
    return 1.0 - upper, upper


def reg_inc_beta(a: float, b: float, x: float) -> float:
    """Regularised incomplete beta function ``I_x(a, b)``."""
    return reg_inc_beta_pair(a, b, x)[0]


def beta_tail_expectation(
    a: float, b: float, x: float,
    g: Callable[[np.ndarray, np.ndarray], np.ndarray],
    cfg: QuadratureConfig | None = None,
) -> float:
    """``E[g(X, 1 - X) ; X >= x]`` for ``X ~ Beta(a, b)``.

    ``g`` receives both ``u`` and ``w = 1 - u`` so it can stay accurate at
    either end. When ``x >= 1/2`` the integral is taken in ``w`` on
    ``[0, 1 - x]``, which keeps full relative precision for tails that start
    a hair below 1. The density is kept in log space and panels are seeded
    around the mode, so sharply peaked densities are resolved.
    """
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x >= 1.0:
        return 0.0
    if cfg is None:
        cfg = QuadratureConfig(abs_tol=1e-250, rel_tol=1e-13)
    # the log-density peak on [x, 1] is factored out so deep tails stay O(1)
    # inside the integrator instead of drifting into subnormal numbers
    shift = -log_beta(a, b)
    if a >= 1 and b > 1:
        peak = max((a - 1) / (a + b - 2), x)
        shift += (a - 1) * math.log(peak) + (b - 1) * math.log1p(-peak)
    lb = log_beta(a, b) + shift

    def weight(u, w, log_u, log_w):
        return g(u, w) * np.exp((a - 1) * log_u + (b - 1) * log_w - lb)

    def in_w(w):
        with np.errstate(divide="ignore"):
            return weight(1.0 - w, w, np.log1p(-w), np.log(w))

    def in_u(u):
        with np.errstate(divide="ignore"):
            return weight(u, 1.0 - u, np.log(u), np.log1p(-u))

    mean = a / (a + b)
    sd = math.sqrt(a * b / ((a + b) ** 2 * (a + b + 1)))
    pts = [mean]
    if a > 1 and b > 1:
        pts.append((a - 1) / (a + b - 2))
    for k in (1, 3, 6, 10, 16):
        pts.extend((mean - k * sd, mean + k * sd))
    # exponents of size |lb| + a + b carry that many ulps of absolute error
    noise = 8 * np.finfo(float).eps * (abs(lb) + a + b)
    if x >= 0.5:
        y = 1.0 - x  # exact
        res = integrate(in_w, 0.0, y, [1.0 - p for p in pts], cfg, noise)
    else:
        res = integrate(in_u, x, 1.0, pts, cfg, noise)
    scale = math.exp(shift)
    if not res.converged:
        raise QuadratureError(res.value * scale, res.error * scale)
    return res.value * scale


def _neg_log(u, w):
    return np.where(u < 0.5, -np.log(u), -np.log1p(-w))


def beta_tail_log_moment(
    a: float, b: float, x: float, cfg: QuadratureConfig | None = None
) -> float:
    """``E[-ln X ; X >= x]`` for ``X ~ Beta(a, b)``."""
    return beta_tail_expectation(a, b, x, _neg_log, cfg)


def harmonic_diff(n: int, t: int) -> float:
    """``H_{n+t} - H_n``, summed from the smallest term upward."""
    if n < 1 or t < 0:
        raise ValueError("need n >= 1 and t >= 0")
    return math.fsum(1.0 / j for j in range(n + t, n, -1))


def single_crossing_quantile(m: int, n: int, k: int, gamma: float) -> float:
    """Where ``(n+k) eta_{m:n+k-1}`` drops below ``gamma * n * eta_{m:n-1}``.

    Needs ``1 <= m <= n - 1`` and ``k >= 1``. The weighted difference of the
    two densities is positive on ``[0, q')`` and negative on ``(q', 1]``.
    """
    if not (1 <= m <= n - 1 and k >= 1 and 0 < gamma <= 1):
        raise ValueError("need 1 <= m <= n-1, k >= 1 and gamma in (0, 1]")
    # (1-q)^k = c2 / c1 after cancelling the shared factor (1-q)^(n-1-m) q^(m-1)
    log_c1 = (math.log(n + k) - math.log(gamma * n) + math.log(n + k - 1)
              + _log_binom(n + k - 2, m - 1))
    log_c2 = math.log(n - 1) + _log_binom(n - 2, m - 1)
    ratio = log_c2 - log_c1
    if ratio >= 0:
        return 0.0
    return -math.expm1(ratio / k)
