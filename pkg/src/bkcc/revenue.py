"""Expected revenue of VCG, the Bayesian-optimal auction and supply-limited VCG.

All three are integrals of the revenue curve against a uniform
order-statistic density (see :mod:`bkcc.orderstat`):

    RevVCG_{m:N} = N * E[R(q_{m:N-1})]
    RevOPT_{m:n} = n * E[R(min(q_{m:n-1}, q*))]

For the truncated generalized Pareto family the integrals reduce to
regularized incomplete beta functions, which is what the competition
complexity search evaluates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .dist import RevenueCurve, TGPDCurve, TruncatedGPD, expm1_over
from .orderstat import (
    DEFAULT_QUADRATURE,
    QuadratureConfig,
    beta_tail_expectation,
    beta_tail_log_moment,
    expect_under,
    log_beta,
    reg_inc_beta_pair,
)

__all__ = [
    "MarketSpec",
    "BetaTailStats",
    "SingularDerivative",
    "rev_vcg",
    "rev_opt",
    "rev_sl_vcg",
    "rev_vcg_tgpd_closed",
    "rev_opt_tgpd_closed",
    "beta_tail_stats",
    "dlog_rev_vcg_dqstar",
    "fd_dlog_rev_vcg",
]

CurveLike = Union[RevenueCurve, TruncatedGPD]

# Below this lambda the closed form loses digits to cancellation; the tail
# term is integrated directly instead.
_SMALL_LAMBDA = 1e-3


@dataclass(frozen=True)
class MarketSpec:
    """``m`` units, ``n`` original buyers, ``k`` added buyers, optional supply ``s``."""

    m: int
    n: int
    k: int = 0
    s: Optional[int] = None

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("need at least one unit")
        if self.n < self.m:
            raise ValueError("need at least as many buyers as units")
        if self.k < 0:
            raise ValueError("added buyers must be non-negative")
        if self.s is not None and not 1 <= self.s <= self.m:
            raise ValueError("supply must lie in [1, m]")

    @property
    def total_buyers(self) -> int:
        return self.n + self.k

    @property
    def supply(self) -> int:
        return self.m if self.s is None else self.s


@dataclass(frozen=True)
class BetaTailStats:
    """Tail mass and truncated log-moment of ``X ~ Beta(n+1, t)`` above ``q*``."""

    p_plus: float
    h: float


class SingularDerivative(ArithmeticError):
    """The log-derivative denominator vanishes."""


def _curve(c: CurveLike) -> RevenueCurve:
    return c.curve() if isinstance(c, TruncatedGPD) else c


def _breaks(curve: RevenueCurve) -> list[float]:
    pts = list(curve.kinks)
    q = curve.monopoly_quantile
    if 0.0 < q < 1.0:
        pts.append(q)
    return pts


def rev_vcg(curve: CurveLike, m: int, N: int,
            cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """Expected VCG revenue selling ``m`` units to ``N`` buyers, by quadrature."""
    if m < 1 or N < 1:
        raise ValueError("need m >= 1 and N >= 1")
    c = _curve(curve)
    return N * expect_under(m, N - 1, c.eval, _breaks(c), cfg)


def rev_opt(curve: CurveLike, m: int, n: int,
            cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """Bayesian-optimal revenue (VCG with monopoly reserve), by quadrature."""
    if not 1 <= m <= n:
        raise ValueError("need 1 <= m <= n")
    c = _curve(curve)
    q_star = c.monopoly_quantile
    r_star = c.monopoly_revenue

    def capped(q):
        q = np.asarray(q, dtype=float)
        return np.where(q <= q_star, c.eval(np.minimum(q, q_star)), r_star)

    return n * expect_under(m, n - 1, capped, _breaks(c), cfg)


def rev_sl_vcg(curve: CurveLike, s: int, N: int,
               cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """Revenue of VCG restricted to selling ``s`` units."""
    if not 1 <= s <= N - 1:
        raise ValueError("need 1 <= s <= N - 1")
    return rev_vcg(curve, s, N, cfg)


def _tail_quadrature(lam: float, q_star: float, m: int, N: int) -> float:
    """``E[q (q^-lam - 1) / lam ; q > q*]`` under ``Beta(m, N-m)``, integrated directly."""

    def g(u, w):
        log_u = np.where(u < 0.5, np.log(u), np.log1p(-w))
        return u * expm1_over(lam, -log_u)

    return beta_tail_expectation(m, N - m, q_star, g)


def _vcg_tgpd(lam: float, r: float, m: int, N: int) -> float:
    if m >= N:
        return float(N) if r == 1.0 else 0.0
    if r == 1.0:
        return float(m)
    q_star = 1.0 / r
    below, above = reg_inc_beta_pair(m + 1, N - m, q_star)
    head = r * m * below
    log_r = math.log(r)
    if lam == 0.0:
        h = beta_tail_log_moment(m + 1, N - m, q_star)
        return head + m * (r / log_r) * h
    if lam < _SMALL_LAMBDA:
        scale = r / float(expm1_over(lam, log_r))
        return head + N * scale * _tail_quadrature(lam, q_star, m, N)
    ratio = math.exp(log_beta(m + 1 - lam, N - m) - log_beta(m, N - m))
    shifted_above = reg_inc_beta_pair(m + 1 - lam, N - m, q_star)[1]
    scale = r / math.expm1(lam * log_r)
    return head + N * scale * (ratio * shifted_above - (m / N) * above)


def _opt_tgpd(r: float, m: int, n: int) -> float:
    if m >= n:
        return float(n)
    if r == 1.0:
        return float(m)
    q_star = 1.0 / r
    below = reg_inc_beta_pair(m + 1, n - m, q_star)[0]
    above = reg_inc_beta_pair(m, n - m, q_star)[1]
    return m * r * below + n * above


def _check_tgpd(lam: float, r: float) -> None:
    TruncatedGPD(lam, r)


def rev_vcg_tgpd_closed(lam: float, r: float, m: int, N: int) -> float:
    """VCG revenue on ``TGPD(lam, r)`` via incomplete beta functions; ``1 <= m <= N-1``."""
    _check_tgpd(lam, r)
    if not 1 <= m <= N - 1:
        raise ValueError("need 1 <= m <= N - 1")
    return _vcg_tgpd(float(lam), float(r), m, N)


def rev_opt_tgpd_closed(lam: float, r: float, m: int, n: int) -> float:
    """Optimal revenue on ``TGPD(lam, r)``; does not depend on ``lam``."""
    _check_tgpd(lam, r)
    if not 1 <= m <= n:
        raise ValueError("need 1 <= m <= n")
    return _opt_tgpd(float(r), m, n)


def beta_tail_stats(n: int, t: int, q_star: float) -> BetaTailStats:
    if not 0.0 < q_star < 1.0:
        raise ValueError("q* must lie in (0, 1)")
    if n < 1 or t < 1:
        raise ValueError("need n >= 1 and t >= 1")
    p_plus = reg_inc_beta_pair(n + 1, t, q_star)[1]
    return BetaTailStats(p_plus, beta_tail_log_moment(n + 1, t, q_star))


def dlog_rev_vcg_dqstar(n: int, t: int, q_star: float) -> float:
    """``d ln RevVCG_{n:n+t} / d q*`` on the truncated exponential with ``r = 1/q*``.

    With ``l = ln q*``, ``c = 1 - p_plus`` and the tail log-moment ``h``, the
    derivative ``-1/q* + h / (q* l^2 (c - h/l))`` is evaluated as
    ``(h (1 + l) - l^2 c) / (q* D)`` with ``D = l^2 c - l h``, so nothing
    cancels when ``p_plus`` is close to 1 (large ``n``). Raises
    :class:`SingularDerivative` when ``|D|`` is below 1e-14.
    """
    if not 0.0 < q_star < 1.0:
        raise ValueError("q* must lie in (0, 1)")
    if n < 1 or t < 1:
        raise ValueError("need n >= 1 and t >= 1")
    c = reg_inc_beta_pair(n + 1, t, q_star)[0]
    h = beta_tail_log_moment(n + 1, t, q_star)
    log_q = math.log(q_star)
    denom = log_q * log_q * c - log_q * h
    if abs(denom) < 1e-14:
        raise SingularDerivative(f"denominator {denom!r} at q* = {q_star!r}")
    return (h * (1.0 + log_q) - log_q * log_q * c) / (q_star * denom)


def fd_dlog_rev_vcg(lam: float, m: int, N: int, q_star: float, step: float = 1e-5) -> float:
    """Central-difference ``d ln RevVCG_{m:N} / d q*`` on ``TGPD(lam, 1/q*)``."""
    lo, hi = q_star - step, q_star + step
    if lo <= 0 or hi > 1:
        raise ValueError("step leaves the legal quantile range")
    if not 1 <= m <= N - 1:
        raise ValueError("need 1 <= m <= N - 1")
    # r = 1/q* may step just past r_max, where the formula is still well defined
    f = lambda q: math.log(_vcg_tgpd(float(lam), 1.0 / q, m, N))
    return (f(hi) - f(lo)) / (2 * step)
