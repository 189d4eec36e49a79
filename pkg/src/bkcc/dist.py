"""Value distributions described through their revenue curves.

A revenue curve ``R(q) = q * F^{-1}(1 - q)`` is the expected revenue of a
posted price that sells with probability ``q``. Everything downstream works in
quantile space, so the distributions here expose ``R`` plus the pieces needed
for sampling and for checking stochastic dominance.

The worst-case family is the truncated lambda-generalized Pareto
distribution ``TGPD(lam, r)``: it has revenue curve ``R(q) = r q`` up to its
monopoly quantile ``1/r`` (an atom of mass ``1/r`` at value ``r``) and unit
monopoly revenue.
"""

from __future__ import annotations

import csv
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "r_max",
    "TruncatedGPD",
    "RevenueCurve",
    "TGPDCurve",
    "PiecewiseCurve",
    "Example11Curve",
    "cdf",
    "quantile_value",
    "revenue_curve_tgpd",
    "sample",
    "make_piecewise_curve",
    "load_curve_csv",
    "dump_curve_csv",
    "fosd_by_curves",
    "fosd_by_cdf",
]

FOSD_TOL = 1e-12


def r_max(lam: float) -> float:
    """Largest legal truncation point for regularity level ``lam``."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must lie in [0, 1]")
    if lam == 0.0:
        return math.e
    if lam == 1.0:
        return math.inf
    return math.exp(-math.log1p(-lam) / lam)


def _as_array(x):
    arr = np.asarray(x, dtype=float)
    return arr, arr.ndim == 0


# Below this |lam * x| the series is exact to double precision and keeps
# working when lam itself is subnormal.
_SERIES_CUTOFF = 1e-5


def expm1_over(lam: float, x):
    """``expm1(lam x) / lam``, tending to ``x`` as ``lam -> 0``."""
    x = np.asarray(x, dtype=float)
    if lam == 0.0:
        return x
    t = lam * x
    with np.errstate(over="ignore", invalid="ignore"):
        return np.where(np.abs(t) < _SERIES_CUTOFF, x * (1 + t / 2 + t * t / 6), np.expm1(t) / lam)


def log1p_over(lam: float, y):
    """``log1p(lam y) / lam``, tending to ``y`` as ``lam -> 0``."""
    y = np.asarray(y, dtype=float)
    if lam == 0.0:
        return y
    t = lam * y
    with np.errstate(invalid="ignore"):
        return np.where(np.abs(t) < _SERIES_CUTOFF, y * (1 - t / 2 + t * t / 3), np.log1p(t) / lam)


@dataclass(frozen=True)
class TruncatedGPD:
    """Truncated lambda-generalized Pareto distribution ``F_(lam, r)``.

    ``lam = 0`` is the truncated exponential (MHR worst case) and is handled
    by its own closed form rather than as a limit.
    """

    lam: float
    r: float

    def __post_init__(self):
        lam, r = float(self.lam), float(self.r)
        if not 0.0 <= lam <= 1.0:
            raise ValueError(f"lambda must lie in [0, 1], got {lam}")
        if not (math.isfinite(r) and r >= 1.0):
            raise ValueError(f"r must be a finite number >= 1, got {r}")
        if r > r_max(lam) * (1 + 1e-12):
            raise ValueError(f"r = {r} exceeds r_max({lam}) = {r_max(lam)}")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "r", r)

    @property
    def monopoly_quantile(self) -> float:
        return 1.0 / self.r

    @property
    def monopoly_reserve(self) -> float:
        return self.r

    @property
    def scale(self) -> float:
        """``r / (r^lam - 1)``, or ``r / ln r`` when ``lam = 0``; infinite at ``r = 1``."""
        if self.r == 1.0:
            return math.inf
        log_r = math.log(self.r)
        if self.lam == 0.0:
            return self.r / log_r
        return self.r / math.expm1(self.lam * log_r)

    def cdf(self, v):
        """``F(v)``, left-continuous at the atom: the formula for ``v <= r``, 1 above."""
        v, scalar = _as_array(v)
        if np.any(v < 0):
            raise ValueError("values must be non-negative")
        r, lam = self.r, self.lam
        if r == 1.0:
            out = np.where(v > 1.0, 1.0, 0.0)
        else:
            # 1 - (1 + lam c v)^(-1/lam) with c = (r^lam - 1) / (lam r)
            c = float(expm1_over(lam, math.log(r))) / r
            out = -np.expm1(-log1p_over(lam, c * v))
        out = np.where(v > r, 1.0, out)
        return float(out) if scalar else out

    def quantile_value(self, q):
        """Value whose survival probability is ``q``; the atom value ``r`` for ``q <= 1/r``."""
        q, scalar = _as_array(q)
        if np.any(q <= 0) or np.any(q > 1):
            raise ValueError("quantile must lie in (0, 1]")
        r = self.r
        if r == 1.0:
            out = np.ones_like(q)
        else:
            out = np.where(q <= 1.0 / r, r, self._tail_price(q))
        return float(out) if scalar else out

    def _tail_price(self, q):
        # r (q^-lam - 1) / (r^lam - 1), the price above the atom
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.r * expm1_over(self.lam, -np.log(q)) / float(expm1_over(self.lam, math.log(self.r)))

    def revenue(self, q):
        """Revenue curve ``R(q)``; equals ``r q`` up to ``1/r`` and is 1 there."""
        q, scalar = _as_array(q)
        if np.any(q < 0) or np.any(q > 1):
            raise ValueError("quantile must lie in [0, 1]")
        r = self.r
        if r == 1.0:
            out = q.copy()
        else:
            with np.errstate(invalid="ignore"):
                out = np.where(q <= 1.0 / r, r * q, q * self._tail_price(q))
        return float(out) if scalar else out

    def sample(self, u):
        """Inverse-transform sample; ``u >= 1 - 1/r`` lands on the atom."""
        u, scalar = _as_array(u)
        if np.any(u < 0) or np.any(u >= 1):
            raise ValueError("uniform draws must lie in [0, 1)")
        atom = u >= 1.0 - 1.0 / self.r
        q = np.where(atom, 1.0, 1.0 - u)
        out = np.where(atom, self.r, self.quantile_value(q))
        return float(out) if scalar else out

    def curve(self) -> "TGPDCurve":
        return TGPDCurve(self)


def cdf(d: TruncatedGPD, v):
    return d.cdf(v)


def quantile_value(d: TruncatedGPD, q):
    return d.quantile_value(q)


def revenue_curve_tgpd(d: TruncatedGPD, q):
    return d.revenue(q)


def sample(d: TruncatedGPD, u):
    return d.sample(u)


class RevenueCurve(ABC):
    """Quantile-space revenue function with a declared monopoly point."""

    kind: str = "abstract"

    @abstractmethod
    def eval(self, q):
        """``R(q)`` for scalar or array ``q`` in ``[0, 1]``."""

    @property
    @abstractmethod
    def monopoly_quantile(self) -> float: ...

    @property
    def monopoly_revenue(self) -> float:
        return float(self.eval(self.monopoly_quantile))

    @property
    def kinks(self) -> tuple[float, ...]:
        """Interior quantiles where ``R`` fails to be smooth."""
        return ()

    @property
    def regular(self) -> bool:
        return True

    def value_at(self, q):
        """Price that sells with probability ``q``: ``R(q) / q``, right limit at 0."""
        q, scalar = _as_array(q)
        if np.any(q < 0) or np.any(q > 1):
            raise ValueError("quantile must lie in [0, 1]")
        eps = np.where(q > 0, q, 1.0)
        out = np.where(q > 0, np.asarray(self.eval(eps), dtype=float) / eps, self._slope_at_zero())
        return float(out) if scalar else out

    def _slope_at_zero(self) -> float:
        h = 1e-9
        return float(self.eval(h)) / h

    @property
    def monopoly_reserve(self) -> float:
        return float(self.value_at(self.monopoly_quantile))

    def sample(self, u):
        u, scalar = _as_array(u)
        if np.any(u < 0) or np.any(u >= 1):
            raise ValueError("uniform draws must lie in [0, 1)")
        out = self.value_at(1.0 - u)
        return float(out) if scalar else out

    def survival(self, v, iters: int = 64):
        """``P(V >= v)`` by bisection on the nonincreasing price function ``R(q)/q``."""
        v, scalar = _as_array(v)
        v = np.atleast_1d(v)
        lo = np.zeros_like(v)  # value_at(lo) >= v
        hi = np.ones_like(v)
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            above = self.value_at(mid) >= v
            lo = np.where(above, mid, lo)
            hi = np.where(above, hi, mid)
        out = np.where(v <= self.value_at(1.0), 1.0, np.where(v > self.value_at(0.0), 0.0, lo))
        return float(out[0]) if scalar else out


class TGPDCurve(RevenueCurve):
    kind = "tgpd"

    def __init__(self, dist: TruncatedGPD):
        self.dist = dist

    def eval(self, q):
        return self.dist.revenue(q)

    @property
    def monopoly_quantile(self) -> float:
        return self.dist.monopoly_quantile

    @property
    def monopoly_revenue(self) -> float:
        return 1.0

    @property
    def kinks(self) -> tuple[float, ...]:
        q = self.dist.monopoly_quantile
        return (q,) if 0.0 < q < 1.0 else ()

    def value_at(self, q):
        q, scalar = _as_array(q)
        out = np.where(q > 0, self.dist.quantile_value(np.where(q > 0, q, 1.0)), self.dist.r)
        return float(out) if scalar else out

    def sample(self, u):
        return self.dist.sample(u)

    def __repr__(self):
        return f"TGPDCurve(lam={self.dist.lam!r}, r={self.dist.r!r})"


@dataclass(frozen=True)
class PiecewiseCurve(RevenueCurve):
    """Piecewise-linear revenue curve through exact rational breakpoints."""

    q: tuple[Fraction, ...]
    R: tuple[Fraction, ...]
    _qf: np.ndarray = field(init=False, repr=False, compare=False)
    _rf: np.ndarray = field(init=False, repr=False, compare=False)

    kind = "piecewise-linear"

    def __post_init__(self):
        object.__setattr__(self, "_qf", np.array([float(x) for x in self.q]))
        object.__setattr__(self, "_rf", np.array([float(x) for x in self.R]))

    def eval(self, q):
        q, scalar = _as_array(q)
        out = np.interp(q, self._qf, self._rf)
        return float(out) if scalar else out

    @property
    def slopes(self) -> tuple[Fraction, ...]:
        return tuple((self.R[i + 1] - self.R[i]) / (self.q[i + 1] - self.q[i])
                     for i in range(len(self.q) - 1))

    @property
    def regular(self) -> bool:
        s = self.slopes
        return all(s[i + 1] <= s[i] for i in range(len(s) - 1))

    @property
    def _monopoly_index(self) -> int:
        best = max(self.R)
        return next(i for i, v in enumerate(self.R) if v == best)

    @property
    def monopoly_quantile(self) -> float:
        return float(self.q[self._monopoly_index])

    @property
    def monopoly_revenue(self) -> float:
        return float(self.R[self._monopoly_index])

    @property
    def kinks(self) -> tuple[float, ...]:
        return tuple(float(x) for x in self.q[1:-1])

    def _slope_at_zero(self) -> float:
        return float(self.slopes[0])

    def points(self) -> list[tuple[Fraction, Fraction]]:
        return list(zip(self.q, self.R))


def _to_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, float) and not math.isfinite(x):
        raise ValueError("breakpoints must be finite")
    return Fraction(x)


def make_piecewise_curve(breakpoints: Iterable[Sequence]) -> PiecewiseCurve:
    """Build a piecewise-linear curve from ``(q, R)`` pairs.

    Pairs may be ints, floats, strings such as ``"7/8"`` or Fractions. The
    quantiles must increase strictly from 0 to 1 and revenues be non-negative.
    """
    pts = [(_to_fraction(a), _to_fraction(b)) for a, b in breakpoints]
    if len(pts) < 2:
        raise ValueError("a curve needs at least two breakpoints")
    qs = tuple(p[0] for p in pts)
    rs = tuple(p[1] for p in pts)
    if qs[0] != 0 or qs[-1] != 1:
        raise ValueError("breakpoints must cover q in [0, 1] exactly")
    if any(b <= a for a, b in zip(qs, qs[1:])):
        raise ValueError("breakpoint quantiles must be strictly increasing")
    if any(v < 0 for v in rs):
        raise ValueError("revenues must be non-negative")
    return PiecewiseCurve(qs, rs)


def load_curve_csv(path: str | Path) -> PiecewiseCurve:
    """Read a curve from a CSV file with header ``q,R``."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        if header != ["q", "R"]:
            raise ValueError(f"expected header 'q,R', got {','.join(header)!r}")
        rows = [row for row in reader if row and any(c.strip() for c in row)]
    return make_piecewise_curve((row[0], row[1]) for row in rows)


def dump_curve_csv(curve: PiecewiseCurve, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["q", "R"])
        for q, r in curve.points():
            w.writerow([str(q), str(r)])


class Example11Curve(RevenueCurve):
    """Regular distribution where balanced VCG needs ``n`` extra buyers.

    Values follow ``P(V >= v) = 1 / (1 + v)`` truncated at ``H = 3n - 1``, so
    ``R(q) = H q`` below ``1 / (H + 1)`` and ``1 - q`` above.
    """

    kind = "example-1.1"

    def __init__(self, n: int):
        if n < 1:
            raise ValueError("n must be at least 1")
        self.n = int(n)
        self.H = 3 * self.n - 1

    def eval(self, q):
        q, scalar = _as_array(q)
        out = np.where(q <= 1.0 / (self.H + 1), self.H * q, 1.0 - q)
        return float(out) if scalar else out

    @property
    def monopoly_quantile(self) -> float:
        return 1.0 / (self.H + 1)

    @property
    def monopoly_revenue(self) -> float:
        return self.H / (self.H + 1)

    @property
    def monopoly_reserve(self) -> float:
        return float(self.H)

    @property
    def kinks(self) -> tuple[float, ...]:
        return (1.0 / (self.H + 1),)

    def value_at(self, q):
        q, scalar = _as_array(q)
        with np.errstate(divide="ignore"):
            out = np.where(q <= 1.0 / (self.H + 1), float(self.H), 1.0 / np.where(q > 0, q, 1.0) - 1.0)
        return float(out) if scalar else out

    def sample(self, u):
        u, scalar = _as_array(u)
        top = u >= 1.0 - 1.0 / (self.H + 1)
        out = np.where(top, float(self.H), 1.0 / (1.0 - np.where(top, 0.0, u)) - 1.0)
        return float(out) if scalar else out

    def __repr__(self):
        return f"Example11Curve(n={self.n})"


def _check_grid(A: RevenueCurve, B: RevenueCurve, grid: int) -> np.ndarray:
    if grid < 2:
        raise ValueError("grid must have at least two points")
    pts = np.concatenate([np.linspace(0.0, 1.0, grid), A.kinks, B.kinks,
                          [A.monopoly_quantile, B.monopoly_quantile]])
    return np.unique(pts)


def fosd_by_curves(A: RevenueCurve, B: RevenueCurve, grid: int = 10_001) -> bool:
    """True iff ``A`` is first-order dominated by ``B``: ``R_A <= R_B`` pointwise."""
    q = _check_grid(A, B, grid)
    return bool(np.all(np.asarray(A.eval(q)) <= np.asarray(B.eval(q)) + FOSD_TOL))


def fosd_by_cdf(A: RevenueCurve, B: RevenueCurve, values: Iterable[float],
                tol: float = 1e-9) -> bool:
    """True iff ``P_A(V >= v) <= P_B(V >= v)`` at every supplied value.

    Works from survival functions rather than revenue curves, so it serves as
    an independent route to the same dominance relation.
    """
    v = np.asarray(list(values), dtype=float)
    return bool(np.all(A.survival(v) <= B.survival(v) + tol))
