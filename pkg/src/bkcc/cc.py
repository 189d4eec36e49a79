"""Competition complexity: exact finite-market search and asymptotic formulas.

For a market of ``m`` units and ``n`` buyers, the competition complexity is the
least number ``k`` of extra buyers such that VCG on ``n + k`` buyers earns at
least ``gamma`` times the optimal revenue on ``n`` buyers for every
lambda-regular distribution. The worst case lies in the TGPD family, so the
search is one-dimensional in the truncation point ``r``:

    g_k(r) = RevVCG_{s:n+k}(r) - gamma * RevOPT_{m:n}(r) >= 0  for all r.

Nonnegativity is certified on a uniform grid refined by bisection, using an
empirical Lipschitz bound with a safety factor. A grid point with
``g < -1e-9`` is a witness that ``k`` is too small.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .dist import r_max
from .revenue import _opt_tgpd, _vcg_tgpd

__all__ = [
    "CCQuery",
    "CCResult",
    "GapReport",
    "CCCeilingError",
    "worst_gap",
    "cc_exact",
    "cc_sl_exact",
    "cc_asymptotic",
    "cc_sl_asymptotic",
    "thm32_bounds",
    "units_for_ratio",
    "MHR_RATE",
]

MHR_RATE = math.exp(1 / math.e) - 1  # about 0.4447
WITNESS_TOL = 1e-9
# The tie bands stop once the margin falls to this level (or r comes within
# TIE_SLIVER of 1); what remains next to r = 1 is rounding noise.
TIE_NOISE = 1e-12
TIE_SLIVER = 1e-13


def _snap(gamma: float) -> Fraction:
    return Fraction(gamma).limit_denominator(10**9)


def units_for_ratio(alpha: float, n: int) -> int:
    """``ceil(alpha * n)`` taken on the rational nearest ``alpha``."""
    return math.ceil(_snap(alpha) * n)


@dataclass(frozen=True)
class CCQuery:
    lam: float
    m: int
    n: int
    gamma: float = 1.0
    mechanism: str = "VCG"
    grid_points: int = 172
    r_cap: float = 1000.0
    safety: float = 2.0
    budget: int = 100_000
    ceiling: Optional[int] = None
    use_analytic: bool = True

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lambda must lie in [0, 1]")
        if not 1 <= self.m <= self.n:
            raise ValueError("need 1 <= m <= n")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        if self.mechanism not in ("VCG", "SL-VCG"):
            raise ValueError("mechanism must be 'VCG' or 'SL-VCG'")
        if self.grid_points < 10:
            raise ValueError("need at least 10 grid points")
        if not (self.r_cap > 1.0 and math.isfinite(self.r_cap)):
            raise ValueError("r_cap must be a finite number above 1")
        if self.safety < 1.0:
            raise ValueError("safety factor must be at least 1")

    @property
    def r_hi(self) -> float:
        return min(r_max(self.lam), self.r_cap)

    @property
    def k_ceiling(self) -> int:
        return 4 * self.n if self.ceiling is None else self.ceiling


@dataclass
class GapReport:
    """Outcome of checking ``g_k(r) >= 0`` over the truncation range.

    ``status`` is ``"pass"`` (certified nonnegative), ``"fail"`` (a witness
    below ``-1e-9``), ``"boundary"`` (minimum in ``(-1e-9, 0)``) or
    ``"uncertified"`` (refinement budget exhausted).
    """

    status: str
    min_margin: float
    argmin_r: float
    evaluations: int
    witness_r: Optional[float] = None
    tail_margin: Optional[float] = None
    tie_at_one: bool = False
    tie_sliver: Optional[float] = None

    @property
    def passed(self) -> bool:
        return self.status == "pass"


@dataclass
class CCResult:
    """Competition complexity answer.

    ``k`` is the smallest certified number of extra buyers. ``worst_r`` and
    ``margin`` locate the minimum of ``g_k``; ``witness`` holds ``(r, g)``
    showing that ``k - 1`` fails.
    """

    k: int
    worst_r: Optional[float]
    margin: Optional[float]
    certified: bool
    supply: Optional[int] = None
    boundary: bool = False
    analytic: bool = False
    witness: Optional[tuple[float, float]] = None
    tail_margin: Optional[float] = None
    evaluations: int = 0
    notes: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "k": self.k,
            "worst_r": self.worst_r,
            "margin": self.margin,
            "certified": self.certified,
            "supply": self.supply,
            "boundary": self.boundary,
            "analytic": self.analytic,
            "witness_r": None if self.witness is None else self.witness[0],
            "witness_margin": None if self.witness is None else self.witness[1],
            "tail_margin": self.tail_margin,
            "evaluations": self.evaluations,
            "notes": list(self.notes),
        }


class CCCeilingError(RuntimeError):
    def __init__(self, query: CCQuery, last: GapReport):
        super().__init__(
            f"no certified k up to the ceiling {query.k_ceiling} for {query}; "
            f"last minimum margin {last.min_margin!r} at r = {last.argmin_r!r}"
        )
        self.query = query
        self.last = last


class _Budget(Exception):
    pass


class _Witness(Exception):
    def __init__(self, r: float, g: float):
        self.r, self.g = r, g


class _Boundary(Exception):
    pass


class _Margin:
    """Memoised ``g(r)`` with a shared evaluation budget."""

    def __init__(self, lam, m, n, k, s, gamma: Fraction, budget):
        self.lam, self.m, self.n, self.k, self.s = lam, m, n, k, s
        self.gamma = gamma
        self.gamma_f = float(gamma)
        self.budget = budget
        self.count = 0
        self.at_one = float(s - gamma * m)
        self.best = (math.inf, math.inf)  # (g, r), ties toward smaller r
        # with an exact tie at r = 1 the minimum is reported away from it
        self.track_from = 1.0
        self.last_witness = (math.inf, math.inf)

    def __call__(self, r: float) -> float:
        if r == 1.0:
            g = self.at_one
        else:
            self.count += 1
            if self.count > self.budget:
                raise _Budget()
            g = (_vcg_tgpd(self.lam, r, self.s, self.n + self.k)
                 - self.gamma_f * _opt_tgpd(r, self.m, self.n))
        if r >= self.track_from and (g, r) < self.best:
            self.best = (g, r)
        if g < 0:
            self.last_witness = (g, r)
            if g < -WITNESS_TOL:
                raise _Witness(r, g)
            # a negative margin inside the noise band can never be certified
            raise _Boundary()
        return g


def _certify_cells(g: _Margin, rs: list[float], gs: list[float], L: float, safety: float) -> float:
    """Bisect cells until each clears the Lipschitz test ``min(ga, gb) >= L h / 2``."""
    stack = [(rs[i], gs[i], rs[i + 1], gs[i + 1]) for i in range(len(rs) - 1)][::-1]
    while stack:
        a, ga, b, gb = stack.pop()
        h = b - a
        if min(ga, gb) >= L * h / 2:
            continue
        mid = 0.5 * (a + b)
        if not a < mid < b:
            raise _Budget()
        gm = g(mid)
        L = max(L, safety * abs(gm - ga) / (mid - a), safety * abs(gb - gm) / (b - mid))
        stack.append((mid, gm, b, gb))
        stack.append((a, ga, mid, gm))
    return L


def _certify_tie(g: _Margin, b: float, gb: float, safety: float) -> float:
    """Certify ``(1, b]`` when ``g(1) = 0`` exactly; returns the accepted sliver end.

    The Lipschitz test can never clear a cell touching a zero, so the cell is
    cut into geometric bands ``[1 + d/2, 1 + d]``, each with its own slope
    bound from a few samples. Bands stop once the margin at the lower end
    drops below ``TIE_NOISE``; the sliver left next to ``r = 1`` is accepted
    as part of the tie.
    """
    d = b - 1.0
    hi, g_hi = b, gb
    while d > TIE_SLIVER:
        lo = 1.0 + d / 2
        pts = list(np.linspace(lo, hi, 5))
        vals = [g(p) for p in pts[:-1]] + [g_hi]
        L = safety * max(abs(vals[i + 1] - vals[i]) / (pts[i + 1] - pts[i]) for i in range(4))
        _certify_cells(g, pts, vals, L, safety)
        hi, g_hi = lo, vals[0]
        if g_hi < TIE_NOISE:
            break
        d /= 2
    return hi


def worst_gap(lam: float, m: int, n: int, k: int, gamma: float = 1.0, *,
              s: Optional[int] = None, grid: int = 172, refine: bool = True,
              r_cap: float = 1000.0, safety: float = 2.0,
              budget: int = 100_000) -> GapReport:
    """Minimum over ``r`` of ``RevVCG_{s:n+k} - gamma * RevOPT_{m:n}`` on TGPD(lam, r).

    With ``refine`` the grid is bisected until nonnegativity is certified or a
    witness is found; without it only the grid minimum is reported
    (status ``"pass"`` then means the grid alone is nonnegative).
    """
    s = m if s is None else s
    if not 1 <= s <= m <= n:
        raise ValueError("need 1 <= s <= m <= n")
    gam = _snap(gamma)
    hi = min(r_max(lam), r_cap)
    rs = [float(x) for x in np.linspace(1.0, hi, grid)]
    # sliding the ends onto their exact values keeps r = e and r = 1 exact
    rs[0], rs[-1] = 1.0, hi
    g = _Margin(lam, m, n, k, s, gam, budget)
    if g.at_one == 0.0:
        g.track_from = rs[1]
    tail = None
    sliver = None
    status = "pass"
    witness = None
    try:
        gs = [g(r) for r in rs]
        if lam == 1.0:
            tail = gs[-1]
        if refine:
            slopes = [abs(gs[i + 1] - gs[i]) / (rs[i + 1] - rs[i]) for i in range(len(rs) - 1)]
            L = safety * max(slopes)
            start = 0
            if gs[0] == 0.0:
                # a high-order touch at r = 1 stays far below the global Lipschitz
                # bound for many grid cells; hand those to the geometric bands too
                clear = L * (rs[1] - rs[0]) / 2
                start = next((i for i in range(1, len(rs)) if gs[i] >= clear), len(rs) - 1)
                sliver = _certify_tie(g, rs[start], gs[start], safety)
            _certify_cells(g, rs[start:], gs[start:], L, safety)
    except _Witness as w:
        status, witness = "fail", w.r
    except _Boundary:
        status, witness = "boundary", g.last_witness[1]
    except _Budget:
        status = "uncertified"
    best_g, best_r = g.best
    if status in ("fail", "boundary"):
        best_g, best_r = min(g.best, g.last_witness)
    return GapReport(status, best_g, best_r, g.count, witness, tail, g.at_one == 0.0, sliver)


def _search_k(q: CCQuery, check):
    """Smallest ``k`` with ``check(k).passed``; assumes monotonicity in ``k``."""
    reports: dict[int, object] = {}

    def run(k):
        if k not in reports:
            if k > q.k_ceiling:
                last = reports[max(reports)] if reports else None
                raise CCCeilingError(q, last[0] if last else GapReport("fail", math.nan, math.nan, 0))
            reports[k] = check(k)
        return reports[k]

    start = 0
    if q.lam == 0.0 and q.m == q.n and _snap(q.gamma) == 1:
        start = max(0, math.floor(thm32_bounds(q.n)[0]))
    if run(start)[0].passed:
        k = start
        while k > 0 and run(k - 1)[0].passed:
            k -= 1
        return k, reports
    lo, step = start, 1
    while True:
        hi = min(start + step, q.k_ceiling + 1)
        if run(hi)[0].passed:
            break
        lo = hi
        step *= 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if run(mid)[0].passed:
            hi = mid
        else:
            lo = mid
    return hi, reports


def _gap(q: CCQuery, k: int, s: int) -> GapReport:
    return worst_gap(q.lam, q.m, q.n, k, q.gamma, s=s, grid=q.grid_points,
                     r_cap=q.r_cap, safety=q.safety, budget=q.budget)


def _result(q: CCQuery, k: int, reports: dict, supply: Optional[int]) -> CCResult:
    rep = reports[k][0]
    prev = reports.get(k - 1, (None,))[0] if k > 0 else None
    res = CCResult(
        k=k,
        worst_r=rep.argmin_r,
        margin=rep.min_margin,
        certified=rep.passed and (k == 0 or (prev is not None and prev.status in ("fail", "boundary"))),
        supply=supply,
        boundary=prev is not None and prev.status == "boundary",
        tail_margin=rep.tail_margin,
        evaluations=sum(r[0].evaluations + r[1] for r in reports.values()),
    )
    if prev is not None:
        res.witness = (prev.witness_r if prev.witness_r is not None else prev.argmin_r, prev.min_margin)
        if prev.status == "uncertified":
            res.notes.append(f"k - 1 = {k - 1} was neither certified nor refuted within the budget")
    if rep.tie_sliver is not None:
        res.notes.append(f"margin is exactly 0 at r = 1; (1, {rep.tie_sliver!r}] accepted as a tie")
    if q.lam == 1.0:
        res.notes.append(f"search capped at r = {q.r_cap:g}; tail margin {rep.tail_margin!r}")
    return res


def _analytic(q: CCQuery) -> bool:
    return q.use_analytic and q.lam == 1.0 and _snap(q.gamma) == 1


def _analytic_result(q: CCQuery, supply: Optional[int]) -> CCResult:
    return CCResult(k=q.m, worst_r=None, margin=0.0, certified=True, supply=supply, analytic=True,
                    notes=["regular distributions with gamma = 1 need exactly m extra buyers"])


def cc_exact(q: CCQuery) -> CCResult:
    """Smallest certified ``k`` for VCG selling all ``m`` units."""
    if q.mechanism != "VCG":
        raise ValueError("cc_exact needs mechanism 'VCG'")
    if _analytic(q):
        return _analytic_result(q, None)

    def check(k):
        rep = _gap(q, k, q.m)
        return rep, 0

    k, reports = _search_k(q, check)
    return _result(q, k, reports, None)


def _supply_order(q: CCQuery) -> list[int]:
    s0 = min(q.m, math.ceil(_snap(q.gamma) * q.m))
    order = [s0]
    for d in range(1, q.m):
        for s in (s0 + d, s0 - d):
            if 1 <= s <= q.m:
                order.append(s)
    # supplies below gamma * m lose already at the point mass r = 1
    return [s for s in order if s - _snap(q.gamma) * q.m >= 0]


def cc_sl_exact(q: CCQuery) -> CCResult:
    """Smallest ``k`` for which some supply ``s <= m`` certifies; records that ``s``."""
    if q.mechanism != "SL-VCG":
        raise ValueError("cc_sl_exact needs mechanism 'SL-VCG'")
    if _analytic(q):
        # gamma = 1 leaves s = m as the only supply that survives r = 1
        return _analytic_result(q, q.m)
    supplies = _supply_order(q)
    chosen: dict[int, int] = {}

    def check(k):
        best, spent = None, 0
        for s in supplies:
            rep = _gap(q, k, s)
            spent += rep.evaluations
            if rep.passed:
                chosen[k] = s
                return rep, spent - rep.evaluations
            if best is None or rep.min_margin > best.min_margin:
                best = rep
        return best, spent - best.evaluations

    k, reports = _search_k(q, check)
    return _result(q, k, reports, chosen.get(k))


def cc_asymptotic(lam: float, alpha: float, gamma: float) -> float:
    """Limit of ``CC / n`` for VCG when ``m = ceil(alpha n)`` and ``n`` grows."""
    _check_asym(lam, alpha, gamma)
    if lam == 0.0:
        if alpha < 1 / math.e:
            return 0.0
        return max(alpha * math.exp(gamma / (math.e * alpha)) - 1.0, 0.0)
    if lam == 1.0:
        return max(gamma + alpha - 1.0, 0.0)
    if alpha < (1 - lam) ** (1 / lam):
        return 0.0
    c = (1 - lam) ** ((1 - lam) / lam)
    return max(alpha * ((lam * gamma / alpha) * c + 1.0) ** (1 / lam) - 1.0, 0.0)


def cc_sl_asymptotic(lam: float, alpha: float, gamma: float) -> float:
    """Limit of ``CC / n`` for VCG with supply ``ceil(gamma * ceil(alpha n))``."""
    _check_asym(lam, alpha, gamma)
    if lam == 0.0:
        if alpha < 1 / math.e:
            return 0.0
        return max(alpha * gamma * math.exp(1 / (math.e * alpha)) - 1.0, 0.0)
    if lam == 1.0:
        return max(alpha * gamma + gamma - 1.0, 0.0)
    if alpha < (1 - lam) ** (1 / lam):
        return 0.0
    c = (1 - lam) ** ((1 - lam) / lam)
    return max(alpha * gamma * ((lam / alpha) * c + 1.0) ** (1 / lam) - 1.0, 0.0)


def _check_asym(lam, alpha, gamma):
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must lie in [0, 1]")
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    if not 0.0 < gamma <= 1.0:
        raise ValueError("gamma must lie in (0, 1]")


def thm32_bounds(n: int) -> tuple[float, int]:
    """Lower and upper bounds on balanced MHR competition complexity."""
    if n < 1:
        raise ValueError("n must be at least 1")
    lower = MHR_RATE * n
    return lower, math.ceil(lower + 1.05 * math.log(n))
