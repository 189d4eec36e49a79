"""Acceptance checks shared by ``bkcc verify`` and the test suite.

Each check returns a :class:`CriterionResult`. Suites pick the sizes:
``full`` runs every criterion at its stated scale, ``fast`` trims the table
range, trial counts and random sample sizes for a quick smoke run.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from importlib import resources
from typing import Any, Callable

import numpy as np

from . import cc, dist, oracle, orderstat, revenue
from .dist import Example11Curve, TruncatedGPD, make_piecewise_curve

__all__ = [
    "CriterionResult",
    "SuiteConfig",
    "SUITES",
    "reference_table",
    "example_c1_curves",
    "random_regular_curve",
    "CRITERIA",
    "run_suite",
]


@dataclass
class CriterionResult:
    criterion: str
    status: str  # "pass" or "fail"
    observed: Any
    expected: Any
    tolerance: Any
    seconds: float = 0.0
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        extra = f" -- {self.detail}" if self.detail else ""
        return f"[{mark}] {self.criterion} ({self.seconds:.1f}s){extra}"

    def as_dict(self) -> dict:
        d = asdict(self)
        d.pop("seconds")
        d.pop("detail")
        return d


@dataclass(frozen=True)
class SuiteConfig:
    table_rows: tuple[int, ...]
    mc_trials: int
    lower_bound_trials: int
    random_cases: int
    fd_points: int
    workers: int = 1
    seed: int = 20240611


def _rows(*parts) -> tuple[int, ...]:
    out = []
    for p in parts:
        out.extend(p if isinstance(p, range) else [p])
    return tuple(sorted(set(out)))


SUITES = {
    "full": SuiteConfig(_rows(range(1, 201), 593), 1_000_000, 10_000_000, 200, 50),
    "fast": SuiteConfig(_rows(range(1, 21), 50, 100), 200_000, 10_000_000, 60, 20),
}


def reference_table() -> dict[int, int]:
    """Balanced MHR competition complexity for ``n = 1..593`` as tabulated in the literature."""
    text = resources.files("bkcc").joinpath("balanced_mhr_cc.csv").read_text(encoding="utf-8")
    lines = text.strip().splitlines()
    assert lines[0] == "n,t_n"
    return {int(a): int(b) for a, b in (ln.split(",") for ln in lines[1:])}


def example_c1_curves():
    """Two regular curves where FOSD order and the VCG/OPT ratio order disagree."""
    f1 = make_piecewise_curve([(0, 0), ("7/8", 1), (1, 1)])
    f2 = make_piecewise_curve([(0, 0), ("3/4", "6/7"), (1, 1)])
    return f1, f2


def random_regular_curve(rng: np.random.Generator, r: float) -> dist.PiecewiseCurve:
    """Random concave piecewise-linear curve peaking at exactly ``(1/r, 1)``."""
    q_star = Fraction(1.0 / r)
    pts = [(Fraction(0), Fraction(0))]
    left = sorted(Fraction(float(x)) for x in rng.uniform(0, float(q_star), rng.integers(0, 4)))
    knots = [x for x in left if 0 < x < q_star] + [q_star]
    widths = [b - a for a, b in zip([Fraction(0)] + knots[:-1], knots)]
    slopes = sorted((Fraction(float(x)) for x in rng.uniform(0.1, 1.0, len(widths))), reverse=True)
    total = sum(s * w for s, w in zip(slopes, widths))
    y = Fraction(0)
    for q, s, w in zip(knots, slopes, widths):
        y += s * w / total
        pts.append((q, y))
    right = sorted(Fraction(float(x)) for x in rng.uniform(float(q_star), 1.0, rng.integers(0, 3)))
    knots = [x for x in right if q_star < x < 1] + [Fraction(1)]
    widths = [b - a for a, b in zip([q_star] + knots[:-1], knots)]
    drops = sorted(Fraction(float(x)) for x in rng.uniform(0.0, 1.0, len(widths)))
    total = sum(d * w for d, w in zip(drops, widths)) or Fraction(1)
    depth = Fraction(float(rng.uniform(0.0, 1.0)))
    y = Fraction(1)
    for q, d, w in zip(knots, drops, widths):
        y -= d * w / total * depth
        pts.append((q, y))
    return make_piecewise_curve(pts)


def _timed(name: str, fn: Callable[[], CriterionResult]) -> CriterionResult:
    t0 = time.perf_counter()
    try:
        res = fn()
    except Exception as exc:  # report, do not abort the suite
        res = CriterionResult(name, "fail", repr(exc), None, None, detail="raised")
    res.seconds = time.perf_counter() - t0
    return res


def _cc_row(n: int) -> int:
    return cc.cc_exact(cc.CCQuery(0.0, n, n, 1.0)).k


def _table_values(cfg: SuiteConfig, cache: dict) -> dict[int, int]:
    if "table" not in cache:
        if cfg.workers > 1:
            with ProcessPoolExecutor(cfg.workers) as pool:
                ks = list(pool.map(_cc_row, cfg.table_rows))
        else:
            ks = [_cc_row(n) for n in cfg.table_rows]
        cache["table"] = dict(zip(cfg.table_rows, ks))
    return cache["table"]


def check_table(cfg: SuiteConfig, cache: dict) -> CriterionResult:
    ref = reference_table()
    got = _table_values(cfg, cache)
    wrong = {n: (got[n], ref[n]) for n in cfg.table_rows if got[n] != ref[n]}
    return CriterionResult(
        "1 balanced MHR competition complexity table",
        "pass" if not wrong else "fail",
        {"rows": len(got), "mismatches": wrong},
        {n: ref[n] for n in (1, 2, 3, 10, 50, 100, 200, 593) if n in got},
        "exact",
        detail=f"{len(got)} rows, {len(wrong)} mismatches",
    )


def check_sandwich(cfg: SuiteConfig, cache: dict) -> CriterionResult:
    got = _table_values(cfg, cache)
    outside = {}
    for n, t in got.items():
        lo, hi = cc.thm32_bounds(n)
        if not lo <= t <= hi:
            outside[n] = (lo, t, hi)
    return CriterionResult("2 MHR finite-market bounds contain every computed value",
                           "pass" if not outside else "fail", {"outside": outside},
                           "lower <= t_n <= upper", "exact integer containment")


def check_example_c1(cfg: SuiteConfig, cache: dict) -> CriterionResult:
    f1, f2 = example_c1_curves()
    obs = {
        "vcg_f1_2_4": revenue.rev_vcg(f1, 2, 4),
        "opt_f1_2_3": revenue.rev_opt(f1, 2, 3),
        "vcg_f2_2_4": revenue.rev_vcg(f2, 2, 4),
        "opt_f2_2_3": revenue.rev_opt(f2, 2, 3),
    }
    exp = {"vcg_f1_2_4": 2.27734375, "opt_f1_2_3": 2.234375,
           "vcg_f2_2_4": 2.25446428571, "opt_f2_2_3": 2.1875}
    ok = all(abs(obs[k] - exp[k]) <= 1e-8 for k in exp)
    ratio1 = obs["vcg_f1_2_4"] / obs["opt_f1_2_3"]
    ratio2 = obs["vcg_f2_2_4"] / obs["opt_f2_2_3"]
    obs["ratio_f1"], obs["ratio_f2"] = ratio1, ratio2
    ok = (ok and round(ratio1, 4) == 1.0192 and round(ratio2, 4) == 1.0306 and ratio1 < ratio2
          and dist.fosd_by_curves(f2, f1))
    return CriterionResult("3 FOSD versus revenue-ratio counterexample", "pass" if ok else "fail",
                           obs, {**exp, "ratio_f1": 1.0192, "ratio_f2": 1.0306}, 1e-8)


def check_example11(cfg: SuiteConfig, cache: dict) -> CriterionResult:
    curve = Example11Curve(3)
    opt = revenue.rev_opt(curve, 3, 3)
    vcg = revenue.rev_vcg(curve, 3, 5)
    mc = oracle.mc_rev_vcg(curve, 3, 5, oracle.McConfig(cfg.lower_bound_trials, cfg.seed, threads=4))
    ok = abs(opt - 8 / 3) <= 1e-9 and vcg < 2.5 and mc.mean + 3 * mc.stderr < 2.5
    return CriterionResult(
        "4 regular instance needing n extra buyers (n = 3)", "pass" if ok else "fail",
        {"rev_opt": opt, "rev_vcg": vcg, "mc_mean": mc.mean, "mc_stderr": mc.stderr,
         "mc_trials": mc.trials},
        {"rev_opt": 8 / 3, "rev_vcg": "< 2.5", "mc_mean + 3 stderr": "< 2.5"}, 1e-9,
        detail="Monte Carlo leg is probabilistic (3 standard errors)",
    )


ASYMPTOTIC_CASES = [
    ("vcg", 0.0, 1.0, 0.9999, 0.4447),
    ("vcg", 0.0, 0.5, 0.9999, 0.0435),
    ("vcg", 0.5, 1.0, 0.9999, 0.5625),
    ("vcg", 0.5, 0.5, 0.9999, 0.125),
    ("sl", 0.0, 1.0, 0.8, 0.1558),
    ("sl", 0.5, 1.0, 0.8, 0.25),
    ("sl", 1.0, 1.0, 0.8, 0.60),
    ("sl", 1.0, 1.0, 0.6, 0.2),
]


def check_asymptotic(cfg: SuiteConfig, cache: dict) -> CriterionResult:
    obs, bad = {}, []
    for mech, lam, alpha, gamma, target in ASYMPTOTIC_CASES:
        f = cc.cc_asymptotic if mech == "vcg" else cc.cc_sl_asymptotic
        v = f(lam, alpha, gamma)
        key = f"{mech}(lambda={lam}, alpha={alpha}, gamma={gamma})"
        obs[key] = v
        if abs(v - target) > 5e-4:
            bad.append(key)
    return CriterionResult("5 asymptotic competition complexity formulas",
                           "pass" if not bad else "fail", obs,
                           {f"{m}(lambda={l}, alpha={a}, gamma={g})": t
                            for m, l, a, g, t in ASYMPTOTIC_CASES}, 5e-4,
                           detail=f"off target: {bad}" if bad else "")


ORACLE_R = {0.0: (1.3, 1.8, 2.3, math.e), 0.5: (1.5, 2.2, 3.0, 4.0), 1.0: (1.5, 3.0, 10.0, 50.0)}
ORACLE_MN = ((1, 2), (2, 4), (3, 5), (5, 8), (10, 15))


def oracle_lattice():
    return [(lam, r, m, N) for lam, rs in ORACLE_R.items() for r in rs for m, N in ORACLE_MN]


def check_oracle(cfg: SuiteConfig, cache: dict) -> CriterionResult:
    cells = oracle_lattice()
    misses = []
    worst = 0.0
    for i, (lam, r, m, N) in enumerate(cells):
        d = TruncatedGPD(lam, r)
        quad = revenue.rev_vcg(d, m, N)
        est = oracle.mc_rev_vcg(d, m, N, oracle.McConfig(cfg.mc_trials, cfg.seed + i, threads=4))
        z = abs(est.mean - quad) / est.stderr if est.stderr > 0 else (0.0 if est.mean == quad else math.inf)
        worst = max(worst, z)
        if z > 4:
            misses.append({"lambda": lam, "r": r, "m": m, "N": N, "z": z})
    share = 1 - len(misses) / len(cells)
    return CriterionResult("6 Monte Carlo agrees with quadrature",
                           "pass" if share >= 0.99 else "fail",
                           {"cells": len(cells), "within_4_sigma": share, "max_z": worst,
                            "misses": misses, "trials": cfg.mc_trials},
                           ">= 99% of cells within 4 standard errors", 4.0)


DERIVATIVE_AT_1_OVER_E = ((10, 5), (50, 23), (100, 45), (594, 271))


def check_derivative(cfg: SuiteConfig, cache: dict) -> CriterionResult:
    q = 1 / math.e
    signs = {f"n={n},t={t}": revenue.dlog_rev_vcg_dqstar(n, t, q) for n, t in DERIVATIVE_AT_1_OVER_E}
    rng = np.random.default_rng(cfg.seed)
    worst, rows = 0.0, []
    for _ in range(cfg.fd_points):
        n = int(rng.integers(1, 101))
        t = int(rng.integers(1, n + 1))
        qs = float(rng.uniform(1 / math.e + 0.01, 0.99))
        a = revenue.dlog_rev_vcg_dqstar(n, t, qs)
        b = revenue.fd_dlog_rev_vcg(0.0, n, n + t, qs)
        rel = abs(a - b) / abs(b)
        if rel > worst:
            worst, rows = rel, [n, t, qs, a, b]
    ok = all(v <= 0 for v in signs.values()) and worst <= 1e-3
    return CriterionResult("7 log-derivative of balanced VCG revenue",
                           "pass" if ok else "fail",
                           {"at_1_over_e": signs, "max_rel_fd_error": worst, "worst_point": rows},
                           {"at_1_over_e": "<= 0", "fd": "relative error <= 1e-3"}, 1e-3)


def _fosd_pairs(rng, count):
    """Compare curve dominance with survival-function dominance on random pairs."""
    bad = 0
    for i in range(count):
        a = random_regular_curve(rng, float(rng.uniform(1.05, 6.0)))
        bump = Fraction(float(rng.uniform(0.02, 0.3)))
        mode = i % 3
        if mode == 0:  # dominates a
            grid = sorted(set(a.q) | {Fraction(j, 8) for j in range(9)})
            b = make_piecewise_curve([(q, Fraction(float(a.eval(float(q)))) + bump * q * (1 - q))
                                      for q in grid])
        elif mode == 1:  # dominated by a
            b = make_piecewise_curve([(q, (1 - bump) * v) for q, v in a.points()])
        else:  # usually crosses a
            b = random_regular_curve(rng, float(rng.uniform(1.05, 6.0)))
        qs = np.concatenate([np.linspace(0.001, 1, 400), [float(q) for q in a.q + b.q]])
        vals = np.unique(np.concatenate([a.value_at(qs), b.value_at(qs)]))
        for x, y in ((a, b), (b, a)):
            if dist.fosd_by_curves(x, y) != dist.fosd_by_cdf(x, y, vals):
                bad += 1
    return bad


def _single_crossing(rng, count):
    bad = 0
    q = np.linspace(0, 1, 10_002)[1:-1]
    for _ in range(count):
        n = int(rng.integers(2, 60))
        m = int(rng.integers(1, n))
        k = int(rng.integers(1, 40))
        gamma = float(rng.uniform(0.05, 1.0))
        diff = ((n + k) * orderstat.density(m, n + k - 1, q)
                - gamma * n * orderstat.density(m, n - 1, q))
        sgn = np.sign(diff[diff != 0])
        changes = int(np.sum(sgn[1:] != sgn[:-1]))
        qc = orderstat.single_crossing_quantile(m, n, k, gamma)
        if changes > 1:
            bad += 1
        elif changes == 1:
            i = int(np.nonzero(sgn[1:] != sgn[:-1])[0][0])
            xs = q[diff != 0]
            if not xs[i] - 1e-9 <= qc <= xs[i + 1] + 1e-9:
                bad += 1
    return bad


def _gap_dominance(rng, count):
    worst = -math.inf
    for _ in range(count):
        r = float(rng.uniform(1.05, 20.0))
        c = random_regular_curve(rng, r)
        t = TruncatedGPD(1.0, r)
        n = int(rng.integers(1, 6))
        m = int(rng.integers(1, n + 1))
        k = int(rng.integers(0, 4))
        gamma = float(rng.uniform(0.3, 1.0))
        gc = gamma * revenue.rev_opt(c, m, n) - revenue.rev_vcg(c, m, n + k)
        gt = gamma * revenue.rev_opt(t, m, n) - revenue.rev_vcg(t, m, n + k)
        worst = max(worst, gc - gt)
    return worst


SL_LATTICE = [(lam, m, n, g) for lam in (0.0, 0.5, 1.0) for m, n in ((1, 1), (2, 3), (3, 3), (5, 8))
              for g in (0.8, 0.95, 1.0)]


def _sl_dominance():
    bad = []
    for lam, m, n, g in SL_LATTICE:
        a = cc.cc_exact(cc.CCQuery(lam, m, n, g))
        b = cc.cc_sl_exact(cc.CCQuery(lam, m, n, g, mechanism="SL-VCG"))
        if b.k > a.k or (g == 1.0 and b.k != a.k):
            bad.append((lam, m, n, g, a.k, b.k))
    return bad


def _balanced_identity():
    worst = 0.0
    for lam in (0.0, 0.25, 0.5, 0.75, 1.0):
        hi = min(dist.r_max(lam), 50.0)
        for r in np.linspace(1.0, hi, 7):
            for n in (1, 2, 5, 17, 60):
                worst = max(worst, abs(revenue.rev_opt(TruncatedGPD(lam, float(r)), n, n) - n))
    return worst


def check_properties(cfg: SuiteConfig, cache: dict) -> CriterionResult:
    rng = np.random.default_rng(cfg.seed)
    count = cfg.random_cases
    obs = {
        "fosd_route_disagreements": _fosd_pairs(rng, max(count // 4, 10)),
        "single_crossing_violations": _single_crossing(rng, count),
        "gap_dominance_max_excess": _gap_dominance(rng, count),
        "sl_dominance_violations": _sl_dominance(),
        "balanced_identity_max_error": _balanced_identity(),
    }
    ok = (obs["fosd_route_disagreements"] == 0 and obs["single_crossing_violations"] == 0
          and obs["gap_dominance_max_excess"] <= 1e-8 and not obs["sl_dominance_violations"]
          and obs["balanced_identity_max_error"] <= 1e-9)
    return CriterionResult("8 structural property suites", "pass" if ok else "fail", obs,
                           {"fosd_route_disagreements": 0, "single_crossing_violations": 0,
                            "gap_dominance_max_excess": "<= 1e-8", "sl_dominance_violations": [],
                            "balanced_identity_max_error": "<= 1e-9"},
                           {"gap": 1e-8, "identity": 1e-9})


CRITERIA: list[tuple[str, Callable[[SuiteConfig, dict], CriterionResult]]] = [
    ("table", check_table),
    ("sandwich", check_sandwich),
    ("example_c1", check_example_c1),
    ("lower_bound_instance", check_example11),
    ("asymptotic", check_asymptotic),
    ("oracle", check_oracle),
    ("derivative", check_derivative),
    ("properties", check_properties),
]


def run_suite(name: str = "fast", workers: int = 1, only: list[str] | None = None,
              echo: Callable[[str], None] | None = None,
              seed: int | None = None) -> list[CriterionResult]:
    base = SUITES[name]
    cfg = SuiteConfig(**{**asdict(base), "workers": workers,
                         "seed": base.seed if seed is None else seed})
    cache: dict = {}
    out = []
    for key, fn in CRITERIA:
        if only and key not in only:
            continue
        res = _timed(key, lambda: fn(cfg, cache))
        if echo:
            echo(res.line())
        out.append(res)
    return out
