import math

import numpy as np
import pytest

import oracles
from conftest import DATA
from bkcc import revenue as R
from bkcc.dist import Example11Curve, TruncatedGPD, load_curve_csv, make_piecewise_curve
from bkcc.orderstat import QuadratureConfig

E = math.e

# 50-digit binomial-expansion values (tests/oracles.py), frozen
VCG_REFERENCE = [
    ((0.0, E, 10, 15), 10.56814477557951),
    ((0.0, 2.0, 5, 12), 9.0579673971355185),
    ((0.0, 1.5, 1, 2), 1.0276264426568465),
    ((0.0, 2.5, 12, 25), 22.653513112415644),
    ((1e-6, 2.5, 6, 12), 10.173147001320992),
    ((0.25, 2.5, 12, 25), 22.121452483093622),
    ((0.5, 2.2, 3, 7), 5.050292557343132),
    ((0.5, 3.0, 4, 9), 7.1716781333430759),
    ((1.0, 10.0, 2, 5), 3.233),
    ((1.0, 4.0, 1, 2), 1.0),
]
OPT_REFERENCE = [
    ((E, 10, 15), 14.985403552138234),
    ((2.0, 3, 5), 4.5625),
    ((10.0, 2, 5), 4.9097),
    ((1.5, 1, 2), 4 / 3),
]


@pytest.fixture(scope="module")
def c1():
    return load_curve_csv(DATA / "example_c1_f1.csv"), load_curve_csv(DATA / "example_c1_f2.csv")


def test_market_spec():
    spec = R.MarketSpec(3, 5, 2)
    assert spec.total_buyers == 7 and spec.supply == 3
    assert R.MarketSpec(3, 5, 2, s=2).supply == 2
    for bad in [(0, 5), (6, 5), (3, 5, -1), (3, 5, 0, 4)]:
        with pytest.raises(ValueError):
            R.MarketSpec(*bad)


@pytest.mark.parametrize("args,ref", VCG_REFERENCE)
def test_vcg_closed_form_frozen(args, ref):
    assert R.rev_vcg_tgpd_closed(*args) == pytest.approx(ref, rel=1e-13)


@pytest.mark.parametrize("args,ref", VCG_REFERENCE)
def test_vcg_quadrature_frozen(args, ref):
    lam, r, m, N = args
    assert R.rev_vcg(TruncatedGPD(lam, r), m, N) == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize("args,ref", OPT_REFERENCE)
def test_opt_frozen(args, ref):
    r, m, n = args
    for lam in (0.0, 1.0):
        if r <= E or lam == 1.0:
            assert R.rev_opt_tgpd_closed(lam, r, m, n) == pytest.approx(ref, rel=1e-13)
            assert R.rev_opt(TruncatedGPD(lam, r), m, n) == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize("n,t", [(n, t) for n in (1, 2, 3, 5, 8, 12) for t in (1, 2, 5, 9) if n + t <= 25])
@pytest.mark.parametrize("r", [1.1, 2.0, E])
def test_balanced_mhr_against_alternating_sum(n, t, r):
    ref = float(oracles.vcg_tgpd(0, r if r != E else oracles.mp.e, n, n + t))
    assert R.rev_vcg_tgpd_closed(0.0, r, n, n + t) == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize("lam", [0.0, 1e-6, 1e-4, 0.25, 0.5, 1.0])
@pytest.mark.parametrize("r", [1.2, 2.0, 2.7])
@pytest.mark.parametrize("m,N", [(1, 2), (4, 9), (30, 41), (120, 300)])
def test_closed_form_matches_quadrature(lam, r, m, N):
    closed = R.rev_vcg_tgpd_closed(lam, r, m, N)
    quad = R.rev_vcg(TruncatedGPD(lam, r), m, N)
    assert closed == pytest.approx(quad, rel=1e-10)
    assert R.rev_opt_tgpd_closed(lam, r, m, N) == pytest.approx(R.rev_opt(TruncatedGPD(lam, r), m, N),
                                                                rel=1e-10)


def test_subnormal_lambda_is_the_lambda_zero_limit():
    a = R.rev_vcg_tgpd_closed(0.0, 2.5, 6, 12)
    assert R.rev_vcg_tgpd_closed(1e-300, 2.5, 6, 12) == pytest.approx(a, rel=1e-14)
    assert R.rev_vcg(TruncatedGPD(2e-311, 2.5), 6, 12) == pytest.approx(a, rel=1e-12)


def test_lambda_one_oracle_at_tight_tolerance():
    tight = QuadratureConfig(abs_tol=1e-12, rel_tol=1e-13)
    assert R.rev_vcg_tgpd_closed(1.0, 4.0, 1, 2) == pytest.approx(
        R.rev_vcg(TruncatedGPD(1.0, 4.0), 1, 2, tight), abs=1e-12)


def test_point_mass_identities():
    for lam in (0.0, 0.5, 1.0):
        d = TruncatedGPD(lam, 1.0)
        assert R.rev_vcg(d, 10, 15) == pytest.approx(10.0, abs=1e-12)
        assert R.rev_vcg_tgpd_closed(lam, 1.0, 10, 15) == 10.0
        assert R.rev_opt(d, 4, 9) == pytest.approx(4.0, abs=1e-12)
    ident = make_piecewise_curve([(0, 0), (1, 1)])
    assert R.rev_vcg(ident, 3, 8) == pytest.approx(3.0, abs=1e-12)
    assert R.rev_sl_vcg(ident, 2, 8) == pytest.approx(2.0, abs=1e-12)


def test_all_units_sold_when_supply_covers_buyers():
    # m >= N: the clearing price is the absent (m+1)-th value at quantile 1
    assert R.rev_vcg(TruncatedGPD(0.0, 2.0), 5, 5) == pytest.approx(0.0, abs=1e-14)


@pytest.mark.parametrize("lam,r", [(0.0, 1.3), (0.0, E), (0.5, 3.9), (1.0, 40.0)])
@pytest.mark.parametrize("n", [1, 2, 7, 60])
def test_balanced_optimal_revenue_is_n(lam, r, n):
    assert R.rev_opt(TruncatedGPD(lam, r), n, n) == pytest.approx(n, abs=1e-9)
    assert R.rev_opt_tgpd_closed(lam, r, n, n) == n


def test_example_c1_values(c1):
    f1, f2 = c1
    assert R.rev_vcg(f1, 2, 4) == pytest.approx(2.27734375, abs=1e-8)
    assert R.rev_opt(f1, 2, 3) == pytest.approx(2.234375, abs=1e-8)
    assert R.rev_vcg(f2, 2, 4) == pytest.approx(2.2544642857142857, abs=1e-8)
    assert R.rev_opt(f2, 2, 3) == pytest.approx(2.1875, abs=1e-8)


def test_example11_revenues():
    c = Example11Curve(3)
    assert R.rev_opt(c, 3, 3) == pytest.approx(8 / 3, abs=1e-9)
    assert R.rev_vcg(c, 3, 5) < 2.5
    assert R.rev_vcg(c, 3, 6) >= 8 / 3 - 1e-9


def test_supply_limited():
    d = TruncatedGPD(0.0, E)
    assert R.rev_sl_vcg(d, 7, 12) == R.rev_vcg(d, 7, 12)
    # withholding units raises the clearing price on this heavy-tailed curve
    assert R.rev_sl_vcg(d, math.ceil(0.8 * 40), 54) > R.rev_vcg(d, 40, 54)
    with pytest.raises(ValueError):
        R.rev_sl_vcg(d, 12, 12)


def test_argument_validation():
    with pytest.raises(ValueError):
        R.rev_vcg_tgpd_closed(0.0, 2.0, 5, 5)
    with pytest.raises(ValueError):
        R.rev_vcg_tgpd_closed(0.0, 3.0, 2, 5)
    with pytest.raises(ValueError):
        R.rev_opt(TruncatedGPD(0, 2), 4, 3)


def test_beta_tail_stats_limits():
    near_one = R.beta_tail_stats(10, 5, 1 - 1e-12)
    # P(X > x) is of order (1 - x)^t
    assert near_one.p_plus < 1e-50 and near_one.h < 1e-60
    near_zero = R.beta_tail_stats(10, 5, 1e-9)
    assert near_zero.p_plus == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(ValueError):
        R.beta_tail_stats(10, 5, 1.0)


def test_dlog_matches_finite_difference_near_one():
    a = R.dlog_rev_vcg_dqstar(10, 5, 0.95)
    b = R.fd_dlog_rev_vcg(0.0, 10, 15, 0.95)
    assert a == pytest.approx(b, rel=1e-4)


def test_dlog_at_inverse_e_closed_form():
    q = 1 / E
    for n, t in [(10, 5), (50, 23), (100, 45), (594, 271)]:
        s = R.beta_tail_stats(n, t, q)
        c = 1 - s.p_plus
        val = R.dlog_rev_vcg_dqstar(n, t, q)
        assert val <= 0
        if c > 1e-12:
            assert val == pytest.approx(-E * c / (c + s.h), rel=1e-10)


def test_dlog_sign_agrees_with_finite_differences():
    rng = np.random.default_rng(7)
    for _ in range(50):
        n = int(rng.integers(1, 101))
        t = int(rng.integers(1, n + 1))
        q = float(rng.uniform(1 / E + 0.01, 0.99))
        a = R.dlog_rev_vcg_dqstar(n, t, q)
        b = R.fd_dlog_rev_vcg(0.0, n, n + t, q)
        assert np.sign(a) == np.sign(b)
        assert a == pytest.approx(b, rel=1e-3)


def test_dlog_singular_near_one():
    with pytest.raises(R.SingularDerivative):
        R.dlog_rev_vcg_dqstar(10, 5, 1 - 1e-8)
