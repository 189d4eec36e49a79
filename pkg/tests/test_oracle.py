import math

import pytest

from bkcc import oracle, revenue
from bkcc.cc import CCQuery, cc_exact
from bkcc.dist import Example11Curve, TruncatedGPD
from bkcc.oracle import McConfig, mc_gap, mc_rev_opt, mc_rev_vcg

CFG = McConfig(trials=200_000, seed=11)


def test_config_validation():
    for kwargs in [dict(trials=0), dict(batch=0), dict(seed=-1), dict(seed=1 << 64), dict(threads=0)]:
        with pytest.raises(ValueError):
            McConfig(**kwargs)


def test_point_mass_is_exact():
    d = TruncatedGPD(0.5, 1.0)
    est = mc_rev_vcg(d, 4, 9, CFG)
    assert est.mean == 4.0 and est.stderr == 0.0 and est.trials == CFG.trials
    opt = mc_rev_opt(d, 4, 9, cfg=CFG)
    assert opt.mean == 4.0 and opt.stderr == 0.0
    for k in (1, 3):
        gap = mc_gap(d, 4, 4, k, 1.0, CFG)
        assert gap.mean == 0.0 and gap.stderr == 0.0


def test_vcg_agrees_with_quadrature():
    d = TruncatedGPD(0.0, math.e)
    est = mc_rev_vcg(d, 10, 15, CFG)
    assert abs(est.mean - revenue.rev_vcg(d, 10, 15)) <= 4 * est.stderr


def test_lower_bound_instance():
    est = mc_rev_vcg(Example11Curve(3), 3, 5, McConfig(1_000_000, seed=3))
    assert est.mean + 3 * est.stderr < 2.5
    opt = mc_rev_opt(Example11Curve(3), 3, 3, cfg=CFG)
    assert abs(opt.mean - 8 / 3) <= 4 * opt.stderr


@pytest.mark.parametrize("lam,r", [(0.0, 2.0), (0.5, 3.0), (1.0, 20.0)])
def test_balanced_optimal_is_n(lam, r):
    est = mc_rev_opt(TruncatedGPD(lam, r), 5, 5, cfg=CFG)
    assert abs(est.mean - 5) <= 4 * est.stderr


def test_gap_at_certified_k_and_at_zero():
    res = cc_exact(CCQuery(0.0, 10, 10, 1.0))
    d = TruncatedGPD(0.0, res.worst_r)
    est = mc_gap(d, 10, 10, res.k, 1.0, CFG)
    assert est.mean >= -3 * est.stderr
    zero = mc_gap(TruncatedGPD(0.0, 2.0), 4, 4, 0, 1.0, CFG)
    assert zero.mean < 0


def test_results_independent_of_threads():
    d = TruncatedGPD(0.5, 2.0)
    cfg = McConfig(100_000, seed=5, batch=4096)
    one = mc_rev_vcg(d, 3, 6, cfg)
    four = mc_rev_vcg(d, 3, 6, McConfig(100_000, seed=5, batch=4096, threads=4))
    assert one == four
    assert mc_rev_vcg(d, 3, 6, McConfig(100_000, seed=6, batch=4096)) != one


def test_argument_validation():
    d = TruncatedGPD(0.0, 2.0)
    with pytest.raises(ValueError):
        mc_rev_vcg(d, 0, 3)
    with pytest.raises(ValueError):
        mc_rev_opt(d, 4, 3)
    with pytest.raises(ValueError):
        mc_gap(d, 2, 3, -1, 1.0)


def test_kth_highest_beyond_row_is_zero():
    import numpy as np
    v = np.array([[3.0, 1.0, 2.0]])
    assert oracle._kth_highest(v, 1)[0] == 3.0
    assert oracle._kth_highest(v, 4)[0] == 0.0
