"""Competition complexity of VCG in multi-unit markets with i.i.d. buyers.

The worst case over regular (or MHR) value distributions reduces to a
one-parameter family of truncated generalized Pareto distributions, so exact
answers come from revenue integrals over uniform order statistics plus a
certified search over the truncation point.
"""

__version__ = "0.1.0"

from .cc import (CCCeilingError, CCQuery, CCResult, GapReport, cc_asymptotic, cc_exact,
                 cc_sl_asymptotic, cc_sl_exact, thm32_bounds, worst_gap)
from .dist import (Example11Curve, PiecewiseCurve, RevenueCurve, TruncatedGPD,
                   fosd_by_cdf, fosd_by_curves, load_curve_csv, make_piecewise_curve, r_max)
from .oracle import McConfig, McEstimate, mc_gap, mc_rev_opt, mc_rev_vcg
from .orderstat import QuadratureConfig, QuadratureError, reg_inc_beta, single_crossing_quantile
from .revenue import (MarketSpec, SingularDerivative, dlog_rev_vcg_dqstar, rev_opt,
                      rev_opt_tgpd_closed, rev_sl_vcg, rev_vcg, rev_vcg_tgpd_closed)

__all__ = [
    "CCCeilingError", "CCQuery", "CCResult", "GapReport", "cc_asymptotic", "cc_exact",
    "cc_sl_asymptotic", "cc_sl_exact", "thm32_bounds", "worst_gap",
    "Example11Curve", "PiecewiseCurve", "RevenueCurve", "TruncatedGPD", "fosd_by_cdf",
    "fosd_by_curves", "load_curve_csv", "make_piecewise_curve", "r_max",
    "McConfig", "McEstimate", "mc_gap", "mc_rev_opt", "mc_rev_vcg",
    "QuadratureConfig", "QuadratureError", "reg_inc_beta", "single_crossing_quantile",
    "MarketSpec", "SingularDerivative", "dlog_rev_vcg_dqstar", "rev_opt", "rev_opt_tgpd_closed",
    "rev_sl_vcg", "rev_vcg", "rev_vcg_tgpd_closed",
]
