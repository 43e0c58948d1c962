import math

import numpy as np
import pytest

import oracles as O
from ldpc_forge import reference as R
from ldpc_forge.bec import bec_converges
from ldpc_forge.ensemble import DegreeDistribution, met_mirror, stability_bound
from ldpc_forge.parameterize import DegreeStructure, parameterize
from ldpc_forge.threshold import BEC, CandidateEvaluator, ensemble_threshold, make_channel, threshold

REG36 = DegreeDistribution({3: 1.0}, {6: 1.0})
# frozen output of oracles.bec_scan_threshold({3: 1}, {6: 1}, 0.42, 0.44, 1e-5, 5000)
REG36_SCAN = 0.42943
# frozen output of oracles.bec_fixed_point_threshold({3: 1}, {6: 1})
REG36_FIXED_POINT = 0.4294398


def test_generic_bisection_on_step_predicate():
    th = threshold(lambda x: x < 0.3, 0.0, 1.0, 1e-6)
    assert th == pytest.approx(0.3, abs=1e-6)


def test_generic_bisection_returns_zero_when_nothing_converges():
    assert threshold(lambda x: False, 0.0, 1.0, 1e-4) == 0.0
    assert threshold(lambda x: False, 0.3, 1.6, 1e-4, check_lo=True) == 0.0


def test_generic_bisection_is_deterministic():
    f = lambda x: x < 0.123456  # noqa: E731
    assert threshold(f, 0.0, 1.0, 1e-5) == threshold(f, 0.0, 1.0, 1e-5)


def test_regular_threshold_matches_scan_and_fixed_point():
    th = BEC().threshold(REG36)
    assert th == pytest.approx(REG36_SCAN, abs=1e-4)
    assert th == pytest.approx(REG36_FIXED_POINT, abs=1e-4)


def test_oracle_constants_are_reproducible():
    assert O.bec_scan_threshold({3: 1.0}, {6: 1.0}, 0.42, 0.44, 1e-5, 5000) == pytest.approx(REG36_SCAN, abs=1e-9)
    assert O.bec_fixed_point_threshold({3: 1.0}, {6: 1.0}) == pytest.approx(REG36_FIXED_POINT, abs=1e-7)


@pytest.mark.parametrize("name", list(R.TABLE_STANDARD))
def test_table_thresholds_match_fixed_point_oracle(name):
    dd = R.standard(name).normalized()
    ref = min(O.bec_fixed_point_threshold(dd.lam, dd.rho), stability_bound(dd))
    assert BEC().threshold(dd) == pytest.approx(ref, abs=2e-5)


def test_reported_fixed_structure_thresholds():
    for name in ("AR_2_3_6_20", "AR_2_3_7_25", "AR_2_3_7_30"):
        th = ensemble_threshold(R.standard(name).normalized())
        assert th == pytest.approx(R.reported_threshold(name), abs=5e-4)


def test_degree_two_only_threshold_is_stability_limit():
    dd = DegreeDistribution({2: 1.0}, {8: 1.0})
    analytic = 1.0 / 7.0
    assert stability_bound(dd) == pytest.approx(analytic)
    assert BEC().threshold(dd) == pytest.approx(analytic, abs=1e-5)
    assert BEC().threshold(dd) <= stability_bound(dd) + 1e-5


@pytest.mark.parametrize("name", list(R.TABLE_STANDARD))
def test_threshold_recheck_and_ceiling(name):
    dd = R.standard(name).normalized()
    ch = BEC()
    th = ch.threshold(dd)
    assert bec_converges(dd, th - ch.bisect_tol).converged
    assert th <= stability_bound(dd) + ch.bisect_tol


def test_met_mirror_threshold_equals_standard():
    for name in ("AR_2_3_6_20", "joint_RS"):
        dd = R.standard(name).normalized()
        assert BEC().threshold(met_mirror(dd)) == pytest.approx(BEC().threshold(dd), abs=1e-6)


def test_make_channel():
    assert make_channel("bec").name == "bec"
    assert make_channel("BI-AWGN").name == "biawgn"
    with pytest.raises(ValueError):
        make_channel("bsc")


# --- candidate scoring ----------------------------------------------------

def test_candidate_regular_point():
    ev = CandidateEvaluator(parameterize(DegreeStructure((3,), (6,), 0.5)))
    assert ev.evaluate_candidate(np.zeros(0)) == pytest.approx(REG36_SCAN, abs=1e-4)


def test_candidate_infeasible_scores_zero():
    ev = CandidateEvaluator(parameterize(DegreeStructure((2, 3, 6, 20), (7, 8), 0.5)))
    assert ev.evaluate_candidate([0.5, 0.3, 0.3]) == 0.0
    assert not ev.feasible([0.5, 0.3, 0.3])


def test_candidate_counters():
    ev = CandidateEvaluator(parameterize(DegreeStructure((2, 3, 6, 20), (7, 8), 0.5)))
    v = parameterize(DegreeStructure((2, 3, 6, 20), (7, 8), 0.5)).extract(
        R.standard("AR_2_3_6_20").normalized())
    a = ev.evaluate_candidate([0.35, 0.0, 0.5])
    b = ev.evaluate_candidate(v)
    assert b > a > 0
    assert ev.metrics.NTT == 2 and ev.metrics.NFE == 1
    # re-scoring the best changes nothing but NTT
    assert ev.evaluate_candidate(v) == b
    assert ev.metrics.NTT == 3 and ev.metrics.NFE == 1
    assert ev.metrics.NFE <= ev.metrics.NTT


def test_candidate_counters_independent_of_batching():
    desc = parameterize(DegreeStructure((2, 3, 6, 20), (7, 8), 0.5))
    rng = np.random.default_rng(3)
    lo, hi = desc.free_bounds()
    vs = lo + rng.random((12, 3)) * (hi - lo)
    one = CandidateEvaluator(desc)
    vals1 = one(vs)
    two = CandidateEvaluator(desc)
    vals2 = np.concatenate([two(vs[:5]), two(vs[5:])])
    assert np.array_equal(vals1, vals2)
    assert (one.metrics.NTT, one.metrics.NFE) == (two.metrics.NTT, two.metrics.NFE)


def test_init_space_is_feasible_bounding_box():
    ev = CandidateEvaluator(parameterize(DegreeStructure((2, 3, 6, 20), (7, 8), 0.5)))
    box = ev.init_space
    assert np.all(box.lo >= 0) and np.all(box.hi <= 1)
    assert box.hi[0] == pytest.approx(0.5238095, abs=1e-6)
    assert not math.isnan(box.hi.sum())
