import numpy as np
import pytest

from ldpc_forge import reference as R
from ldpc_forge.optimize import ConfigError, OptimizerConfig
from ldpc_forge.parameterize import DegreeStructure, MetStructure, parameterize
from ldpc_forge.structure import (
    CostSurface,
    MetSpec,
    StandardSpec,
    StructureConstraintError,
    StructureObjective,
    inner_surface,
    outer_ar,
    outer_dife,
    outer_objective,
    outer_random,
    structure_seed,
    structure_surface,
)
from ldpc_forge.threshold import CandidateEvaluator

SPEC = StandardSpec(0.5, 4, 2, 30, 15)
SMALL_INNER = OptimizerConfig(NP=8, stall_limit=1)
# single admissible structure: the (3,6)-regular ensemble
REGULAR_ONLY = MetSpec(1, ((False, (3,)),), (("k",),), (("k", 6, 6),))


# --- specifications and gates ---------------------------------------------

def test_standard_space_and_names():
    box = SPEC.space()
    assert box.integer and box.dim == 6
    assert list(box.lo) == [2] * 6
    assert list(box.hi) == [30] * 4 + [15] * 2
    assert SPEC.coord_names == ["v1", "v2", "v3", "v4", "c1", "c2"]


def test_decode_merges_repeated_degrees():
    s = SPEC.decode([30, 2, 7, 2, 9, 8])
    assert s.lambda_degrees == (2, 7, 30) and s.rho_degrees == (8, 9)


def test_encode_round_trip():
    s = DegreeStructure((2, 3, 7, 30), (8, 9), 0.5)
    assert SPEC.decode(SPEC.encode(s)) == s
    short = DegreeStructure((3,), (6,), 0.5)
    assert SPEC.decode(SPEC.encode(short)) == short


@pytest.mark.parametrize("s", [
    DegreeStructure((2, 3, 7, 31), (8, 9), 0.5),
    DegreeStructure((2, 3, 4, 5, 6), (8,), 0.5),
    DegreeStructure((2, 3), (8, 9, 10), 0.5),
    DegreeStructure((2, 3), (16,), 0.5),
    DegreeStructure((2, 3), (8,), 0.4),
])
def test_gate_rejects(s):
    with pytest.raises(StructureConstraintError):
        SPEC.gate(s)


def test_objective_rejects_gate_violation_before_evaluation():
    obj = StructureObjective(SPEC, SMALL_INNER)
    with pytest.raises(StructureConstraintError):
        obj.evaluate_structure(DegreeStructure((2, 3, 7, 31), (8, 9), 0.5))
    assert obj.inner_evals == 0 and not obj.cache


@pytest.mark.parametrize("kw", [dict(lambda_max=0), dict(dv_max=1), dict(lambda_max=1),
                                dict(gamma_max=1.5)])
def test_standard_spec_rejects_bad_limits(kw):
    with pytest.raises(ConfigError):
        StandardSpec(**kw)


def test_met_spec_expressions():
    spec = MetSpec(2, ((False, ("i", 0)), (True, (0, "j+1"))), (("j-1", 2),),
                   (("i", 2, 4), ("j", 3, 5)))
    s = spec.decode([3, 4])
    assert s.var_types == (((0, 1), (3, 0)), ((1, 0), (0, 5)))
    assert s.chk_types == ((3, 2),)


@pytest.mark.parametrize("bad", [
    dict(var_slots=((False, ("x",)),)),  # unknown coordinate
    dict(var_slots=((False, (3, 1)),)),  # wrong length
    dict(coords=(("k", 7, 6),)),  # empty range
    dict(chk_slots=(("k*2",),)),  # not an expression
])
def test_met_spec_rejects_bad_templates(bad):
    base = dict(m_e=1, var_slots=((False, (3,)),), chk_slots=(("k",),), coords=(("k", 6, 6),))
    base.update(bad)
    with pytest.raises(ConfigError):
        MetSpec(**base)


def test_met_gate_degree_one_classes():
    spec = MetSpec(2, ((False, (3, 0)), (False, (0, 1))), ((6, 1),), (), degree_one_classes=(2,))
    spec.gate(spec.decode([]))
    other = MetSpec(2, ((False, (3, 0)), (False, (0, 1))), ((6, 1),), ())
    with pytest.raises(StructureConstraintError):
        other.gate(other.decode([]))


def test_met_gate_max_degree():
    spec = MetSpec(1, ((False, ("k",)),), ((6,),), (("k", 2, 12),), max_degree=10)
    spec.gate(spec.decode([10]))
    with pytest.raises(StructureConstraintError):
        spec.gate(spec.decode([11]))


def test_met_spec_from_dict():
    doc = {"m_e": 1, "var_types": [{"b": [0, 1], "d": [3]}], "chk_types": [{"d": ["k"]}],
           "coords": {"k": [5, 7]}, "rate": 0.5}
    spec = MetSpec.from_dict(doc)
    assert spec.coord_names == ["k"]
    with pytest.raises(ConfigError):
        MetSpec.from_dict({"m_e": 1})


# --- canonical keys and seeds ---------------------------------------------

def test_equal_sets_give_equal_keys():
    a = DegreeStructure((30, 2, 7, 3), (9, 8), 0.5)
    b = DegreeStructure((2, 3, 7, 30, 7), (8, 9), 0.5)
    assert a.key == b.key
    assert structure_seed(4, a.key) == structure_seed(4, b.key)
    assert structure_seed(4, a.key) != structure_seed(5, a.key)


def test_met_key_ignores_slot_order():
    a = MetStructure(2, (((0, 1), (3, 0)), ((0, 1), (0, 2))), ((3, 1), (2, 2)), 0.5)
    b = MetStructure(2, (((0, 1), (0, 2)), ((0, 1), (3, 0))), ((2, 2), (3, 1)), 0.5)
    assert a.key == b.key


def test_cached_objective_is_order_independent():
    structs = [DegreeStructure((2, 3), (6,), 0.5), DegreeStructure((2, 3, 5), (6,), 0.5)]
    one = StructureObjective(SPEC, SMALL_INNER, seed=3)
    two = StructureObjective(SPEC, SMALL_INNER, seed=3)
    fwd = [one.evaluate_structure(s).threshold for s in structs]
    rev = [two.evaluate_structure(s).threshold for s in structs[::-1]][::-1]
    assert fwd == rev
    # a second request is served from the cache
    before = one.inner_evals
    assert one.evaluate_structure(structs[0]).threshold == fwd[0]
    assert one.inner_evals == before


# --- objective ------------------------------------------------------------

def test_outer_objective_regular():
    th = outer_objective(DegreeStructure((3,), (6,), 0.5), SPEC, SMALL_INNER)
    assert th == pytest.approx(0.42943, abs=1e-4)


def test_infeasible_structure_scores_zero():
    obj = StructureObjective(SPEC, SMALL_INNER)
    out = obj.evaluate_structure(DegreeStructure((2, 3), (3,), 0.5))
    assert out.threshold == 0.0 and out.ensemble is None and out.reason
    assert obj.score(SPEC.encode(DegreeStructure((2, 3), (3,), 0.5))) == 0.0


@pytest.mark.slow
def test_best_known_structure_reaches_target():
    th = outer_objective(DegreeStructure((2, 3, 7, 30), (8, 9), 0.5), SPEC)
    assert th >= 0.4950


# --- outer searches -------------------------------------------------------

@pytest.mark.parametrize("fn", [outer_ar, outer_dife, outer_random])
def test_single_structure_spec(fn):
    res = fn(REGULAR_ONLY, OptimizerConfig(NP=4, SR_init=15.0, RM=1.0))
    assert res.threshold == pytest.approx(0.42943, abs=1e-4)
    assert res.structure == MetStructure(1, (((0, 1), (3,)),), ((6,),), 0.5)
    assert res.metrics.NOG == 1


def test_outer_search_deterministic_and_elitist():
    spec = StandardSpec(0.5, 2, 1, 6, 8)
    cfg = OptimizerConfig(NP=6, RM=1.0, SR_init=3.0, seed=2)
    a = outer_ar(spec, cfg, SMALL_INNER)
    b = outer_ar(spec, cfg, SMALL_INNER)
    assert a.trace.to_csv(timing=False) == b.trace.to_csv(timing=False)
    assert a.structure == b.structure and a.threshold == b.threshold
    assert np.all(np.diff(a.trace.best_thresholds) >= 0)
    spec.gate(a.structure)
    assert a.inner_evals > 0


def test_random_search_budget():
    spec = StandardSpec(0.5, 2, 1, 6, 8)
    res = outer_random(spec, OptimizerConfig(NP=4, seed=1), SMALL_INNER, inner_budget=60)
    assert res.inner_evals >= 60
    assert res.metrics.NOG > 0


# --- cost surfaces --------------------------------------------------------

FIG2 = DegreeStructure((2, 3, 7, 25), (7, 8), 0.5)


def test_inner_surface_single_cell_matches_candidate():
    surf = inner_surface(FIG2, ("lambda_2", "lambda_7"), [0.2774], [0.2626], {"lambda_3": 0.2024})
    ev = CandidateEvaluator(parameterize(FIG2))
    assert surf.values.shape == (1, 1)
    assert surf.values[0, 0] == ev.evaluate_candidate([0.2774, 0.2024, 0.2626])
    assert ev.metrics.NTT == 1


def test_inner_surface_marks_infeasible_cells():
    surf = inner_surface(FIG2, ("lambda_2", "lambda_7"), [0.2774, 0.9], [0.2626],
                         {"lambda_3": 0.2024})
    assert surf.feasible.tolist() == [[True], [False]]
    assert surf.values[1, 0] == 0.0


@pytest.mark.parametrize("axes, bindings", [
    (("lambda_2", "lambda_2"), {"lambda_3": 0.2}),
    (("lambda_2", "lambda_99"), {"lambda_3": 0.2}),
    (("lambda_2", "lambda_7"), {}),
    (("lambda_2", "lambda_7"), {"lambda_2": 0.2, "lambda_3": 0.2}),
    (("lambda_2", "lambda_7"), {"rho_7": 0.2, "lambda_3": 0.2}),
])
def test_inner_surface_misbinding(axes, bindings):
    with pytest.raises(ConfigError):
        inner_surface(FIG2, axes, [0.2], [0.2], bindings)


def test_structure_surface_single_cell_and_csv():
    spec = MetSpec(1, ((False, ("a",)), (False, ("b",))), (("k",),),
                   (("a", 2, 4), ("b", 3, 6), ("k", 6, 6)))
    surf = structure_surface(spec, ("a", "b"), [3], [3], {"k": 6}, SMALL_INNER)
    assert surf.values[0, 0] == pytest.approx(0.42943, abs=1e-4)
    assert surf.to_csv().splitlines()[0] == "coord1,coord2,threshold,feasible"
    with pytest.raises(ConfigError):
        structure_surface(spec, ("a", "z"), [3], [3], {}, SMALL_INNER)


def _surface(values, feasible=None):
    v = np.asarray(values, dtype=float)
    f = np.ones_like(v, dtype=bool) if feasible is None else np.asarray(feasible)
    return CostSurface("x", "y", np.arange(v.shape[0]), np.arange(v.shape[1]), v, f)


def test_local_maxima_two_peaks():
    s = _surface([[0.1, 0.2, 0.1, 0.3, 0.1]])
    assert s.local_maxima() == [[(0, 1)], [(0, 3)]]


def test_local_maxima_plateau_counts_once():
    s = _surface([[0.1, 0.3, 0.3, 0.2]])
    assert s.local_maxima() == [[(0, 1), (0, 2)]]


def test_connected_to_max():
    s = _surface([[0.5, 0.4, 0.45, 0.3],
                  [0.3, 0.2, 0.1, 0.1]])
    reach = s.connected_to_max(decimals=None)
    assert reach.tolist() == [[True, True, False, False], [True, True, True, True]]
    mono = _surface([[0.1, 0.2, 0.3], [0.2, 0.3, 0.4]])
    assert mono.connected_to_max().all()


def test_infeasible_cells_excluded_from_maxima():
    s = _surface([[0.1, 0.0, 0.2]], feasible=[[True, False, True]])
    assert s.local_maxima() == [[(0, 0)], [(0, 2)]]
    assert s.global_max == 0.2
