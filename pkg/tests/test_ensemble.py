import math

import numpy as np
import pytest

from ldpc_forge import reference as R
from ldpc_forge.ensemble import (
    PUNCTURED,
    TRANSMITTED,
    ChkType,
    DegreeDistribution,
    InvalidEnsembleError,
    MetEnsemble,
    VarType,
    design_rate,
    from_dict,
    met_mirror,
    stability_bound,
    to_json,
    validate,
    validate_met,
)
from ldpc_forge.parameterize import (
    DegreeStructure,
    Infeasible,
    InfeasibleStructureError,
    MetStructure,
    met_structure,
    parameterize,
)

REG36 = DegreeDistribution({3: 1.0}, {6: 1.0})


# --- validation -----------------------------------------------------------

def test_regular_passes_validation():
    rep = validate(REG36, 0.5)
    assert rep.passed
    assert abs(rep.residuals["rate"]) < 1e-15


def test_rounded_table_passes_import_tolerance():
    rep = validate(R.standard("AR_2_3_6_20"), 0.5, tol=0.01)
    assert rep.passed
    assert max(abs(r) for r in rep.residuals.values()) < 0.01


def test_lambda_sum_violation_reported():
    dd = DegreeDistribution({2: 0.5, 3: 0.4}, {6: 1.0})
    rep = validate(dd, 0.5, tol=1e-6)
    assert not rep.passed
    bad = {v.constraint: v.residual for v in rep.violations}
    assert bad["lambda_sum"] == pytest.approx(-0.1, abs=1e-12)


def test_met_reference_rate_passes():
    rep = validate_met(R.met_reference_as_printed(), 0.5)
    assert abs(rep.residuals["rate"]) < 1e-12
    # L(1,1) = 1.2 and R(1) = 0.7 as tabulated
    met = R.met_reference_as_printed()
    assert met.var_coeffs().sum() == pytest.approx(1.2)
    assert met.chk_coeffs().sum() == pytest.approx(0.7)


def test_met_reference_corrected_balances_every_class():
    assert validate_met(R.met_reference(), 0.5).passed


def test_met_mirror_regular_passes():
    m = met_mirror(REG36)
    assert m.var_types[0].coeff == pytest.approx(1.0)
    assert m.chk_types[0].coeff == pytest.approx(0.5)
    assert m.var_edges()[0] == pytest.approx(3.0)
    assert m.chk_edges()[0] == pytest.approx(3.0)
    assert validate_met(m, 0.5).passed


def test_met_ar_as_printed_flags_edge_balance():
    rep = validate_met(R.met_ar_as_printed(), 0.5)
    names = {v.constraint for v in rep.violations}
    assert {"edge_balance:class1", "edge_balance:class2"} <= names
    met = R.met_ar_as_printed()
    assert met.var_edges()[0] == pytest.approx(1.6950, abs=1e-4)
    assert met.chk_edges()[0] == pytest.approx(0.9150, abs=1e-4)
    assert rep.residuals["rate"] == pytest.approx(0.195, abs=1e-4)


# --- rate and stability ---------------------------------------------------

def test_rate_regular():
    assert design_rate(REG36) == pytest.approx(0.5, abs=1e-15)


def test_rate_rounded_table():
    assert design_rate(R.standard("AR_2_3_6_20")) == pytest.approx(1 - 0.131400 / 0.261060, abs=1e-4)
    assert round(design_rate(R.standard("AR_2_3_6_20")), 4) == 0.4967


def test_rate_met_reference():
    assert design_rate(R.met_reference()) == pytest.approx(0.5, abs=1e-12)


def test_rate_zero_guard():
    with pytest.raises(InvalidEnsembleError):
        design_rate(DegreeDistribution({2: 0.0}, {6: 1.0}))


def test_stability_bound_values():
    assert stability_bound(REG36) == math.inf
    assert stability_bound(R.standard("AR_2_3_6_20")) == pytest.approx(1 / 1.99627, abs=1e-5)
    assert stability_bound(DegreeDistribution({2: 0.5, 3: 0.5}, {6: 1.0})) == pytest.approx(0.4)


def test_stability_bound_matches_polynomial_derivative():
    for name in R.TABLE_STANDARD:
        dd = R.standard(name)
        lam = np.polynomial.Polynomial(dd.lambda_poly())
        rho = np.polynomial.Polynomial(dd.rho_poly())
        direct = 1.0 / (lam.deriv()(0.0) * rho.deriv()(1.0))
        assert stability_bound(dd) == pytest.approx(direct, rel=1e-12)


# --- structural checks ----------------------------------------------------

@pytest.mark.parametrize("lam", [{1: 1.0}, {2.5: 1.0}, {2: 1.2}, {2: -0.1}, {}])
def test_malformed_distributions_rejected(lam):
    with pytest.raises(InvalidEnsembleError):
        DegreeDistribution(lam, {6: 1.0})


def test_bad_received_degree_rejected():
    with pytest.raises(InvalidEnsembleError):
        MetEnsemble(1, (VarType((1, 1), (3,), 1.0),), (ChkType((6,), 0.5),))


def test_negative_met_coefficient_rejected():
    with pytest.raises(InvalidEnsembleError):
        MetEnsemble(1, (VarType(TRANSMITTED, (3,), -1.0),), (ChkType((6,), 0.5),))


def test_json_round_trip():
    for ens, rate in ((R.standard("AR_2_3_6_20"), 0.5), (R.met_reference(), 0.5)):
        back, r = from_dict(__import__("json").loads(to_json(ens, rate)))
        assert back == ens and r == rate


def test_json_schema_keys():
    import json

    doc = json.loads(to_json(R.met_reference(), 0.5))
    assert set(doc) == {"type", "m_e", "rate", "var_types", "chk_types"}
    assert set(doc["var_types"][0]) == {"b", "d", "coeff"}
    assert set(doc["chk_types"][0]) == {"d", "coeff"}
    doc = json.loads(to_json(R.standard("AR_2_3_6_20"), 0.5))
    assert set(doc) == {"type", "rate", "lambda", "rho"}
    assert doc["lambda"]["2"] == 0.2962


# --- parameterization -----------------------------------------------------

def test_free_dimension_standard():
    assert parameterize(DegreeStructure((2, 3, 7, 25), (7, 8), 0.5)).E == 3
    assert parameterize(DegreeStructure((2, 3, 6, 20), (7, 8), 0.5)).E == 3


def test_free_dimension_zero():
    d = parameterize(DegreeStructure((3,), (6,), 0.5))
    assert d.E == 0
    dd = d.embed(np.zeros(0))
    assert dd.lam == pytest.approx({3: 1.0}, abs=1e-12)
    assert dd.rho == pytest.approx({6: 1.0}, abs=1e-12)


def test_structure_without_solution():
    # rate 1/2 with checks of degree 3 needs sum lambda_i / i = 2/3 > 1/2
    with pytest.raises(InfeasibleStructureError):
        parameterize(DegreeStructure((2, 3), (3,), 0.5))


def test_determined_structure_embeds_unique_point():
    d = parameterize(DegreeStructure((2, 3), (6,), 0.5))
    assert d.E == 0
    dd = d.embed(np.zeros(0))
    assert dd.lam == pytest.approx({3: 1.0}, abs=1e-12)


def test_dependent_designation_follows_convention():
    d = parameterize(DegreeStructure((2, 3, 6, 20), (7, 8), 0.5))
    assert d.free_names == ["lambda_2", "lambda_3", "lambda_6"]
    assert sorted(d.dependent_names) == ["lambda_20", "rho_7", "rho_8"]


def test_embed_table_free_values():
    d = parameterize(DegreeStructure((2, 3, 6, 20), (7, 8), 0.5))
    dd = d.embed([0.2962, 0.1749, 0.2418])
    assert dd.lam[20] == pytest.approx(0.2871, abs=1e-12)
    # independent solve of the normalization and rate rows for rho_7, rho_8
    il = sum(f / d for d, f in dd.lambda_terms)
    rho7, rho8 = np.linalg.solve([[1.0, 1.0], [1 / 7, 1 / 8]], [1.0, 0.5 * il])
    assert dd.rho[7] == pytest.approx(rho7, abs=1e-12)
    assert dd.rho[8] == pytest.approx(rho8, abs=1e-12)
    assert dd.rho[7] == pytest.approx(0.3094, abs=2e-3)
    assert validate(dd, 0.5).passed


def test_embed_out_of_range_dependent_is_infeasible():
    d = parameterize(DegreeStructure((2, 3, 6, 20), (7, 8), 0.5))
    out = d.embed([0.5, 0.3, 0.3])  # lambda_20 = -0.1
    assert isinstance(out, Infeasible)
    assert "lambda_20" in out.reason


def test_embed_rejects_out_of_cube_input():
    d = parameterize(DegreeStructure((2, 3, 6, 20), (7, 8), 0.5))
    with pytest.raises(ValueError):
        d.embed([1.5, 0.0, 0.0])


def test_embed_snaps_tiny_coefficients():
    d = parameterize(DegreeStructure((2, 3, 6, 20), (7, 8), 0.5))
    dd = d.embed([0.35, 5e-9, 0.5])
    assert 3 not in dd.lam


def test_extract_round_trip_table_ensemble():
    dd = R.standard("AR_2_3_6_20")
    d = parameterize(DegreeStructure((2, 3, 6, 20), (7, 8), 0.5))
    v = d.extract(dd)
    back = d.embed(v)
    assert np.allclose(back.lambda_poly()[[1, 2, 5]], dd.lambda_poly()[[1, 2, 5]], atol=1e-12)


def test_met_fig3_structure_free_dimension():
    # a3 = a4 tied through the degree-1 class: punctured and degree-1 nodes share class 4
    s = met_structure(4, [(False, (2, 0, 0, 0)), (False, (3, 0, 0, 0)),
                          (True, (0, 3, 3, 0)), (False, (0, 0, 0, 1))],
                      [(4, 1, 0, 0), (3, 2, 0, 0), (0, 0, 3, 1)], 0.5)
    d = parameterize(s)
    ens = d.embed(d.extract(R.met_reference()))
    assert validate_met(ens, 0.5).passed
    assert ens.var_coeffs() == pytest.approx(R.met_reference().var_coeffs(), abs=1e-12)


def test_met_structure_rejects_bad_received_degree():
    with pytest.raises(ValueError):
        MetStructure(1, (((1, 1), (3,)),), ((6,),), 0.5)


def test_punctured_constant():
    assert PUNCTURED == (1, 0) and TRANSMITTED == (0, 1)
