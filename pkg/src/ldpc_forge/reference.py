"""Published ensembles used as fixtures and benchmarks.

The standard distributions are the best rate-1/2 results reported for AR,
Dif.E and Dif.E.R on three fixed degree sets, plus the jointly optimized
sets.  Coefficients are 4-decimal rounded, so some columns do not sum to
one exactly; use ``.normalized()`` before running density evolution.
"""
from __future__ import annotations

from .ensemble import PUNCTURED, TRANSMITTED, ChkType, DegreeDistribution, MetEnsemble, VarType

RATE = 0.5

# (name -> lambda, rho, reported epsilon*)
TABLE_STANDARD = {
    "AR_2_3_6_20": ({2: 0.2962, 3: 0.1749, 6: 0.2418, 20: 0.2872}, {7: 0.3094, 8: 0.6976}, 0.4939),
    "DifE_2_3_6_20": ({2: 0.2985, 3: 0.1740, 6: 0.2485, 20: 0.2790}, {7: 0.3533, 8: 0.6467}, 0.4940),
    "DifER_2_3_6_20": ({2: 0.2987, 3: 0.1741, 6: 0.2489, 20: 0.2784}, {7: 0.3571, 8: 0.6429}, 0.4940),
    "AR_2_3_7_25": ({2: 0.2774, 3: 0.2020, 7: 0.2626, 25: 0.2580}, {7: 0.1083, 8: 0.8917}, 0.4949),
    "DifE_2_3_7_25": ({2: 0.2750, 3: 0.2040, 7: 0.2560, 25: 0.2650}, {7: 0.0748, 8: 0.9252}, 0.4949),
    "DifER_2_3_7_25": ({2: 0.2770, 3: 0.2025, 7: 0.2610, 25: 0.2595}, {7: 0.1026, 8: 0.8974}, 0.4949),
    "AR_2_3_7_30": ({2: 0.2621, 3: 0.1816, 7: 0.2670, 30: 0.2893}, {8: 0.6171, 9: 0.3829}, 0.4955),
    "DifE_2_3_7_30": ({2: 0.2630, 3: 0.1810, 7: 0.2690, 30: 0.2870}, {8: 0.6338, 9: 0.3662}, 0.4955),
    "DifER_2_3_7_30": ({2: 0.2636, 3: 0.1801, 7: 0.2706, 30: 0.2856}, {8: 0.6418, 9: 0.3582}, 0.4955),
    "joint_AR": ({2: 0.2610, 3: 0.1832, 7: 0.2640, 30: 0.2918}, {8: 0.6036, 9: 0.3964}, 0.4955),
    "joint_DifE": ({2: 0.2672, 3: 0.1758, 7: 0.2797, 30: 0.2772}, {8: 0.6912, 9: 0.3088}, 0.4954),
    "joint_RS": ({2: 0.2860, 4: 0.3326, 13: 0.1834, 30: 0.1980}, {8: 0.8872, 9: 0.1128}, 0.4915),
}

# rate-1/2 example ensemble as tabulated (rho sums to 1.0003)
EXAMPLE_LAMBDA = {2: 0.2978, 3: 0.1747, 6: 0.2459, 20: 0.2816}
EXAMPLE_RHO = {7: 0.3414, 8: 0.6589}


# fixed-structure problems: (lambda degrees, rho degrees, population size)
FIXED_PROBLEMS = {
    "2_3_6_20": ((2, 3, 6, 20), (7, 8), 50),
    "2_3_7_25": ((2, 3, 7, 25), (7, 8), 100),
    "2_3_7_30": ((2, 3, 7, 30), (8, 9), 100),
}


def standard(name: str) -> DegreeDistribution:
    lam, rho, _ = TABLE_STANDARD[name]
    return DegreeDistribution(lam, rho)


def example_ensemble() -> DegreeDistribution:
    """Example 4-degree ensemble exactly as tabulated (not normalized)."""
    return DegreeDistribution(dict(EXAMPLE_LAMBDA), dict(EXAMPLE_RHO))


def reported_threshold(name: str) -> float:
    return TABLE_STANDARD[name][2]


# 4-class rate-1/2 MET reference with degree-1 and punctured variables
_REF_VARS = (
    (TRANSMITTED, (2, 0, 0, 0), 0.5),
    (TRANSMITTED, (3, 0, 0, 0), 0.3),
    (PUNCTURED, (0, 3, 3, 0), 0.2),
    (TRANSMITTED, (0, 0, 0, 1), 0.2),
)

# check rows as printed; classes 1-3 do not balance
_REF_CHECKS_PRINTED = (((2, 2, 1, 0), 0.4), ((2, 1, 2, 0), 0.1), ((0, 0, 3, 1), 0.2))

# check rows that balance every class with the printed coefficients
_REF_CHECKS = (((4, 1, 0, 0), 0.4), ((3, 2, 0, 0), 0.1), ((0, 0, 3, 1), 0.2))

REF_SIGMA = 0.9682


def _met(var_rows, chk_rows) -> MetEnsemble:
    return MetEnsemble(
        4,
        tuple(VarType(b, d, c) for b, d, c in var_rows),
        tuple(ChkType(d, c) for d, c in chk_rows),
    )


def met_reference() -> MetEnsemble:
    """Reference MET ensemble with balanced check types (threshold sigma* = 0.9682)."""
    return _met(_REF_VARS, _REF_CHECKS)


def met_reference_as_printed() -> MetEnsemble:
    """Reference MET ensemble exactly as tabulated (violates edge balance)."""
    return _met(_REF_VARS, _REF_CHECKS_PRINTED)


def met_ar_as_printed() -> MetEnsemble:
    """MET ensemble reported for AR, as tabulated (violates rate and edge balance)."""
    return _met(
        (
            (TRANSMITTED, (2, 0, 0, 0), 0.5658),
            (TRANSMITTED, (3, 0, 0, 0), 0.1878),
            (PUNCTURED, (0, 3, 3, 0), 0.2464),
            (TRANSMITTED, (0, 0, 0, 1), 0.2464),
        ),
        (((3, 1, 0, 0), 0.2609), ((3, 2, 0, 0), 0.0441), ((0, 0, 3, 1), 0.2464)),
    )
