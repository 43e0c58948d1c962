"""Standard and multi-edge-type (MET) LDPC ensemble representations.

Standard ensembles are held in the edge perspective (lambda_i, rho_i).  MET
ensembles are held in the node perspective: a list of variable-node types
``(b, d, L)`` and check-node types ``(d, R)`` over ``m_e`` edge classes, with a
single physical channel so that every received degree ``b`` is ``(0, 1)``
(transmitted) or ``(1, 0)`` (punctured).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

TOL_SUM = 1e-9
TOL_IMPORT = 1e-2
SNAP = 1e-8

TRANSMITTED = (0, 1)
PUNCTURED = (1, 0)


class InvalidEnsembleError(ValueError):
    """Raised for structurally malformed ensembles."""


def _as_terms(terms, name) -> tuple[tuple[int, float], ...]:
    if isinstance(terms, Mapping):
        items = terms.items()
    else:
        items = terms
    out = {}
    for deg, frac in items:
        deg_i = int(deg)
        if deg_i != float(deg) or deg_i < 2:
            raise InvalidEnsembleError(f"{name}: degree {deg!r} must be an integer >= 2")
        frac = float(frac)
        if not (0.0 <= frac <= 1.0) or math.isnan(frac):
            raise InvalidEnsembleError(f"{name}_{deg_i} = {frac} outside [0, 1]")
        if deg_i in out:
            raise InvalidEnsembleError(f"{name}: duplicate degree {deg_i}")
        out[deg_i] = frac
    if not out:
        raise InvalidEnsembleError(f"{name} has no terms")
    return tuple(sorted(out.items()))


@dataclass(frozen=True)
class DegreeDistribution:
    """Edge-perspective degree distribution pair (lambda, rho).

    ``lambda_terms`` and ``rho_terms`` accept a mapping ``degree -> fraction``
    and are stored as sorted tuples so instances are hashable.
    """

    lambda_terms: tuple[tuple[int, float], ...]
    rho_terms: tuple[tuple[int, float], ...]

    def __post_init__(self):
        object.__setattr__(self, "lambda_terms", _as_terms(self.lambda_terms, "lambda"))
        object.__setattr__(self, "rho_terms", _as_terms(self.rho_terms, "rho"))

    @property
    def lam(self) -> dict[int, float]:
        return dict(self.lambda_terms)

    @property
    def rho(self) -> dict[int, float]:
        return dict(self.rho_terms)

    @property
    def lambda_degrees(self) -> list[int]:
        return [d for d, _ in self.lambda_terms]

    @property
    def rho_degrees(self) -> list[int]:
        return [d for d, _ in self.rho_terms]

    @property
    def dv_max(self) -> int:
        return self.lambda_terms[-1][0]

    @property
    def dc_max(self) -> int:
        return self.rho_terms[-1][0]

    def lambda_poly(self) -> np.ndarray:
        """Dense coefficients of lambda(x) in ascending powers (index = degree - 1)."""
        c = np.zeros(self.dv_max)
        for d, f in self.lambda_terms:
            c[d - 1] = f
        return c

    def rho_poly(self) -> np.ndarray:
        c = np.zeros(self.dc_max)
        for d, f in self.rho_terms:
            c[d - 1] = f
        return c

    def normalized(self) -> "DegreeDistribution":
        """Rescale lambda and rho to sum to one (used for rounded published tables)."""
        sl = sum(f for _, f in self.lambda_terms)
        sr = sum(f for _, f in self.rho_terms)
        return DegreeDistribution(
            {d: f / sl for d, f in self.lambda_terms}, {d: f / sr for d, f in self.rho_terms}
        )

    def to_dict(self, rate: float | None = None) -> dict:
        out = {"type": "standard"}
        out["rate"] = design_rate(self) if rate is None else rate
        out["lambda"] = {str(d): f for d, f in self.lambda_terms}
        out["rho"] = {str(d): f for d, f in self.rho_terms}
        return out


@dataclass(frozen=True)
class VarType:
    b: tuple[int, int]
    d: tuple[int, ...]
    coeff: float

    @property
    def punctured(self) -> bool:
        return tuple(self.b) == PUNCTURED


@dataclass(frozen=True)
class ChkType:
    d: tuple[int, ...]
    coeff: float


@dataclass(frozen=True)
class MetEnsemble:
    """Node-perspective MET ensemble ``L(r, x)``, ``R(x)`` with one channel (m_r = 1)."""

    m_e: int
    var_types: tuple[VarType, ...]
    chk_types: tuple[ChkType, ...]
    m_r: int = field(default=1)

    def __post_init__(self):
        if self.m_r != 1:
            raise InvalidEnsembleError("only a single channel (m_r = 1) is supported")
        if self.m_e < 1:
            raise InvalidEnsembleError("m_e must be >= 1")
        vts = []
        for vt in self.var_types:
            if not isinstance(vt, VarType):
                vt = VarType(**vt) if isinstance(vt, Mapping) else VarType(*vt)
            b = tuple(int(x) for x in vt.b)
            if b not in (TRANSMITTED, PUNCTURED):
                raise InvalidEnsembleError(f"received degree b={list(b)} must be [0,1] or [1,0]")
            d = tuple(int(x) for x in vt.d)
            self._check_degree(d)
            c = float(vt.coeff)
            if not c >= 0.0:
                raise InvalidEnsembleError(f"negative variable coefficient {c}")
            vts.append(VarType(b, d, c))
        cts = []
        for ct in self.chk_types:
            if not isinstance(ct, ChkType):
                ct = ChkType(**ct) if isinstance(ct, Mapping) else ChkType(*ct)
            d = tuple(int(x) for x in ct.d)
            self._check_degree(d)
            c = float(ct.coeff)
            if not c >= 0.0:
                raise InvalidEnsembleError(f"negative check coefficient {c}")
            cts.append(ChkType(d, c))
        if not vts or not cts:
            raise InvalidEnsembleError("MET ensemble needs variable and check types")
        object.__setattr__(self, "var_types", tuple(vts))
        object.__setattr__(self, "chk_types", tuple(cts))

    def _check_degree(self, d):
        if len(d) != self.m_e:
            raise InvalidEnsembleError(f"degree vector {list(d)} has length != m_e={self.m_e}")
        if any(x < 0 for x in d):
            raise InvalidEnsembleError(f"negative degree in {list(d)}")

    # array views used by the evolution kernels
    def var_degrees(self) -> np.ndarray:
        return np.array([vt.d for vt in self.var_types], dtype=np.int64)

    def chk_degrees(self) -> np.ndarray:
        return np.array([ct.d for ct in self.chk_types], dtype=np.int64)

    def var_coeffs(self) -> np.ndarray:
        return np.array([vt.coeff for vt in self.var_types])

    def chk_coeffs(self) -> np.ndarray:
        return np.array([ct.coeff for ct in self.chk_types])

    def punctured_mask(self) -> np.ndarray:
        return np.array([vt.punctured for vt in self.var_types])

    def var_edges(self) -> np.ndarray:
        """L_{x_i}(1, 1) for every edge class i."""
        return self.var_coeffs() @ self.var_degrees()

    def chk_edges(self) -> np.ndarray:
        """R_{x_i}(1) for every edge class i."""
        return self.chk_coeffs() @ self.chk_degrees()

    def to_dict(self, rate: float | None = None) -> dict:
        return {
            "type": "met",
            "rate": design_rate(self) if rate is None else rate,
            "m_e": self.m_e,
            "var_types": [{"b": list(v.b), "d": list(v.d), "coeff": v.coeff} for v in self.var_types],
            "chk_types": [{"d": list(c.d), "coeff": c.coeff} for c in self.chk_types],
        }


# ----------------------------------------------------------------------------
# validation


@dataclass
class Violation:
    constraint: str
    residual: float


@dataclass
class ValidationReport:
    """Residual of every checked constraint plus the ones exceeding ``tol``."""

    tol: float
    residuals: dict[str, float]
    violations: list[Violation]

    @property
    def passed(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.passed

    def summary(self) -> str:
        if self.passed:
            return "ok"
        return ", ".join(f"{v.constraint} (residual {v.residual:+.3g})" for v in self.violations)


def _report(residuals: dict[str, float], tol: float) -> ValidationReport:
    bad = [Violation(k, r) for k, r in residuals.items() if not abs(r) <= tol]
    return ValidationReport(tol, residuals, bad)


def validate(dd: DegreeDistribution, rate: float, tol: float = TOL_SUM) -> ValidationReport:
    """Check normalization of lambda and rho and the design-rate equation."""
    sl = sum(f for _, f in dd.lambda_terms)
    sr = sum(f for _, f in dd.rho_terms)
    il = sum(f / d for d, f in dd.lambda_terms)
    ir = sum(f / d for d, f in dd.rho_terms)
    res = {
        "lambda_sum": sl - 1.0,
        "rho_sum": sr - 1.0,
        "rate": (ir / il - (1.0 - rate)) if il > 0 else math.inf,
    }
    return _report(res, tol)


def validate_met(met: MetEnsemble, rate: float, tol: float = TOL_SUM) -> ValidationReport:
    """Check transmitted-node normalization, the rate equation and per-class edge balance."""
    L = met.var_coeffs()
    transmitted = ~met.punctured_mask()
    R = met.chk_coeffs()
    res = {
        "transmitted_sum": float(L[transmitted].sum()) - 1.0,
        "rate": float(L.sum() - R.sum()) - rate,
    }
    ve, ce = met.var_edges(), met.chk_edges()
    for i in range(met.m_e):
        res[f"edge_balance:class{i + 1}"] = float(ve[i] - ce[i])
    return _report(res, tol)


def design_rate(ens: DegreeDistribution | MetEnsemble) -> float:
    """Design rate of a standard or MET ensemble."""
    if isinstance(ens, MetEnsemble):
        return float(ens.var_coeffs().sum() - ens.chk_coeffs().sum())
    il = sum(f / d for d, f in ens.lambda_terms)
    if il <= 0.0:
        raise InvalidEnsembleError("sum of lambda_i / i is zero")
    ir = sum(f / d for d, f in ens.rho_terms)
    return 1.0 - ir / il


# short alias
rate = design_rate


def stability_bound(dd: DegreeDistribution) -> float:
    """Largest erasure probability allowed by the stability condition.

    Returns ``1 / (lambda_2 * rho'(1))``, or ``inf`` when there is no degree-2
    variable mass.
    """
    lam2 = dd.lam.get(2, 0.0)
    if lam2 <= 0.0:
        return math.inf
    rho_prime = sum(f * (d - 1) for d, f in dd.rho_terms)
    return 1.0 / (lam2 * rho_prime)


def node_fractions(dd: DegreeDistribution) -> tuple[dict[int, float], dict[int, float]]:
    """Node-perspective fractions: Lambda_i (per variable node), R_j (per variable node)."""
    il = sum(f / d for d, f in dd.lambda_terms)
    var = {d: (f / d) / il for d, f in dd.lambda_terms}
    chk = {d: (f / d) / il for d, f in dd.rho_terms}
    return var, chk


def met_mirror(dd: DegreeDistribution) -> MetEnsemble:
    """Single-edge-class MET ensemble equivalent to ``dd``.

    Every variable degree becomes a transmitted type ``r1 x1^i`` with its node
    fraction; every check degree becomes ``x1^j`` with fraction relative to the
    number of variable nodes.
    """
    var, chk = node_fractions(dd)
    return MetEnsemble(
        1,
        tuple(VarType(TRANSMITTED, (d,), f) for d, f in var.items()),
        tuple(ChkType((d,), f) for d, f in chk.items()),
    )


# ----------------------------------------------------------------------------
# JSON


def from_dict(doc: Mapping) -> tuple[DegreeDistribution | MetEnsemble, float | None]:
    """Parse the ensemble JSON schema; returns ``(ensemble, rate)``."""
    kind = doc.get("type")
    rate_ = doc.get("rate")
    if kind == "standard":
        for key in ("lambda", "rho"):
            if key not in doc:
                raise KeyError(f"standard ensemble is missing key {key!r}")
        dd = DegreeDistribution(
            {int(k): v for k, v in doc["lambda"].items()}, {int(k): v for k, v in doc["rho"].items()}
        )
        return dd, rate_
    if kind == "met":
        for key in ("m_e", "var_types", "chk_types"):
            if key not in doc:
                raise KeyError(f"met ensemble is missing key {key!r}")
        met = MetEnsemble(
            int(doc["m_e"]),
            tuple(VarType(tuple(v["b"]), tuple(v["d"]), v["coeff"]) for v in doc["var_types"]),
            tuple(ChkType(tuple(c["d"]), c["coeff"]) for c in doc["chk_types"]),
        )
        return met, rate_
    raise KeyError(f"unknown ensemble type {kind!r} (expected 'standard' or 'met')")


def to_json(ens: DegreeDistribution | MetEnsemble, rate: float | None = None, **kw) -> str:
    kw.setdefault("indent", 2)
    return json.dumps(ens.to_dict(rate), **kw)


def make_var_types(rows: Sequence) -> tuple[VarType, ...]:
    return tuple(VarType(tuple(b), tuple(d), c) for b, d, c in rows)
