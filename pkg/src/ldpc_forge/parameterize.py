"""Free-vector parameterization of ensembles with fixed allowed degrees.

The equality constraints (normalization, design rate and, for MET ensembles,
per-class edge balance) are linear in the coefficients.  A deterministic
subset of coefficients is designated dependent and solved for; the remaining
``E`` coefficients form the free vector in ``[0, 1]^E`` that the optimizers
search over.

Dependent designation:

* standard ensembles -- the rho coefficients of the largest check degrees are
  chosen first, then lambda coefficients from the largest variable degree
  down, until the constraints are spanned;
* MET ensembles -- check coefficients first, then variable coefficients, each
  group ordered by lexicographically smallest degree vector.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

from .ensemble import (
    PUNCTURED,
    SNAP,
    TRANSMITTED,
    ChkType,
    DegreeDistribution,
    MetEnsemble,
    VarType,
)

RANK_TOL = 1e-10
RANGE_TOL = 1e-12


class InfeasibleStructureError(ValueError):
    """No coefficient assignment satisfies the constraints of a structure."""


class Infeasible:
    """Verdict returned by :meth:`ParamDescriptor.embed` for out-of-range solutions."""

    __slots__ = ("reason",)

    def __init__(self, reason: str):
        self.reason = reason

    def __bool__(self):
        return False

    def __repr__(self):
        return f"Infeasible({self.reason!r})"


@dataclass(frozen=True)
class DegreeStructure:
    """Allowed degrees (Lambda, Gamma) of a standard ensemble plus its design rate."""

    lambda_degrees: tuple[int, ...]
    rho_degrees: tuple[int, ...]
    rate: float

    def __post_init__(self):
        lam = tuple(sorted({int(d) for d in self.lambda_degrees}))
        rho = tuple(sorted({int(d) for d in self.rho_degrees}))
        if not lam or not rho or lam[0] < 2 or rho[0] < 2:
            raise ValueError("allowed degrees must be non-empty and >= 2")
        if not 0.0 <= self.rate < 1.0:
            raise ValueError(f"rate {self.rate} outside [0, 1)")
        object.__setattr__(self, "lambda_degrees", lam)
        object.__setattr__(self, "rho_degrees", rho)
        object.__setattr__(self, "rate", float(self.rate))

    @property
    def key(self):
        return ("standard", self.lambda_degrees, self.rho_degrees)


@dataclass(frozen=True)
class MetStructure:
    """Variable types ``(b, d)`` and check types ``d`` of a MET ensemble, coefficients open."""

    m_e: int
    var_types: tuple[tuple[tuple[int, int], tuple[int, ...]], ...]
    chk_types: tuple[tuple[int, ...], ...]
    rate: float

    def __post_init__(self):
        vts = []
        for b, d in self.var_types:
            b, d = tuple(int(x) for x in b), tuple(int(x) for x in d)
            if b not in (TRANSMITTED, PUNCTURED):
                raise ValueError(f"received degree {b} must be (0, 1) or (1, 0)")
            if len(d) != self.m_e or min(d) < 0 or sum(d) == 0:
                raise ValueError(f"bad variable degree vector {d}")
            vts.append((b, d))
        cts = []
        for d in self.chk_types:
            d = tuple(int(x) for x in d)
            if len(d) != self.m_e or min(d) < 0 or sum(d) == 0:
                raise ValueError(f"bad check degree vector {d}")
            cts.append(d)
        if not vts or not cts:
            raise ValueError("need at least one variable and one check type")
        object.__setattr__(self, "var_types", tuple(vts))
        object.__setattr__(self, "chk_types", tuple(cts))
        object.__setattr__(self, "rate", float(self.rate))

    @property
    def key(self):
        return ("met", self.m_e, tuple(sorted(self.var_types)), tuple(sorted(self.chk_types)))

    @classmethod
    def of(cls, met: MetEnsemble, rate: float) -> "MetStructure":
        return cls(met.m_e, tuple((v.b, v.d) for v in met.var_types),
                   tuple(c.d for c in met.chk_types), rate)


def _constraints(structure):
    """Return (A, b, names, preference order of columns)."""
    if isinstance(structure, DegreeStructure):
        lam, rho, r = structure.lambda_degrees, structure.rho_degrees, structure.rate
        nl, nr = len(lam), len(rho)
        A = np.zeros((3, nl + nr))
        A[0, :nl] = 1.0
        A[1, nl:] = 1.0
        A[2, :nl] = -(1.0 - r) / np.array(lam, dtype=float)
        A[2, nl:] = 1.0 / np.array(rho, dtype=float)
        b = np.array([1.0, 1.0, 0.0])
        names = [f"lambda_{d}" for d in lam] + [f"rho_{d}" for d in rho]
        order = [nl + k for k in reversed(range(nr))] + list(reversed(range(nl)))
        return A, b, names, order

    s = structure
    nv, nc = len(s.var_types), len(s.chk_types)
    vdeg = np.array([d for _, d in s.var_types], dtype=float)
    cdeg = np.array(s.chk_types, dtype=float)
    rows, rhs = [], []
    row = np.zeros(nv + nc)
    row[:nv] = [1.0 if b == TRANSMITTED else 0.0 for b, _ in s.var_types]
    rows.append(row)
    rhs.append(1.0)
    row = np.concatenate([np.ones(nv), -np.ones(nc)])
    rows.append(row)
    rhs.append(s.rate)
    for i in range(s.m_e):
        row = np.concatenate([vdeg[:, i], -cdeg[:, i]])
        if np.any(row != 0.0):
            rows.append(row)
            rhs.append(0.0)
    A, b = np.array(rows), np.array(rhs)
    names = [f"a{k + 1}" for k in range(nv)] + [f"c{k + 1}" for k in range(nc)]
    chk_order = sorted(range(nc), key=lambda k: (s.chk_types[k], k))
    var_order = sorted(range(nv), key=lambda k: (s.var_types[k][1], k))
    order = [nv + k for k in chk_order] + var_order
    return A, b, names, order


class ParamDescriptor:
    """Affine map from a free vector in ``[0, 1]^E`` to all ensemble coefficients."""

    def __init__(self, structure, A, b, names, free, dep):
        self.structure = structure
        self.A, self.b = A, b
        self.names = list(names)
        self.free = np.array(free, dtype=int)
        self.dep = np.array(dep, dtype=int)
        Ad = A[:, self.dep]
        pinv = np.linalg.pinv(Ad)
        self._offset = pinv @ b
        self._gain = -pinv @ A[:, self.free]
        self._bounds = None

    @property
    def E(self) -> int:
        return len(self.free)

    @property
    def free_names(self) -> list[str]:
        return [self.names[k] for k in self.free]

    @property
    def dependent_names(self) -> list[str]:
        return [self.names[k] for k in self.dep]

    def coefficients(self, v) -> np.ndarray:
        """All coefficients for free values ``v`` (no range check)."""
        v = np.asarray(v, dtype=float).reshape(-1)
        if v.shape[0] != self.E:
            raise ValueError(f"free vector has length {v.shape[0]}, expected E={self.E}")
        x = np.empty(len(self.names))
        x[self.free] = v
        x[self.dep] = self._offset + self._gain @ v
        return x

    def embed(self, v):
        """Ensemble for free vector ``v``, or :class:`Infeasible`."""
        v = np.asarray(v, dtype=float).reshape(-1)
        if v.size and (v.min() < -RANGE_TOL or v.max() > 1.0 + RANGE_TOL):
            raise ValueError("free vector entries must lie in [0, 1]")
        v = np.where(v < SNAP, 0.0, np.minimum(v, 1.0))
        x = self.coefficients(v)
        xd = x[self.dep]
        bad = (xd < -RANGE_TOL) | (xd > 1.0 + RANGE_TOL)
        if np.any(bad):
            return Infeasible(", ".join(f"{self.names[k]} = {x[k]:.6g}" for k in self.dep[bad])
                              + " outside [0, 1]")
        x = np.clip(x, 0.0, 1.0)
        x[np.abs(x) < RANGE_TOL] = 0.0
        return self._build(x)

    def _build(self, x):
        s = self.structure
        if isinstance(s, DegreeStructure):
            nl = len(s.lambda_degrees)
            lam = {d: f for d, f in zip(s.lambda_degrees, x[:nl]) if f > 0.0}
            rho = {d: f for d, f in zip(s.rho_degrees, x[nl:]) if f > 0.0}
            return DegreeDistribution(lam, rho)
        nv = len(s.var_types)
        vts = tuple(VarType(b, d, f) for (b, d), f in zip(s.var_types, x[:nv]) if f > 0.0)
        cts = tuple(ChkType(d, f) for d, f in zip(s.chk_types, x[nv:]) if f > 0.0)
        return MetEnsemble(s.m_e, vts, cts)

    def extract(self, ens) -> np.ndarray:
        """Free vector of an ensemble whose support lies inside the structure."""
        s = self.structure
        x = np.zeros(len(self.names))
        if isinstance(s, DegreeStructure):
            idx = {("l", d): k for k, d in enumerate(s.lambda_degrees)}
            idx.update({("r", d): len(s.lambda_degrees) + k for k, d in enumerate(s.rho_degrees)})
            terms = [(("l", d), f) for d, f in ens.lambda_terms]
            terms += [(("r", d), f) for d, f in ens.rho_terms]
        else:
            idx = {("v", b, d): k for k, (b, d) in enumerate(s.var_types)}
            nv = len(s.var_types)
            idx.update({("c", d): nv + k for k, d in enumerate(s.chk_types)})
            terms = [(("v", vt.b, vt.d), vt.coeff) for vt in ens.var_types]
            terms += [(("c", ct.d), ct.coeff) for ct in ens.chk_types]
        for key, f in terms:
            if key not in idx:
                if f == 0.0:
                    continue
                raise ValueError(f"ensemble term {key} is not part of the structure")
            x[idx[key]] += f
        return x[self.free]

    def free_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Range of each free coefficient over the feasible set (bounding box, by LP)."""
        if self._bounds is None:
            n = self.A.shape[1]
            lo, hi = np.zeros(self.E), np.ones(self.E)
            for j, k in enumerate(self.free):
                c = np.zeros(n)
                c[k] = 1.0
                for sign, out in ((1.0, lo), (-1.0, hi)):
                    lp = linprog(sign * c, A_eq=self.A, b_eq=self.b, bounds=[(0.0, 1.0)] * n,
                                 method="highs")
                    if lp.status == 0:
                        out[j] = min(max(sign * lp.fun, 0.0), 1.0)
            self._bounds = (lo, hi)
        return self._bounds

    def index(self, name: str) -> int:
        """Position of a named coefficient within the free vector."""
        try:
            k = self.names.index(name)
        except ValueError:
            raise KeyError(f"unknown coefficient {name!r}; known: {self.names}") from None
        hits = np.flatnonzero(self.free == k)
        if not hits.size:
            raise KeyError(f"{name} is a dependent coefficient; free ones are {self.free_names}")
        return int(hits[0])

    def __repr__(self):
        return f"ParamDescriptor(E={self.E}, free={self.free_names}, dependent={self.dependent_names})"


def _greedy_basis(A, order):
    chosen = []
    rank = 0
    for k in order:
        trial = chosen + [k]
        r = np.linalg.matrix_rank(A[:, trial], tol=RANK_TOL)
        if r > rank:
            chosen, rank = trial, r
    return chosen


def parameterize(structure: DegreeStructure | MetStructure) -> ParamDescriptor:
    """Designate dependent coefficients and build the free-vector map.

    Raises
    ------
    InfeasibleStructureError
        If no coefficient vector in ``[0, 1]`` satisfies the constraints.
    """
    A, b, names, order = _constraints(structure)
    rank_a = np.linalg.matrix_rank(A, tol=RANK_TOL)
    if np.linalg.matrix_rank(np.column_stack([A, b]), tol=RANK_TOL) > rank_a:
        raise InfeasibleStructureError(f"constraints are inconsistent for {structure}")
    lp = linprog(np.zeros(A.shape[1]), A_eq=A, b_eq=b, bounds=[(0.0, 1.0)] * A.shape[1],
                 method="highs")
    if lp.status != 0:
        raise InfeasibleStructureError(f"no coefficients in [0, 1] satisfy {structure}")
    dep = _greedy_basis(A, order)
    free = [k for k in range(A.shape[1]) if k not in dep]
    return ParamDescriptor(structure, A, b, names, free, dep)


def structure_of(ens, rate: float) -> DegreeStructure | MetStructure:
    if isinstance(ens, DegreeDistribution):
        return DegreeStructure(tuple(ens.lambda_degrees), tuple(ens.rho_degrees), rate)
    return MetStructure.of(ens, rate)


def met_structure(m_e: int, var_types: Sequence, chk_types: Sequence, rate: float) -> MetStructure:
    """Convenience constructor: ``var_types`` as ``(punctured, d)`` pairs."""
    vts = tuple((PUNCTURED if p else TRANSMITTED, tuple(d)) for p, d in var_types)
    return MetStructure(m_e, vts, tuple(tuple(d) for d in chk_types), rate)
