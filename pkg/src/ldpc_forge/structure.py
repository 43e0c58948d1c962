"""Joint search: integer structures outside, AR over coefficients inside.

A structure is encoded as a fixed-length integer vector so the same
population optimizers can run on it.

* Standard ensembles: ``lambda_max`` variable degrees in ``[2, dv_max]``
  followed by ``gamma_max`` check degrees in ``[2, dc_max]``.  Repeated
  degrees are merged, so a vector may describe fewer than ``lambda_max``
  terms.
* MET ensembles: a template of variable and check slots whose degree
  entries are integers or expressions ``name``, ``name+c``, ``name-c`` over a
  few named integer coordinates.  Slots that come out all-zero are dropped
  and identical slots merged.

Each distinct structure is scored once by an inner optimization seeded from
the outer seed and the structure itself, so results do not depend on the
order in which structures are visited.
"""
from __future__ import annotations

import csv
import io
import itertools
import math
import re
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .ensemble import PUNCTURED, TRANSMITTED
from .optimize import Box, ConfigError, OptimizerConfig, optimize
from .parameterize import (
    DegreeStructure,
    InfeasibleStructureError,
    MetStructure,
    parameterize,
)
from .threshold import BEC, CandidateEvaluator, SearchMetrics

INNER_DEFAULT = OptimizerConfig(NP=50, RM=0.5, SR_init=0.1, stall_limit=3)
OUTER_AR_DEFAULT = dict(NP=50, RM=1.0, SR_init=15.0, stall_limit=3, delta=1e-5)


class StructureConstraintError(ValueError):
    """A structure breaks the limits of its search space."""


# ---------------------------------------------------------------------------
# search limits


@dataclass(frozen=True)
class StandardSpec:
    """Limits on the allowed degree sets of a standard ensemble."""

    rate: float = 0.5
    lambda_max: int = 4
    gamma_max: int = 2
    dv_max: int = 30
    dc_max: int = 15

    def __post_init__(self):
        for name in ("lambda_max", "gamma_max", "dv_max", "dc_max"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v}")
        if self.lambda_max < 2:
            raise ConfigError("lambda_max must be >= 2")
        if self.dv_max < 2 or self.dc_max < 2:
            raise ConfigError("maximum degrees must be >= 2")

    @property
    def coord_names(self) -> list[str]:
        return ([f"v{k + 1}" for k in range(self.lambda_max)]
                + [f"c{k + 1}" for k in range(self.gamma_max)])

    def space(self) -> Box:
        lo = (2,) * (self.lambda_max + self.gamma_max)
        hi = (self.dv_max,) * self.lambda_max + (self.dc_max,) * self.gamma_max
        return Box(lo, hi, integer=True)

    def decode(self, v) -> DegreeStructure:
        v = np.asarray(v).astype(int)
        return DegreeStructure(tuple(v[: self.lambda_max]), tuple(v[self.lambda_max:]), self.rate)

    def encode(self, s: DegreeStructure) -> np.ndarray:
        """Integer vector of ``s``; short degree sets repeat their last entry."""
        lam, rho = list(s.lambda_degrees), list(s.rho_degrees)
        lam += [lam[-1]] * (self.lambda_max - len(lam))
        rho += [rho[-1]] * (self.gamma_max - len(rho))
        return np.array(lam + rho, dtype=float)

    def canonical(self, v) -> np.ndarray:
        """Sorted, de-duplicated form of an integer vector (see :meth:`encode`)."""
        return self.encode(self.decode(v))

    def gate(self, s: DegreeStructure) -> None:
        """Raise unless ``s`` respects the count and maximum-degree limits."""
        if len(s.lambda_degrees) > self.lambda_max:
            raise StructureConstraintError(f"|Lambda| = {len(s.lambda_degrees)} > {self.lambda_max}")
        if len(s.rho_degrees) > self.gamma_max:
            raise StructureConstraintError(f"|Gamma| = {len(s.rho_degrees)} > {self.gamma_max}")
        if max(s.lambda_degrees) > self.dv_max:
            raise StructureConstraintError(f"max(Lambda) = {max(s.lambda_degrees)} > {self.dv_max}")
        if max(s.rho_degrees) > self.dc_max:
            raise StructureConstraintError(f"max(Gamma) = {max(s.rho_degrees)} > {self.dc_max}")
        if abs(s.rate - self.rate) > 1e-12:
            raise StructureConstraintError(f"structure rate {s.rate} != {self.rate}")


_EXPR = re.compile(r"^\s*([A-Za-z_]\w*)\s*(?:([+-])\s*(\d+))?\s*$")


def _parse_entry(x):
    if isinstance(x, (int, np.integer)):
        return (None, int(x))
    if isinstance(x, float) and x.is_integer():
        return (None, int(x))
    if isinstance(x, str):
        m = _EXPR.match(x)
        if m:
            name, sign, c = m.groups()
            off = int(c) if c else 0
            return (name, -off if sign == "-" else off)
        try:
            return (None, int(x))
        except ValueError:
            pass
    raise ConfigError(f"degree entry {x!r} is not an integer or 'name[+-]c' expression")


@dataclass(frozen=True)
class MetSpec:
    """Template of a MET structure with named integer coordinates.

    Parameters
    ----------
    m_e : number of edge classes.
    var_slots : ``(punctured, d)`` pairs; entries of ``d`` are ints or expressions.
    chk_slots : check degree templates.
    coords : ``(name, lo, hi)`` integer ranges, inclusive.
    degree_one_classes : 1-based classes that may carry degree-1 variables.
    max_degree : cap on every per-class variable degree.
    """

    m_e: int
    var_slots: tuple
    chk_slots: tuple
    coords: tuple
    rate: float = 0.5
    degree_one_classes: tuple = ()
    max_degree: int | None = None

    def __post_init__(self):
        vs = tuple((bool(p), tuple(_parse_entry(x) for x in d)) for p, d in self.var_slots)
        cs = tuple(tuple(_parse_entry(x) for x in d) for d in self.chk_slots)
        names = [c[0] for c in self.coords]
        if len(set(names)) != len(names):
            raise ConfigError("duplicate coordinate names")
        for _, d in vs:
            self._check_slot(d, names)
        for d in cs:
            self._check_slot(d, names)
        co = tuple((str(n), int(lo), int(hi)) for n, lo, hi in self.coords)
        for n, lo, hi in co:
            if lo > hi:
                raise ConfigError(f"coordinate {n}: empty range [{lo}, {hi}]")
        object.__setattr__(self, "var_slots", vs)
        object.__setattr__(self, "chk_slots", cs)
        object.__setattr__(self, "coords", co)
        object.__setattr__(self, "degree_one_classes", tuple(int(c) for c in self.degree_one_classes))

    def _check_slot(self, d, names):
        if len(d) != self.m_e:
            raise ConfigError(f"slot has {len(d)} entries, expected m_e={self.m_e}")
        for name, _ in d:
            if name is not None and name not in names:
                raise ConfigError(f"slot uses unknown coordinate {name!r}")

    @property
    def coord_names(self) -> list[str]:
        return [c[0] for c in self.coords]

    def space(self) -> Box:
        return Box(tuple(c[1] for c in self.coords), tuple(c[2] for c in self.coords), integer=True)

    def _sub(self, d, values):
        return tuple(off if name is None else values[name] + off for name, off in d)

    def decode(self, v) -> MetStructure:
        values = {c[0]: int(x) for c, x in zip(self.coords, np.asarray(v).astype(int))}
        vts, cts = [], []
        for punct, d in self.var_slots:
            dd = self._sub(d, values)
            if min(dd) < 0:
                raise StructureConstraintError(f"negative degree in variable slot {dd}")
            if sum(dd) == 0:
                continue
            t = (PUNCTURED if punct else TRANSMITTED, dd)
            if t not in vts:
                vts.append(t)
        for d in self.chk_slots:
            dd = self._sub(d, values)
            if min(dd) < 0:
                raise StructureConstraintError(f"negative degree in check slot {dd}")
            if sum(dd) == 0:
                continue
            if dd not in cts:
                cts.append(dd)
        return MetStructure(self.m_e, tuple(sorted(vts)), tuple(sorted(cts)), self.rate)

    def gate(self, s: MetStructure) -> None:
        for b, d in s.var_types:
            if self.max_degree is not None and max(d) > self.max_degree:
                raise StructureConstraintError(f"variable degree {d} exceeds {self.max_degree}")
            if sum(d) == 1:
                cls = d.index(1) + 1
                if cls not in self.degree_one_classes:
                    raise StructureConstraintError(f"degree-1 variables not allowed in class {cls}")
                if b == PUNCTURED:
                    raise StructureConstraintError("punctured degree-1 variables carry no information")
        if abs(s.rate - self.rate) > 1e-12:
            raise StructureConstraintError(f"structure rate {s.rate} != {self.rate}")

    @classmethod
    def from_dict(cls, doc) -> "MetSpec":
        try:
            var_slots = [(bool(v.get("punctured", list(v.get("b", [0, 1])) == [1, 0])), v["d"])
                         for v in doc["var_types"]]
            chk_slots = [c["d"] if isinstance(c, dict) else c for c in doc["chk_types"]]
            coords = [(k, r[0], r[1]) for k, r in doc["coords"].items()]
            return cls(int(doc["m_e"]), tuple(var_slots), tuple(chk_slots), tuple(coords),
                       float(doc.get("rate", 0.5)), tuple(doc.get("degree_one_classes", ())),
                       doc.get("max_degree"))
        except KeyError as e:
            raise ConfigError(f"MET spec is missing key {e}") from None


def structure_seed(seed: int, key) -> int:
    """Inner seed derived from the outer seed and a canonical structure key."""
    ints = []

    def walk(x):
        if isinstance(x, str):
            ints.extend(x.encode())
        elif isinstance(x, (tuple, list)):
            ints.append(len(x) + 1000)
            for y in x:
                walk(y)
        else:
            ints.append(int(x))

    walk(key)
    return int(np.random.SeedSequence([int(seed)] + ints).generate_state(1)[0])


# ---------------------------------------------------------------------------
# outer objective


@dataclass
class InnerOutcome:
    threshold: float
    ensemble: object = None
    metrics: SearchMetrics | None = None
    reason: str = ""


class StructureObjective:
    """Scores integer structure vectors by the best inner-AR threshold.

    Implements the evaluator protocol of :mod:`ldpc_forge.optimize`
    (``space``, ``metrics``, ``decode``, batch call).  ``inner_evals`` sums the
    candidates scored by all inner runs; ``inner_budget`` optionally caps it.
    """

    def __init__(self, spec, inner_cfg: OptimizerConfig = INNER_DEFAULT, channel=None,
                 seed: int = 0, inner_method: str = "ar", inner_budget: int | None = None):
        self.spec = spec
        self.inner_cfg = inner_cfg
        self.channel = channel if channel is not None else BEC()
        self.seed = int(seed)
        self.inner_method = inner_method
        self.inner_budget = inner_budget
        self.cache: dict = {}
        self.metrics = SearchMetrics()
        self.best = -math.inf
        self.inner_evals = 0
        self._t0 = time.perf_counter()

    @property
    def space(self) -> Box:
        return self.spec.space()

    def exhausted(self) -> bool:
        return self.inner_budget is not None and self.inner_evals >= self.inner_budget

    def structure(self, v):
        return self.spec.decode(v)

    def canonicalize(self, v) -> np.ndarray:
        f = getattr(self.spec, "canonical", None)
        return f(v) if f is not None else np.asarray(v, dtype=float)

    def evaluate_structure(self, s) -> InnerOutcome:
        """Best inner threshold of structure ``s`` (cached by canonical key)."""
        self.spec.gate(s)
        key = s.key
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        try:
            desc = parameterize(s)
        except InfeasibleStructureError as e:
            out = InnerOutcome(0.0, reason=str(e))
        else:
            ev = CandidateEvaluator(desc, self.channel)
            cfg = replace(self.inner_cfg, seed=structure_seed(self.seed, key))
            res = optimize(ev, cfg, self.inner_method)
            self.inner_evals += ev.metrics.NTT
            out = InnerOutcome(max(res.best_threshold, 0.0), res.ensemble, ev.metrics)
        self.cache[key] = out
        return out

    def score(self, v) -> float:
        try:
            s = self.structure(v)
            return self.evaluate_structure(s).threshold
        except StructureConstraintError:
            return 0.0

    def feasible(self, v) -> bool:
        try:
            s = self.structure(v)
            self.spec.gate(s)
            parameterize(s)
        except (StructureConstraintError, InfeasibleStructureError):
            return False
        return True

    def __call__(self, vectors) -> np.ndarray:
        vals = np.array([self.score(v) for v in np.atleast_2d(vectors)], dtype=float)
        for val in vals:
            self.metrics.NTT += 1
            if val > self.best:
                if self.best > -math.inf:
                    self.metrics.NFE += 1
                self.best = val
        self.metrics.cpu_seconds = time.perf_counter() - self._t0
        return vals

    def decode(self, v):
        try:
            s = self.structure(v)
        except StructureConstraintError:
            return None
        hit = self.cache.get(s.key)
        return (s, hit.ensemble if hit is not None else None)


def outer_objective(s, spec, inner_cfg: OptimizerConfig = INNER_DEFAULT, channel=None,
                    seed: int = 0, cache: StructureObjective | None = None) -> float:
    """Best threshold over the coefficients of structure ``s``.

    Raises :class:`StructureConstraintError` for structures outside ``spec``;
    structures without feasible coefficients score 0.
    """
    obj = cache if cache is not None else StructureObjective(spec, inner_cfg, channel, seed)
    return obj.evaluate_structure(s).threshold


@dataclass
class StructureResult:
    structure: object
    ensemble: object
    threshold: float
    trace: object
    metrics: SearchMetrics
    inner_evals: int
    objective: StructureObjective = field(repr=False, default=None)


def _outer(method, spec, outer_cfg, inner_cfg, channel, inner_budget=None) -> StructureResult:
    obj = StructureObjective(spec, inner_cfg, channel, outer_cfg.seed, inner_budget=inner_budget)
    res = optimize(obj, outer_cfg, method)
    s, ens = res.ensemble if res.ensemble is not None else (None, None)
    return StructureResult(s, ens, res.best_threshold, res.trace, res.metrics,
                           obj.inner_evals, obj)


def outer_ar(spec, outer_cfg: OptimizerConfig | None = None,
             inner_cfg: OptimizerConfig = INNER_DEFAULT, channel=None) -> StructureResult:
    """AR over the integer structure space (defaults RM = 1, SR_init = 15)."""
    outer_cfg = outer_cfg or OptimizerConfig(**OUTER_AR_DEFAULT)
    return _outer("ar", spec, outer_cfg, inner_cfg, channel)


def outer_dife(spec, outer_cfg: OptimizerConfig | None = None,
               inner_cfg: OptimizerConfig = INNER_DEFAULT, channel=None) -> StructureResult:
    """Differential evolution over structures; mutants are rounded half up."""
    outer_cfg = outer_cfg or OptimizerConfig(NP=50, stall_limit=3)
    return _outer("dife", spec, outer_cfg, inner_cfg, channel)


def outer_random(spec, outer_cfg: OptimizerConfig | None = None,
                 inner_cfg: OptimizerConfig = INNER_DEFAULT, channel=None,
                 inner_budget: int | None = None) -> StructureResult:
    """Random structures every generation, elitist.

    With ``inner_budget`` the run continues (ignoring the stall rule) until
    the inner optimizations have scored that many candidates.
    """
    outer_cfg = outer_cfg or OptimizerConfig(NP=50, stall_limit=3)
    if inner_budget is not None:
        outer_cfg = replace(outer_cfg, stall_limit=10**9)
    return _outer("random", spec, outer_cfg, inner_cfg, channel, inner_budget)


# ---------------------------------------------------------------------------
# cost surfaces


@dataclass
class CostSurface:
    """Thresholds on a 2-D grid; ``values[i, j]`` is at ``(xs[i], ys[j])``."""

    x_name: str
    y_name: str
    xs: np.ndarray
    ys: np.ndarray
    values: np.ndarray
    feasible: np.ndarray

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["coord1", "coord2", "threshold", "feasible"])
        for i, x in enumerate(self.xs):
            for j, y in enumerate(self.ys):
                w.writerow([repr(float(x)), repr(float(y)), repr(float(self.values[i, j])),
                            int(bool(self.feasible[i, j]))])
        return buf.getvalue()

    def _masked(self, decimals):
        v = np.where(self.feasible, self.values, -np.inf)
        return np.round(v, decimals) if decimals is not None else v

    @property
    def global_max(self) -> float:
        return float(np.max(np.where(self.feasible, self.values, -np.inf)))

    def local_maxima(self, decimals: int | None = 4) -> list[list[tuple[int, int]]]:
        """Plateaus (4-connected, equal rounded value) whose every neighbour is lower."""
        v = self._masked(decimals)
        nx, ny = v.shape
        seen = np.zeros_like(self.feasible, dtype=bool)
        out = []
        for i0, j0 in itertools.product(range(nx), range(ny)):
            if seen[i0, j0] or not self.feasible[i0, j0]:
                continue
            level = v[i0, j0]
            comp, stack, is_max = [], [(i0, j0)], True
            seen[i0, j0] = True
            while stack:
                i, j = stack.pop()
                comp.append((i, j))
                for a, b in ((i + 1, j), (i - 1, j), (i, j + 1), (i, j - 1)):
                    if not (0 <= a < nx and 0 <= b < ny):
                        continue
                    if v[a, b] == level:
                        if not seen[a, b]:
                            seen[a, b] = True
                            stack.append((a, b))
                    elif v[a, b] > level:
                        is_max = False
            if is_max:
                out.append(sorted(comp))
        return out

    def connected_to_max(self, decimals: int | None = 3) -> np.ndarray:
        """Cells joined to a global-maximum cell by a path of nondecreasing value."""
        v = self._masked(decimals)
        top = v.max()
        reach = (v == top) & self.feasible
        stack = list(zip(*np.nonzero(reach)))
        nx, ny = v.shape
        while stack:
            i, j = stack.pop()
            for a, b in ((i + 1, j), (i - 1, j), (i, j + 1), (i, j - 1)):
                if 0 <= a < nx and 0 <= b < ny and not reach[a, b] and self.feasible[a, b] \
                        and v[a, b] <= v[i, j]:
                    reach[a, b] = True
                    stack.append((a, b))
        return reach


def _check_axes(axes, names, bindings, what):
    if len(axes) != 2 or axes[0] == axes[1]:
        raise ConfigError("a cost surface needs two distinct axes")
    for a in axes:
        if a not in names:
            raise ConfigError(f"axis {a!r} is not a {what}; choose from {names}")
    for k in bindings:
        if k not in names:
            raise ConfigError(f"binding {k!r} is not a {what}; choose from {names}")
        if k in axes:
            raise ConfigError(f"{k!r} is both an axis and bound")


def inner_surface(structure, axes, xs, ys, bindings=None, channel=None) -> CostSurface:
    """Threshold over two free coefficients of a fixed structure.

    Every other free coefficient must be bound to a value.  Cells whose
    embedding is infeasible are flagged ``feasible = False`` (value 0).
    """
    bindings = dict(bindings or {})
    desc = parameterize(structure)
    names = desc.free_names
    _check_axes(axes, names, bindings, "free coefficient")
    missing = [n for n in names if n not in axes and n not in bindings]
    if missing:
        raise ConfigError(f"free coefficients {missing} need a binding")
    ev = CandidateEvaluator(desc, channel or BEC())
    xs, ys = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
    vals = np.zeros((len(xs), len(ys)))
    feas = np.zeros_like(vals, dtype=bool)
    base = np.zeros(desc.E)
    for k, val in bindings.items():
        base[desc.index(k)] = val
    ix, iy = desc.index(axes[0]), desc.index(axes[1])
    for i, x in enumerate(xs):
        for j, y in enumerate(ys):
            v = base.copy()
            v[ix], v[iy] = x, y
            if np.any((v < 0) | (v > 1)) or not ev.feasible(v):
                continue
            feas[i, j] = True
            vals[i, j] = ev.evaluate_candidate(v)
    return CostSurface(axes[0], axes[1], xs, ys, vals, feas)


def structure_surface(spec, axes, xs=None, ys=None, bindings=None,
                      inner_cfg: OptimizerConfig = INNER_DEFAULT, channel=None,
                      seed: int = 0) -> CostSurface:
    """Best inner threshold over two integer structure coordinates.

    Coordinates that are neither axes nor bound are profiled: every value in
    their range is tried and the best threshold kept.
    """
    bindings = dict(bindings or {})
    names = spec.coord_names
    _check_axes(axes, names, bindings, "structure coordinate")
    space = spec.space()
    lo, hi = space.lo.astype(int), space.hi.astype(int)
    pos = {n: k for k, n in enumerate(names)}
    xs = np.arange(lo[pos[axes[0]]], hi[pos[axes[0]]] + 1) if xs is None else np.asarray(xs)
    ys = np.arange(lo[pos[axes[1]]], hi[pos[axes[1]]] + 1) if ys is None else np.asarray(ys)
    free = [n for n in names if n not in axes and n not in bindings]
    ranges = [range(lo[pos[n]], hi[pos[n]] + 1) for n in free]
    obj = StructureObjective(spec, inner_cfg, channel, seed)
    vals = np.zeros((len(xs), len(ys)))
    feas = np.zeros_like(vals, dtype=bool)
    for i, x in enumerate(xs):
        for j, y in enumerate(ys):
            v = np.zeros(len(names))
            for k, val in bindings.items():
                v[pos[k]] = val
            v[pos[axes[0]]], v[pos[axes[1]]] = x, y
            for combo in itertools.product(*ranges):
                for n, val in zip(free, combo):
                    v[pos[n]] = val
                try:
                    s = spec.decode(v)
                    out = obj.evaluate_structure(s)
                except StructureConstraintError:
                    continue
                if out.ensemble is None:
                    continue
                feas[i, j] = True
                vals[i, j] = max(vals[i, j], out.threshold)
    return CostSurface(axes[0], axes[1], xs, ys, vals, feas)
