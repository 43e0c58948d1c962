"""Population search over free vectors: Adaptive Range (AR) and baselines.

Every optimizer maximizes a black-box score through an *evaluator*: a
callable mapping a batch of vectors to scores that also exposes ``space``
(a :class:`Box`), ``metrics`` (a :class:`SearchMetrics`) and, optionally,
``decode(v)`` to turn the winning vector into an ensemble and
``canonicalize(v)`` to map every new vector to a canonical representative
(sorted degree sets, for instance) before it is scored.

Random streams are keyed, never shared: candidate ``i`` of generation ``G``
draws from ``default_rng([seed, G, i])`` and stratified initial populations
from ``default_rng([seed, G])``.  Populations are built sequentially by the
caller and only scoring may be farmed out, so runs are reproducible for any
degree of parallelism.
"""
from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .threshold import SearchMetrics

SR_FLOOR = 1e-4


class ConfigError(ValueError):
    """Invalid optimizer settings."""


@dataclass(frozen=True)
class OptimizerConfig:
    """Settings shared by all optimizers.

    ``F``, ``CR`` and ``p_mutant`` only affect the differential-evolution
    variants.  ``max_generations`` and ``max_evals`` are optional hard caps
    on top of the stall rule.
    """

    NP: int = 50
    RM: float = 0.5
    delta: float = 1e-5
    SR_init: float = 0.1
    l: int | None = None
    seed: int = 0
    stall_limit: int = 3
    F: float = 0.5
    CR: float = 0.9
    p_mutant: float = 0.5
    max_generations: int | None = None
    max_evals: int | None = None

    def __post_init__(self):
        if int(self.NP) != self.NP or self.NP < 2:
            raise ConfigError(f"NP must be an integer >= 2, got {self.NP}")
        if not self.RM > 0:
            raise ConfigError(f"RM must be positive, got {self.RM}")
        if not self.delta > 0:
            raise ConfigError(f"delta must be positive, got {self.delta}")
        if not self.SR_init > 0:
            raise ConfigError(f"SR_init must be positive, got {self.SR_init}")
        if int(self.stall_limit) != self.stall_limit or self.stall_limit < 1:
            raise ConfigError(f"stall_limit must be an integer >= 1, got {self.stall_limit}")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if not 0.0 <= self.CR <= 1.0 or not 0.0 <= self.p_mutant <= 1.0:
            raise ConfigError("CR and p_mutant must lie in [0, 1]")
        if self.F < 0:
            raise ConfigError("F must be non-negative")


# ---------------------------------------------------------------------------
# search spaces


@dataclass(frozen=True)
class Box:
    """Axis-aligned box, either continuous or over integers (inclusive bounds)."""

    lower: tuple
    upper: tuple
    integer: bool = False

    @classmethod
    def unit(cls, dim: int) -> "Box":
        return cls((0.0,) * dim, (1.0,) * dim)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def lo(self) -> np.ndarray:
        return np.asarray(self.lower, dtype=float)

    @property
    def hi(self) -> np.ndarray:
        return np.asarray(self.upper, dtype=float)

    def clip(self, v) -> np.ndarray:
        v = np.clip(np.asarray(v, dtype=float), self.lo, self.hi)
        if self.integer:
            v = np.floor(v + 0.5)  # round half up
        return v

    def from_unit(self, u) -> np.ndarray:
        """Map points of [0, 1)^dim onto the box (integer boxes: equal-width cells)."""
        u = np.asarray(u, dtype=float)
        if self.integer:
            n = self.hi - self.lo + 1
            return np.minimum(self.lo + np.floor(u * n), self.hi)
        return self.lo + u * (self.hi - self.lo)

    def window(self, center, SR) -> tuple[np.ndarray, np.ndarray]:
        """Per-coordinate interval ``[max(c - SR, lo), min(c + SR, hi)]``."""
        c = np.asarray(center, dtype=float)
        a = np.maximum(c - SR, self.lo)
        b = np.minimum(c + SR, self.hi)
        if self.integer:
            a, b = np.ceil(a - 1e-12), np.floor(b + 1e-12)
        return a, b

    def sample_window(self, center, SR, rng) -> np.ndarray:
        a, b = self.window(center, SR)
        if self.integer:
            return a + np.floor(rng.random(self.dim) * (b - a + 1)).clip(max=b - a)
        return a + rng.random(self.dim) * (b - a)


# ---------------------------------------------------------------------------
# populations and traces


@dataclass
class Population:
    """Vectors of one generation with their scores."""

    G: int
    vectors: np.ndarray
    fitness: np.ndarray

    def ranked(self) -> np.ndarray:
        """Indices by decreasing fitness, ties broken by lower index."""
        return np.lexsort((np.arange(len(self.fitness)), -self.fitness))

    @property
    def best_index(self) -> int:
        return int(self.ranked()[0])

    @property
    def next_best_index(self) -> int:
        r = self.ranked()
        return int(r[1] if len(r) > 1 else r[0])

    @property
    def best(self) -> np.ndarray:
        return self.vectors[self.best_index]

    @property
    def next_best(self) -> np.ndarray:
        return self.vectors[self.next_best_index]

    @property
    def best_fitness(self) -> float:
        return float(self.fitness[self.best_index])


TRACE_FIELDS = ("generation", "best_threshold", "SR", "NTT_cum", "NFE_cum", "elapsed_s")


@dataclass
class OptimizationTrace:
    """One row per generation: best-so-far score, search range and effort counters."""

    rows: list = field(default_factory=list)

    def record(self, G, best, SR, metrics: SearchMetrics, elapsed):
        self.rows.append({
            "generation": int(G),
            "best_threshold": float(best),
            "SR": float("nan") if SR is None else float(SR),
            "NTT_cum": int(metrics.NTT),
            "NFE_cum": int(metrics.NFE),
            "elapsed_s": float(elapsed),
        })

    def __len__(self):
        return len(self.rows)

    @property
    def best_thresholds(self) -> np.ndarray:
        return np.array([r["best_threshold"] for r in self.rows])

    def to_csv(self, timing: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_FIELDS)
        for r in self.rows:
            sr = "" if math.isnan(r["SR"]) else repr(r["SR"])
            el = f"{r['elapsed_s']:.3f}" if timing else ""
            w.writerow([r["generation"], repr(r["best_threshold"]), sr, r["NTT_cum"],
                        r["NFE_cum"], el])
        return buf.getvalue()


@dataclass
class OptimizationResult:
    best_vector: np.ndarray
    best_threshold: float
    ensemble: object
    trace: OptimizationTrace
    metrics: SearchMetrics
    population: Population

    @property
    def NOG(self) -> int:
        return len(self.trace)


# ---------------------------------------------------------------------------
# building blocks


def queens_move_init(NP: int, E: int, rng, space: Box | None = None) -> np.ndarray:
    """Stratified initial population, one sample per cell in every coordinate.

    Each coordinate's ``NP`` values are ``(perm_k + u_k) / NP`` for an
    independent random permutation and uniform jitter, so every equal-width
    cell of [0, 1] holds exactly one sample (Latin hypercube).  ``space``
    maps the unit cube onto another box.
    """
    if NP < 1 or E < 0:
        raise ValueError("need NP >= 1 and E >= 0")
    if E == 0:
        return np.zeros((NP, 0))
    perms = np.stack([rng.permutation(NP) for _ in range(E)], axis=1)
    u = (perms + rng.random((NP, E))) / NP
    u = np.minimum(u, np.nextafter(1.0, 0.0))
    return space.from_unit(u) if space is not None else u


def ar_recalculate_sr(best, next_best, RM: float) -> float:
    """``RM * max_j max(|best_j - next_best_j|, 1e-4)``."""
    best = np.asarray(best, dtype=float)
    next_best = np.asarray(next_best, dtype=float)
    if best.shape != next_best.shape:
        raise ValueError("best and next-best vectors differ in length")
    if best.size == 0:
        return RM * SR_FLOOR
    return float(RM * np.max(np.maximum(np.abs(best - next_best), SR_FLOOR)))


def ar_sample(pop: Population, SR: float, NP: int, seed: int, G: int, space: Box) -> np.ndarray:
    """Vectors of generation ``G``: the best copied to index 0, the rest drawn
    uniformly from the SR window around it."""
    best = pop.best
    out = np.empty((NP, space.dim))
    out[0] = best
    for i in range(1, NP):
        out[i] = space.sample_window(best, SR, np.random.default_rng([seed, G, i]))
    return out


def ar_generation(pop: Population, SR: float, cfg: OptimizerConfig, evaluator) -> Population:
    """Sample and score the next AR generation."""
    G = pop.G + 1
    vecs = _canonical(evaluator, ar_sample(pop, SR, cfg.NP, cfg.seed, G, evaluator.space))
    return Population(G, vecs, np.asarray(evaluator(vecs), dtype=float))




def de_trial(pop: Population, i: int, cfg: OptimizerConfig, G: int, space: Box,
             recombine: bool = False) -> np.ndarray:
    """Trial vector for target ``i``: rand/1 mutation, then crossover.

    Binomial crossover takes the mutant coordinate with probability ``CR``
    (one coordinate always).  With ``recombine`` each coordinate is instead
    the mutant's with probability ``p_mutant`` and otherwise that of another
    randomly chosen member (discrete recombination).
    """
    rng = np.random.default_rng([cfg.seed, G, i])
    P = pop.vectors
    pool = np.delete(np.arange(len(P)), i)
    r1, r2, r3 = rng.choice(pool, size=3, replace=False)
    mutant = space.clip(P[r1] + cfg.F * (P[r2] - P[r3]))
    E = space.dim
    if recombine:
        other = P[rng.choice(pool)]
        take = rng.random(E) < cfg.p_mutant
        return np.where(take, mutant, other)
    take = rng.random(E) < cfg.CR
    if E:
        take[rng.integers(E)] = True
    return np.where(take, mutant, P[i])


# ---------------------------------------------------------------------------
# optimizers


class _Run:
    """Shared generation loop bookkeeping: stall rule, caps, trace."""

    def __init__(self, cfg: OptimizerConfig, evaluator):
        self.cfg = cfg
        self.ev = evaluator
        self.trace = OptimizationTrace()
        self.t0 = time.perf_counter()
        self.best = -math.inf
        self.best_vec = None
        self.stall = 0

    def observe(self, pop: Population, SR=None) -> bool:
        """Update best-so-far from ``pop``; returns True on strict improvement."""
        b = pop.best_fitness
        improved = b > self.best
        if improved:
            self.best = b
            self.best_vec = pop.best.copy()
            self.stall = 0
        elif pop.G > 0:
            self.stall += 1
        self.ev.metrics.NOG = pop.G + 1
        self.ev.metrics.cpu_seconds = time.perf_counter() - self.t0
        self.trace.record(pop.G, self.best, SR, self.ev.metrics, self.ev.metrics.cpu_seconds)
        return improved

    def done(self, G: int) -> bool:
        cfg = self.cfg
        space = self.ev.space
        if space.dim == 0 or np.all(space.lo == space.hi):
            return True  # a single point: nothing left to search
        if self.stall >= cfg.stall_limit:
            return True
        if cfg.max_generations is not None and G + 1 >= cfg.max_generations:
            return True
        if cfg.max_evals is not None and self.ev.metrics.NTT + cfg.NP > cfg.max_evals:
            return True
        exhausted = getattr(self.ev, "exhausted", None)
        return bool(exhausted is not None and exhausted())

    def result(self, pop: Population) -> OptimizationResult:
        decode = getattr(self.ev, "decode", None)
        ens = decode(self.best_vec) if decode is not None else None
        return OptimizationResult(self.best_vec, float(self.best), ens, self.trace,
                                  self.ev.metrics, pop)


MAX_REDRAWS = 2000


def _canonical(evaluator, vecs: np.ndarray) -> np.ndarray:
    f = getattr(evaluator, "canonicalize", None)
    if f is None or vecs.size == 0:
        return vecs
    return np.array([f(v) for v in vecs], dtype=float).reshape(vecs.shape)


def _initial(cfg: OptimizerConfig, evaluator, G: int = 0) -> Population:
    """Stratified population; rows the evaluator reports infeasible are redrawn
    uniformly (stream ``[seed, G, i]``) up to ``MAX_REDRAWS`` times."""
    space = getattr(evaluator, "init_space", None) or evaluator.space
    vecs = queens_move_init(cfg.NP, space.dim, np.random.default_rng([cfg.seed, G]), space)
    feasible = getattr(evaluator, "feasible", None)
    if feasible is not None and space.dim:
        for i in range(cfg.NP):
            if feasible(vecs[i]):
                continue
            rng = np.random.default_rng([cfg.seed, G, i])
            for _ in range(MAX_REDRAWS):
                v = space.from_unit(rng.random(space.dim))
                if feasible(v):
                    vecs[i] = v
                    break
    vecs = _canonical(evaluator, vecs)
    return Population(G, vecs, np.asarray(evaluator(vecs), dtype=float))


def ar_optimize(evaluator, cfg: OptimizerConfig) -> OptimizationResult:
    """Adaptive Range search.

    Generation 0 is a stratified sample.  While nothing has scored above 0
    the sample is redrawn (there is no incumbent to search around).  Each
    later generation keeps the best vector at index 0 and samples the others
    within ``SR`` of it.  When
    a generation improves the best score by less than ``delta`` the range is
    reset from the gap between the best and next-best vectors, scaled by
    ``RM``.  The run halts after ``stall_limit`` generations in a row
    without strict improvement.
    """
    space = evaluator.space
    if not space.integer and cfg.SR_init > 1:
        raise ConfigError("SR_init must lie in (0, 1] on the unit cube")
    run = _Run(cfg, evaluator)
    pop = _initial(cfg, evaluator)
    SR = cfg.SR_init
    run.observe(pop, SR)
    prev = pop.best_fitness
    while not run.done(pop.G):
        if run.best <= 0.0:
            pop = _initial(cfg, evaluator, pop.G + 1)
        else:
            pop = ar_generation(pop, SR, cfg, evaluator)
            if pop.best_fitness - prev < cfg.delta:
                SR = ar_recalculate_sr(pop.best, pop.next_best, cfg.RM)
        prev = pop.best_fitness
        run.observe(pop, SR)
    return run.result(pop)


def _de(evaluator, cfg: OptimizerConfig, recombine: bool) -> OptimizationResult:
    if cfg.NP < 4:
        raise ConfigError("differential evolution needs NP >= 4 (three donors and a target)")
    space = evaluator.space
    run = _Run(cfg, evaluator)
    pop = _initial(cfg, evaluator)
    run.observe(pop)
    while not run.done(pop.G):
        G = pop.G + 1
        if run.best <= 0.0:
            pop = _initial(cfg, evaluator, G)
            run.observe(pop)
            continue
        trials = np.array([de_trial(pop, i, cfg, G, space, recombine) for i in range(cfg.NP)])
        trials = _canonical(evaluator, trials.reshape(cfg.NP, space.dim))
        f = np.asarray(evaluator(trials), dtype=float)
        keep = f >= pop.fitness
        vecs = np.where(keep[:, None], trials, pop.vectors)
        pop = Population(G, vecs, np.where(keep, f, pop.fitness))
        run.observe(pop)
    return run.result(pop)


def dife_optimize(evaluator, cfg: OptimizerConfig) -> OptimizationResult:
    """Differential evolution, rand/1/bin with greedy (>=) selection."""
    return _de(evaluator, cfg, recombine=False)


def difer_optimize(evaluator, cfg: OptimizerConfig) -> OptimizationResult:
    """Differential evolution with discrete recombination instead of crossover."""
    return _de(evaluator, cfg, recombine=True)


def random_search(evaluator, cfg: OptimizerConfig) -> OptimizationResult:
    """Fresh stratified population every generation; the incumbent is kept."""
    run = _Run(cfg, evaluator)
    pop = _initial(cfg, evaluator)
    run.observe(pop)
    while not run.done(pop.G):
        pop = _initial(cfg, evaluator, pop.G + 1)
        run.observe(pop)
    return run.result(pop)


OPTIMIZERS = {
    "ar": ar_optimize,
    "dife": dife_optimize,
    "difer": difer_optimize,
    "random": random_search,
}


def optimize(evaluator, cfg: OptimizerConfig, method: str = "ar") -> OptimizationResult:
    try:
        fn = OPTIMIZERS[method.lower()]
    except KeyError:
        raise ConfigError(f"unknown optimizer {method!r}; choose from {sorted(OPTIMIZERS)}") from None
    return fn(evaluator, cfg)
