"""Decoding thresholds by bisection, and scoring of optimizer candidates."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _kernels as K
from .bec import CONV_TOL, MAX_ITER, met_arrays
from .ensemble import DegreeDistribution, InvalidEnsembleError, MetEnsemble, stability_bound
from .parameterize import Infeasible, ParamDescriptor

BISECT_TOL = 1e-5


def threshold(converges: Callable[[float], bool], lo: float, hi: float,
              bisect_tol: float = BISECT_TOL, check_lo: bool = False) -> float:
    """Largest channel parameter for which ``converges`` holds, by bisection.

    ``converges(lo)`` is assumed true (``lo`` is normally the noiseless floor)
    unless ``check_lo`` is set.  Returns the midpoint of the final bracket, or
    0.0 when no tested point converged.
    """
    if check_lo and not converges(lo):
        return 0.0
    floor = lo
    while hi - lo > bisect_tol:
        mid = 0.5 * (lo + hi)
        if converges(mid):
            lo = mid
        else:
            hi = mid
    if lo == floor and not check_lo:
        return 0.0
    return 0.5 * (lo + hi)


class BEC:
    """Binary erasure channel; threshold is the largest erasure probability."""

    name = "bec"
    lo, hi = 0.0, 1.0

    def __init__(self, l: int = MAX_ITER, conv_tol: float = CONV_TOL,
                 bisect_tol: float = BISECT_TOL):
        self.l, self.conv_tol, self.bisect_tol = int(l), conv_tol, bisect_tol

    def threshold(self, ens) -> float:
        if isinstance(ens, DegreeDistribution):
            # points above the stability bound fail without a run; the bisection
            # grid stays that of [lo, hi] so MET mirrors land on the same points
            lo, hi = K.bec_bisect(ens.lambda_poly(), ens.rho_poly(), self.lo, self.hi,
                                  stability_bound(ens), self.l, self.conv_tol, K.STALL_TOL,
                                  self.bisect_tol)
        else:
            a = met_arrays(ens)
            lo, hi = K.met_bisect(a.vdeg, a.L, a.punct, a.multi, a.deg1, a.Lx, a.cdeg, a.R,
                                  a.Rx, self.lo, self.hi, self.l, self.conv_tol, K.STALL_TOL,
                                  self.bisect_tol)
        return 0.0 if lo == self.lo else 0.5 * (lo + hi)

    def __repr__(self):
        return f"BEC(l={self.l}, conv_tol={self.conv_tol}, bisect_tol={self.bisect_tol})"


class BIAWGN:
    """Binary-input AWGN channel; threshold is the largest noise deviation sigma."""

    name = "biawgn"

    def __init__(self, l: int = 1000, err_tol: float = 1e-6, bisect_tol: float = 1e-4,
                 sigma_min: float = 0.3, sigma_max: float = 1.6, bound: float = 30.0,
                 bits: int = 12):
        self.l, self.err_tol, self.bisect_tol = int(l), err_tol, bisect_tol
        self.lo, self.hi = sigma_min, sigma_max
        self.bound, self.bits = bound, bits

    def threshold(self, ens) -> float:
        from .awgn import Grid, awgn_converges

        grid = Grid(self.bound, self.bits)

        def ok(sigma):
            return awgn_converges(ens, sigma, self.l, self.err_tol, grid=grid).converged

        return threshold(ok, self.lo, self.hi, self.bisect_tol, check_lo=True)

    def __repr__(self):
        return (f"BIAWGN(l={self.l}, err_tol={self.err_tol}, bisect_tol={self.bisect_tol}, "
                f"bound={self.bound}, bits={self.bits})")


def make_channel(name: str = "bec", **kw):
    name = name.lower()
    if name == "bec":
        return BEC(**kw)
    if name in ("biawgn", "awgn", "bi-awgn"):
        return BIAWGN(**kw)
    raise ValueError(f"unknown channel {name!r}")


def ensemble_threshold(ens: DegreeDistribution | MetEnsemble, channel="bec", **kw) -> float:
    """Threshold of a fixed ensemble (epsilon* on the BEC, sigma* on BI-AWGN)."""
    ch = make_channel(channel, **kw) if isinstance(channel, str) else channel
    return ch.threshold(ens)


@dataclass
class SearchMetrics:
    """Search effort: generations (NOG), candidates (NTT), improvements (NFE), wall time."""

    NOG: int = 0
    NTT: int = 0
    NFE: int = 0
    cpu_seconds: float = 0.0


class CandidateEvaluator:
    """Scores free vectors of one structure by their threshold.

    Infeasible embeddings (and invalid ensembles) score 0.  Scores are cached
    by vector, so re-submitting the incumbent best costs nothing.  ``NTT``
    counts every submitted candidate; ``NFE`` counts strict improvements over
    the best score seen so far, processed in submission order so that the
    counters do not depend on how scoring is distributed.
    """

    def __init__(self, descriptor: ParamDescriptor, channel=None):
        self.descriptor = descriptor
        self.channel = channel if channel is not None else BEC()
        self.metrics = SearchMetrics()
        self.best = -math.inf
        self._cache: dict[bytes, float] = {}
        self._t0 = time.perf_counter()

    @property
    def dim(self) -> int:
        return self.descriptor.E

    @property
    def space(self):
        from .optimize import Box

        return Box.unit(self.dim)

    @property
    def init_space(self):
        """Bounding box of the feasible free vectors; initial populations are drawn there."""
        from .optimize import Box

        lo, hi = self.descriptor.free_bounds()
        return Box(tuple(lo), tuple(hi))

    def feasible(self, v) -> bool:
        return not isinstance(self.descriptor.embed(np.asarray(v, dtype=float)), Infeasible)

    def decode(self, v):
        return self.descriptor.embed(np.asarray(v, dtype=float))

    def score(self, v) -> float:
        v = np.asarray(v, dtype=float)
        key = v.tobytes()
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        ens = self.descriptor.embed(v)
        if isinstance(ens, Infeasible):
            val = 0.0
        else:
            try:
                val = float(self.channel.threshold(ens))
            except InvalidEnsembleError:
                val = 0.0
        self._cache[key] = val
        return val

    def _account(self, values):
        for val in values:
            self.metrics.NTT += 1
            if val > self.best:
                if self.best > -math.inf:
                    self.metrics.NFE += 1
                self.best = val
        self.metrics.cpu_seconds = time.perf_counter() - self._t0

    def evaluate_candidate(self, v) -> float:
        val = self.score(v)
        self._account([val])
        return val

    def __call__(self, vectors) -> np.ndarray:
        vals = np.array([self.score(v) for v in np.atleast_2d(vectors)], dtype=float)
        self._account(vals)
        return vals
