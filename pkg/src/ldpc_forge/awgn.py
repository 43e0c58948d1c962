"""Quantized density evolution on the binary-input AWGN channel.

Message densities live on a symmetric LLR lattice ``x_k = k * step`` for
``k = -N..N`` (``N = 2**(bits - 1)``, ``step = bound / N``) with one extra atom
at ``+inf`` for perfectly known bits.  All-zero codeword convention: the
channel LLR is Gaussian with mean ``2/sigma^2`` and variance ``4/sigma^2``.

Variable nodes add LLRs (FFT convolution, mass beyond the lattice clipped
into the end points).  Check nodes combine two inputs at a time through a
precomputed table of quantized box-plus results, ``a [+] b = 2 atanh(tanh(a/2)
tanh(b/2))``; the table is indexed by magnitudes and the sign is tracked
separately.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Sequence

import numpy as np
from numba import njit
from scipy.special import ndtr

from .bec import met_arrays
from .ensemble import DegreeDistribution, MetEnsemble

BOUND = 30.0
BITS = 12
ERR_TOL = 1e-6
MAX_ITER = 1000
STALL_TOL = 1e-13
DROP = 1e-300


class GridMismatchError(ValueError):
    """Densities defined on different lattices were combined."""


@dataclass(frozen=True)
class Grid:
    """Symmetric LLR lattice with ``2**bits + 1`` points on ``[-bound, bound]``."""

    bound: float = BOUND
    bits: int = BITS

    def __post_init__(self):
        if self.bound <= 0 or self.bits < 2:
            raise ValueError("grid needs bound > 0 and bits >= 2")

    @property
    def half(self) -> int:
        return 1 << (self.bits - 1)

    @property
    def size(self) -> int:
        return 2 * self.half + 1

    @property
    def step(self) -> float:
        return self.bound / self.half

    @property
    def points(self) -> np.ndarray:
        return np.arange(-self.half, self.half + 1) * self.step

    def boxplus_table(self) -> np.ndarray:
        return _boxplus_table(self.bound, self.bits)


@lru_cache(maxsize=4)
def _boxplus_table(bound: float, bits: int) -> np.ndarray:
    """``T[m, n]`` = lattice index of ``|x_m [+] x_n|`` for magnitudes m, n >= 0."""
    n = 1 << (bits - 1)
    step = bound / n
    x = np.arange(n + 1) * step
    a, b = x[:, None], x[None, :]
    # stable form of 2 atanh(tanh(a/2) tanh(b/2)) for a, b >= 0
    val = np.logaddexp(0.0, a + b) - np.logaddexp(a, b)
    table = np.rint(val / step).astype(np.int32)
    np.clip(table, 0, n, out=table)
    table.setflags(write=False)
    return table


class QuantizedDensity:
    """Probability masses on a :class:`Grid` plus a point mass at ``+inf``."""

    __slots__ = ("grid", "mass", "inf_mass")

    def __init__(self, grid: Grid, mass, inf_mass: float = 0.0):
        mass = np.asarray(mass, dtype=float)
        if mass.shape != (grid.size,):
            raise ValueError(f"mass must have {grid.size} entries")
        self.grid = grid
        self.mass = mass
        self.inf_mass = float(inf_mass)
        self.mass.setflags(write=False)

    @classmethod
    def point(cls, grid: Grid, llr: float) -> "QuantizedDensity":
        """Unit mass at the lattice point nearest ``llr`` (``inf`` for the atom)."""
        mass = np.zeros(grid.size)
        if np.isposinf(llr):
            return cls(grid, mass, 1.0)
        k = int(np.clip(np.rint(llr / grid.step), -grid.half, grid.half))
        mass[k + grid.half] = 1.0
        return cls(grid, mass)

    @property
    def total(self) -> float:
        return float(self.mass.sum() + self.inf_mass)

    def error_probability(self) -> float:
        """P(LLR < 0) + P(LLR = 0) / 2 under the all-zero codeword."""
        h = self.grid.half
        return float(self.mass[:h].sum() + 0.5 * self.mass[h])

    def moments(self) -> tuple[float, float]:
        """Mean and variance of the finite part (normalized to unit mass)."""
        x = self.grid.points
        w = self.mass / self.mass.sum()
        mean = float(w @ x)
        return mean, float(w @ (x - mean) ** 2)

    def symmetry_defect(self) -> float:
        """``|E[tanh(L/2)] - E[tanh(L/2)^2]|``; zero for symmetric densities.

        Bounded weights keep lattice-edge roundoff from being amplified the
        way ``E[exp(-L)]`` would amplify it.
        """
        t = np.tanh(0.5 * self.grid.points)
        return float(abs(self.mass @ t - self.mass @ (t * t)))

    def __repr__(self):
        return (f"QuantizedDensity(bits={self.grid.bits}, bound={self.grid.bound}, "
                f"pe={self.error_probability():.3e}, inf={self.inf_mass:.3e})")


def _check_grids(densities) -> Grid:
    grid = densities[0].grid
    for d in densities[1:]:
        if d.grid != grid:
            raise GridMismatchError(f"{d.grid} vs {grid}")
    return grid


def channel_density(sigma: float, grid: Grid | None = None) -> QuantizedDensity:
    """Gaussian LLR density N(2/sigma^2, 4/sigma^2) binned onto the lattice.

    Each lattice point takes the probability of its rounding cell; both
    tails are folded into the end points so the mass is exactly one.
    """
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    grid = grid or Grid()
    mu, s = 2.0 / sigma**2, 2.0 / sigma
    edges = (np.arange(-grid.half, grid.half + 2) - 0.5) * grid.step
    cdf = ndtr((edges - mu) / s)
    cdf[0], cdf[-1] = 0.0, 1.0
    return QuantizedDensity(grid, np.diff(cdf))


def erasure_density(grid: Grid) -> QuantizedDensity:
    """Zero-LLR atom: the observation of a punctured bit."""
    return QuantizedDensity.point(grid, 0.0)


# ---------------------------------------------------------------------------
# variable side: sums of LLRs


def _fft_len(n: int) -> int:
    return 1 << int(np.ceil(np.log2(max(n, 2))))


def _clip_linear(full: np.ndarray, count: int, grid: Grid) -> np.ndarray:
    """Fold the linear convolution of ``count`` lattice densities back onto the lattice."""
    h = grid.half
    centre = count * h  # index of LLR 0 in ``full``
    np.maximum(full, 0.0, out=full)
    out = full[centre - h:centre + h + 1].copy()
    out[0] += full[:centre - h].sum()
    out[-1] += full[centre + h + 1:].sum()
    return out


def var_update(incoming: Sequence[QuantizedDensity], channel: QuantizedDensity) -> QuantizedDensity:
    """Density of the channel LLR plus the incoming LLRs (all independent)."""
    dens = [channel, *incoming]
    grid = _check_grids(dens)
    if not incoming:
        return channel
    n = len(dens)
    nfft = _fft_len(n * (grid.size - 1) + 1)
    acc = np.ones(nfft // 2 + 1, dtype=complex)
    finite = 1.0
    for d in dens:
        acc *= np.fft.rfft(d.mass, nfft)
        finite *= 1.0 - d.inf_mass
    full = np.fft.irfft(acc, nfft)[: n * (grid.size - 1) + 1]
    mass = _clip_linear(full, n, grid)
    if mass.sum() > 0:
        mass *= finite / mass.sum()
    return QuantizedDensity(grid, mass, 1.0 - finite)


# ---------------------------------------------------------------------------
# check side: pairwise box-plus through the quantized table


@njit(cache=True)
def _boxplus_pair(pos_a, neg_a, inf_a, pos_b, neg_b, inf_b, table, drop):
    """Combine two densities split into sign halves over magnitudes 0..N.

    ``pos[m]``/``neg[m]`` hold the mass at ``+x_m``/``-x_m``; the zero point is
    kept in ``pos[0]`` (``neg[0] = 0``).
    """
    n = pos_a.shape[0]
    pos = np.zeros(n)
    neg = np.zeros(n)
    for i in range(n):
        pa, na = pos_a[i], neg_a[i]
        if pa + na <= drop:
            continue
        row = table[i]
        for j in range(n):
            pb, nb = pos_b[j], neg_b[j]
            if pb + nb <= drop:
                continue
            k = row[j]
            pos[k] += pa * pb + na * nb
            neg[k] += pa * nb + na * pb
    # +inf is the identity element of box-plus
    for i in range(n):
        pos[i] += inf_a * pos_b[i] + inf_b * pos_a[i]
        neg[i] += inf_a * neg_b[i] + inf_b * neg_a[i]
    pos[0] += neg[0]
    neg[0] = 0.0
    return pos, neg, inf_a * inf_b


class _Split(NamedTuple):
    pos: np.ndarray
    neg: np.ndarray
    inf: float


def _split(d: QuantizedDensity) -> _Split:
    h = d.grid.half
    pos = d.mass[h:].copy()
    neg = np.zeros(h + 1)
    neg[1:] = d.mass[h - 1::-1]
    return _Split(pos, neg, d.inf_mass)


def _join(grid: Grid, s: _Split) -> QuantizedDensity:
    h = grid.half
    mass = np.empty(grid.size)
    mass[h:] = s.pos
    mass[:h] = s.neg[:0:-1]
    return QuantizedDensity(grid, mass, s.inf)


def _combine(a: _Split, b: _Split, table) -> _Split:
    return _Split(*_boxplus_pair(a.pos, a.neg, a.inf, b.pos, b.neg, b.inf, table, DROP))


def chk_update(incoming: Sequence[QuantizedDensity]) -> QuantizedDensity:
    """Density of the box-plus of the incoming LLRs, folded in left to right."""
    if not incoming:
        raise ValueError("a check node output needs at least one incoming density")
    grid = _check_grids(list(incoming))
    if len(incoming) == 1:
        return incoming[0]
    table = grid.boxplus_table()
    acc = _split(incoming[0])
    for d in incoming[1:]:
        acc = _combine(acc, _split(d), table)
    return _join(grid, acc)


# ---------------------------------------------------------------------------
# density evolution


class AwgnResult(NamedTuple):
    converged: bool
    error_prob: float
    iterations: int
    history: list | None = None


def _boxplus_powers(c: _Split, top: int, table) -> list:
    """``[c^[+]0 (identity), c, c [+] c, ...]`` up to exponent ``top``."""
    n = c.pos.shape[0]
    ident = _Split(np.zeros(n), np.zeros(n), 1.0)
    out = [ident]
    if top >= 1:
        out.append(c)
    for _ in range(2, top + 1):
        out.append(_combine(out[-1], c, table))
    return out


def _mix(parts, weights, grid: Grid) -> _Split:
    n = grid.half + 1
    pos, neg, inf = np.zeros(n), np.zeros(n), 0.0
    for w, p in zip(weights, parts):
        pos += w * p.pos
        neg += w * p.neg
        inf += w * p.inf
    return _Split(pos, neg, inf)


def _standard_run(dd: DegreeDistribution, ch: QuantizedDensity, l, err_tol, record):
    grid = ch.grid
    table = grid.boxplus_table()
    lam, rho = dd.lam, dd.rho
    dv = max(lam)
    h = grid.half
    nfft = _fft_len(dv * (grid.size - 1) + 1)
    ch_hat = np.fft.rfft(ch.mass, nfft)
    c = _Split(np.r_[1.0, np.zeros(h)], np.zeros(h + 1), 0.0)  # check-to-variable, all erased
    pe_prev = np.inf
    hist = [] if record else None
    for it in range(1, l + 1):
        # variable side: sum_i lambda_i (ch * c^(i-1)), clipped per degree
        c_d = _join(grid, c)
        c_hat = np.fft.rfft(c_d.mass, nfft)
        mass = np.zeros(grid.size)
        inf = 0.0
        for i, w in lam.items():
            full = np.fft.irfft(ch_hat * c_hat ** (i - 1), nfft)[: i * (grid.size - 1) + 1]
            part = _clip_linear(full, i, grid)
            fin = (1.0 - c_d.inf_mass) ** (i - 1) * (1.0 - ch.inf_mass)
            s = part.sum()
            if s > 0:
                part *= fin / s
            mass += w * part
            inf += w * (1.0 - fin)
        v = QuantizedDensity(grid, mass, inf)
        pe = v.error_probability()
        if record:
            hist.append(v)
        if pe < err_tol:
            return AwgnResult(True, pe, it, hist)
        if abs(pe_prev - pe) < STALL_TOL:
            return AwgnResult(False, pe, it, hist)
        pe_prev = pe
        # check side: sum_j rho_j v^[+](j-1)
        pw = _boxplus_powers(_split(v), max(rho) - 1, table)
        c = _mix([pw[j - 1] for j in rho], list(rho.values()), grid)
    return AwgnResult(False, pe, l, hist)


def _met_run(met: MetEnsemble, ch: QuantizedDensity, l, err_tol, record):
    grid = ch.grid
    table = grid.boxplus_table()
    a = met_arrays(met)
    m = met.m_e
    h = grid.half
    ers = erasure_density(grid)
    dmax = int(a.vdeg.sum(axis=1).max())
    nfft = _fft_len((dmax + 1) * (grid.size - 1) + 1)
    obs_hat = {False: np.fft.rfft(ch.mass, nfft), True: np.fft.rfft(ers.mass, nfft)}
    zero = _Split(np.r_[1.0, np.zeros(h)], np.zeros(h + 1), 0.0)
    c = [zero] * m
    var_w = a.L[:, None] * a.vdeg / np.where(a.Lx > 0, a.Lx, 1.0)[None, :]
    chk_w = a.R[:, None] * a.cdeg / np.where(a.Rx > 0, a.Rx, 1.0)[None, :]
    pe_prev = np.inf
    hist = [] if record else None
    pe = 1.0
    for it in range(1, l + 1):
        c_d = [_join(grid, ci) for ci in c]
        c_hat = [np.fft.rfft(d.mass, nfft) for d in c_d]
        c_fin = [1.0 - d.inf_mass for d in c_d]
        v = []
        worst = 0.0
        for i in range(m):
            if a.Lx[i] <= 0:
                v.append(zero)
                continue
            mass = np.zeros(grid.size)
            inf = 0.0
            mass_multi = np.zeros(grid.size)
            for t in range(a.vdeg.shape[0]):
                w = var_w[t, i]
                if w == 0.0:
                    continue
                acc = obs_hat[bool(a.punct[t])].copy()
                fin = 1.0
                count = 1
                for k in range(m):
                    e = int(a.vdeg[t, k]) - (1 if k == i else 0)
                    if e > 0:
                        acc *= c_hat[k] ** e
                        fin *= c_fin[k] ** e
                        count += e
                full = np.fft.irfft(acc, nfft)[: count * (grid.size - 1) + 1]
                part = _clip_linear(full, count, grid)
                s = part.sum()
                if s > 0:
                    part *= fin / s
                mass += w * part
                inf += w * (1.0 - fin)
                if a.multi[t]:
                    mass_multi += w * part
            v_i = QuantizedDensity(grid, mass, inf)
            v.append(_split(v_i))
            pe_i = float(mass_multi[:h].sum() + 0.5 * mass_multi[h])
            if pe_i > worst:
                worst = pe_i
        # check side, one output density per class
        tops = a.cdeg.max(axis=0)
        pw = [_boxplus_powers(v[k], int(tops[k]), table) for k in range(m)]
        new_c = []
        for j in range(m):
            if a.Rx[j] <= 0:
                new_c.append(zero)
                continue
            parts, weights = [], []
            for t in range(a.cdeg.shape[0]):
                w = chk_w[t, j]
                if w == 0.0:
                    continue
                acc = None
                for k in range(m):
                    e = int(a.cdeg[t, k]) - (1 if k == j else 0)
                    if e > 0:
                        acc = pw[k][e] if acc is None else _combine(acc, pw[k][e], table)
                parts.append(acc if acc is not None else pw[0][0])
                weights.append(w)
            new_c.append(_mix(parts, weights, grid))
        c = new_c
        for j in range(m):
            if a.deg1[j]:
                d = _join(grid, c[j])
                # a degree-1 class is resolved when its check messages are error free
                worst = max(worst, d.error_probability())
        pe = worst
        if record:
            hist.append(pe)
        if pe < err_tol:
            return AwgnResult(True, pe, it, hist)
        if abs(pe_prev - pe) < STALL_TOL:
            return AwgnResult(False, pe, it, hist)
        pe_prev = pe
    return AwgnResult(False, pe, l, hist)


def awgn_converges(ens: DegreeDistribution | MetEnsemble, sigma: float, l: int = MAX_ITER,
                   err_tol: float = ERR_TOL, grid: Grid | None = None,
                   record: bool = False) -> AwgnResult:
    """Run quantized DE at noise level ``sigma``.

    Converged means the variable-to-check error probability fell below
    ``err_tol`` within ``l`` rounds.  A round-to-round change below 1e-13
    with the error still above tolerance counts as a stuck fixed point.
    For MET ensembles the error is the worst class, taken over messages
    leaving variables of degree >= 2 and over check-to-variable messages on
    classes carrying degree-1 variables (their own outgoing message is just
    the channel observation and never improves).  With ``record`` the
    per-round densities (standard) or error probabilities (MET) are returned.
    """
    grid = grid or Grid()
    ch = channel_density(sigma, grid)
    if isinstance(ens, DegreeDistribution):
        return _standard_run(ens, ch, int(l), err_tol, record)
    return _met_run(ens, ch, int(l), err_tol, record)
