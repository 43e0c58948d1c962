"""Exact density evolution on the binary erasure channel."""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from . import _kernels as K
from .ensemble import DegreeDistribution, InvalidEnsembleError, MetEnsemble

CONV_TOL = 1e-8
MAX_ITER = 20000


class BecResult(NamedTuple):
    converged: bool
    eps: float | np.ndarray
    iterations: int


def bec_step(dd: DegreeDistribution, eps_star: float, eps: float) -> float:
    """One BP round on the BEC: ``eps_star * lambda(1 - rho(1 - eps))``."""
    return float(K.bec_step(dd.lambda_poly(), dd.rho_poly(), float(eps_star), float(eps)))


def bec_converges(dd: DegreeDistribution, eps_star: float, l: int = MAX_ITER,
                  conv_tol: float = CONV_TOL) -> BecResult:
    """Run the recursion from ``eps = eps_star`` for at most ``l`` rounds.

    Stops early on success (``eps < conv_tol``) or on stagnation above the
    tolerance (``|delta eps| < 1e-15``), which counts as failure.
    """
    ok, eps, it = K.bec_run(dd.lambda_poly(), dd.rho_poly(), float(eps_star), int(l),
                            conv_tol, K.STALL_TOL)
    return BecResult(bool(ok), float(eps), int(it))


class MetArrays(NamedTuple):
    vdeg: np.ndarray
    L: np.ndarray
    punct: np.ndarray
    multi: np.ndarray
    deg1: np.ndarray
    Lx: np.ndarray
    cdeg: np.ndarray
    R: np.ndarray
    Rx: np.ndarray


def met_arrays(met: MetEnsemble) -> MetArrays:
    """Flatten a MET ensemble for the compiled kernels, checking class coverage."""
    Lx = met.var_edges()
    Rx = met.chk_edges()
    for i in range(met.m_e):
        if (Lx[i] <= 0.0) != (Rx[i] <= 0.0):
            side = "variable" if Lx[i] <= 0.0 else "check"
            raise InvalidEnsembleError(f"edge class {i + 1} has no {side}-node edges")
    vdeg = met.var_degrees()
    multi = vdeg.sum(axis=1) >= 2
    deg1 = (vdeg[~multi] > 0).any(axis=0) if (~multi).any() else np.zeros(met.m_e, dtype=bool)
    return MetArrays(vdeg, met.var_coeffs(), met.punctured_mask(), multi, deg1, Lx,
                     met.chk_degrees(), met.chk_coeffs(), Rx)


def met_bec_step(met: MetEnsemble | MetArrays, eps_star: float, eps) -> np.ndarray:
    """One MET round: class-wise ``lambda(r, 1 - rho(1 - eps))`` with r = (1, eps_star).

    Punctured variable types see no channel observation (factor 1).
    """
    a = met if isinstance(met, MetArrays) else met_arrays(met)
    eps = np.asarray(eps, dtype=float)
    if eps.shape != a.Lx.shape:
        raise ValueError(f"eps must have length m_e={a.Lx.shape[0]}")
    return K.met_step(a.vdeg, a.L, a.punct, a.multi, a.Lx, a.cdeg, a.R, a.Rx, float(eps_star), eps)


def met_bec_converges(met: MetEnsemble | MetArrays, eps_star: float, l: int = MAX_ITER,
                      conv_tol: float = CONV_TOL) -> BecResult:
    """MET recursion from ``eps_i = eps_star`` in every class.

    Success is judged on the max-norm of the variable-to-check erasures that
    leave variables of degree >= 2.  Degree-1 variables only ever forward
    their channel observation (erasure pinned at ``eps_star``), so on their
    classes the check-to-variable erasure must vanish instead.
    """
    a = met if isinstance(met, MetArrays) else met_arrays(met)
    ok, eps, it = K.met_run(a.vdeg, a.L, a.punct, a.multi, a.deg1, a.Lx, a.cdeg, a.R, a.Rx,
                            float(eps_star), int(l), conv_tol, K.STALL_TOL)
    return BecResult(bool(ok), eps, int(it))
