"""AR, Dif.E and Dif.E.R on one fixed degree structure.

    python3 demos/compare_optimizers.py [trials]
"""
import sys

import numpy as np

from ldpc_forge import reference as R
from ldpc_forge.optimize import OptimizerConfig, optimize
from ldpc_forge.parameterize import DegreeStructure, parameterize
from ldpc_forge.threshold import CandidateEvaluator


def main(trials=3):
    lam, rho, NP = R.FIXED_PROBLEMS["2_3_6_20"]
    desc = parameterize(DegreeStructure(lam, rho, R.RATE))
    for method in ("ar", "dife", "difer"):
        res = [optimize(CandidateEvaluator(desc), OptimizerConfig(NP=NP, seed=s), method)
               for s in range(trials)]
        best = np.array([r.best_threshold for r in res])
        nog = np.mean([r.NOG for r in res])
        ntt = np.mean([r.metrics.NTT for r in res])
        print(f"{method:6s} best {best.max():.5f}  mean {best.mean():.5f}  "
              f"NOG {nog:.1f}  NTT {ntt:.0f}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 3)
