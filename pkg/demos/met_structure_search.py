"""Differential evolution over MET structures on the erasure channel.

The template has two transmitted variable classes of free degree, a
punctured degree-6 type and degree-1 variables, with a free check degree.
The best structure found is compared against the bundled MET reference.

    python3 demos/met_structure_search.py [seed]
"""
import sys

from ldpc_forge import reference as R
from ldpc_forge.optimize import OptimizerConfig
from ldpc_forge.structure import MetSpec, outer_dife
from ldpc_forge.threshold import BEC

TEMPLATE = MetSpec(
    4,
    ((False, ("i1", 0, 0, 0)), (False, ("i2", 0, 0, 0)), (True, (0, 3, 3, 0)),
     (False, (0, 0, 0, 1))),
    (("k+1", 1, 0, 0), ("k", 2, 0, 0), (0, 0, 3, 1)),
    (("i1", 2, 10), ("i2", 2, 10), ("k", 2, 8)),
    degree_one_classes=(4,), max_degree=10)


def main(seed=0):
    res = outer_dife(TEMPLATE, OptimizerConfig(NP=20, stall_limit=3, seed=seed))
    print("best structure:", res.structure)
    print(f"threshold {res.threshold:.5f} after {res.metrics.NOG} generations, "
          f"{res.inner_evals} inner evaluations")
    print(f"MET reference threshold {BEC().threshold(R.met_reference()):.5f}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 0)
