"""Threshold landscape over two coefficients of a fixed structure.

Writes ``coefficient_surface.csv`` and reports the maximum and whether every
near-optimal cell climbs to it.

    python3 demos/cost_surface.py [points_per_axis]
"""
import sys
from pathlib import Path

import numpy as np

from ldpc_forge.parameterize import DegreeStructure
from ldpc_forge.structure import inner_surface


def main(n=21):
    s = DegreeStructure((2, 3, 7, 25), (7, 8), 0.5)
    xs = np.linspace(0.2274, 0.3274, n)
    ys = np.linspace(0.2126, 0.3126, n)
    surf = inner_surface(s, ("lambda_2", "lambda_7"), xs, ys, {"lambda_3": 0.2024})
    Path("coefficient_surface.csv").write_text(surf.to_csv())
    i, j = np.unravel_index(np.argmax(np.where(surf.feasible, surf.values, -1)), surf.values.shape)
    near = surf.feasible & (surf.values >= surf.global_max - 1e-3)
    print(f"max {surf.global_max:.5f} at lambda_2={xs[i]:.4f}, lambda_7={ys[j]:.4f}")
    print(f"{near.sum()} cells within 1e-3 of the max, "
          f"{np.sum(near & ~surf.connected_to_max(3))} not connected to it")
    print(f"{len(surf.local_maxima(4))} local maxima at 4 decimals")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 21)
