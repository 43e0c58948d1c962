"""Erasure thresholds of the bundled reference ensembles.

    python3 demos/fixed_thresholds.py
"""
from ldpc_forge import reference as R
from ldpc_forge.threshold import BEC


def main():
    ch = BEC()
    print(f"{'ensemble':18s} {'computed':>9s} {'reported':>9s}")
    for name in R.TABLE_STANDARD:
        th = ch.threshold(R.standard(name).normalized())
        print(f"{name:18s} {th:9.5f} {R.reported_threshold(name):9.4f}")
    print(f"{'MET reference':18s} {ch.threshold(R.met_reference()):9.5f}")


if __name__ == "__main__":
    main()
