"""``forge`` command line: threshold | optimize | joint | surface.

Exit status: 0 success, 2 bad config, 3 infeasible problem, 4 I/O error.
"""
from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

from .experiment import EXIT_OK, ExperimentConfig, classify_error, run, summary_rows


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="forge", description="Density-evolution threshold "
                                "evaluation and degree-distribution search for LDPC ensembles.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (("threshold", "threshold of a fixed ensemble"),
                        ("optimize", "coefficient search for fixed allowed degrees"),
                        ("joint", "joint structure and coefficient search"),
                        ("surface", "export a 2-D cost surface")):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("-c", "--config", required=True, help="experiment JSON file")
        sp.add_argument("--jobs", type=int, default=1, help="trials run in parallel")
        sp.add_argument("--seed", type=int, default=None, help="override the config seed")
        sp.add_argument("--out", default=None, help="output directory (default: config 'out' or ./results)")
        sp.add_argument("--trials", type=int, default=None, help="override the number of trials")
        timing = sp.add_mutually_exclusive_group()
        timing.add_argument("--timing", dest="timing", action="store_true", default=None,
                            help="record wall-clock cpu_s columns")
        timing.add_argument("--no-timing", dest="timing", action="store_false",
                            help="leave cpu_s columns empty (default) so reruns are byte-identical")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = ExperimentConfig.load(args.config)
        if cfg.kind != args.command:
            cfg.doc = dict(cfg.doc, kind=args.command)
            cfg.kind = args.command
        if args.seed is not None:
            if args.seed < 0:
                raise ValueError("--seed must be non-negative")
            cfg.seed = args.seed
        if args.trials is not None:
            if args.trials < 1:
                raise ValueError("--trials must be positive")
            cfg.trials = args.trials
        if args.timing is not None:
            cfg.timing = args.timing
        # workers rebuild the config from the document
        cfg.doc = dict(cfg.doc, seed=cfg.seed, trials=cfg.trials, timing=cfg.timing)
        out = Path(args.out or cfg.doc.get("out", "results"))
        if args.jobs < 1:
            raise ValueError("--jobs must be >= 1")
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            warnings.showwarning = _show_warning
            results = run(cfg, out, args.jobs)
    except Exception as exc:  # noqa: BLE001 - mapped to exit codes
        code = classify_error(exc)
        print(f"forge: error: {exc}", file=sys.stderr)
        return code
    if cfg.kind == "surface":
        print(f"surface: {results.values.shape[0]}x{results.values.shape[1]} cells, "
              f"max {results.global_max:.4f} -> {out / 'surface.csv'}")
    else:
        for name, best, avg, sd in summary_rows(results, cfg.timing):
            print(f"{name:10s} best {best:.6g}  avg {avg:.6g}  sd {sd:.3g}")
        print(f"results -> {out}")
    return EXIT_OK


def _show_warning(message, category, filename, lineno, file=None, line=None):
    print(f"forge: warning: {message}", file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
