"""Multi-trial experiments driven by a JSON config, with CSV/JSON outputs.

Config keys (``kind`` selects which of the others are read)::

    kind        threshold | optimize | joint | surface
    ensemble    inline ensemble JSON, or
    ensemble_file / reference   path to one, or a built-in name
    structure   {"lambda": [...], "rho": [...], "rate": r} or a MET structure
    spec        joint search limits (standard or MET template)
    channel     "bec" | "biawgn" | {"name": ..., options}
    optimizer   {"name": "ar" | "dife" | "difer" | "random", NP, RM, ...}
    inner       inner AR settings for joint runs
    trials, seed
    timing      record wall-clock columns (off by default so reruns are byte-identical)
    surface     {"axes": [a, b], "x": [start, stop, num], "y": ..., "bindings": {...}}

Trial ``t`` uses seed ``seed + t``.  Trials may run in worker processes; the
parent writes every file, in trial order.
"""
from __future__ import annotations

import csv
import io
import json
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import reference
from .ensemble import (
    TOL_IMPORT,
    DegreeDistribution,
    InvalidEnsembleError,
    MetEnsemble,
    design_rate,
    from_dict,
    validate,
    validate_met,
)
from .optimize import ConfigError, OptimizerConfig, optimize
from .parameterize import DegreeStructure, InfeasibleStructureError, MetStructure, parameterize
from .structure import (
    INNER_DEFAULT,
    OUTER_AR_DEFAULT,
    MetSpec,
    StandardSpec,
    StructureObjective,
    inner_surface,
    structure_surface,
)
from .threshold import CandidateEvaluator, make_channel

WARN_TOL = 1e-6
RESULT_FIELDS = ("trial", "best_threshold", "best_threshold_full", "NOG", "NTT", "NFE", "cpu_s")
SUMMARY_FIELDS = ("metric", "best", "avg", "sd")

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_IO = 0, 2, 3, 4


class EnsembleImportError(ValueError):
    """An ensemble file could not be parsed or fails validation."""


class EnsembleParseError(EnsembleImportError):
    """An ensemble document is not valid JSON or misses required keys."""


class RoundingWarning(UserWarning):
    """Imported coefficients satisfy the constraints only up to rounding."""


# ---------------------------------------------------------------------------
# ensemble import


def _check_imported(ens, rate, source):
    if rate is None:
        rate = design_rate(ens)
    if isinstance(ens, DegreeDistribution):
        rep = validate(ens, rate, WARN_TOL)
        hard = {v.constraint: v.residual for v in rep.violations}
        soft = {}
    else:
        rep = validate_met(ens, rate, WARN_TOL)
        # edge balance is reported but tolerated: published MET tables are
        # known to carry inconsistent check rows
        soft = {v.constraint: v.residual for v in rep.violations
                if v.constraint.startswith("edge_balance")}
        hard = {v.constraint: v.residual for v in rep.violations if v.constraint not in soft}
    errors = {k: r for k, r in hard.items() if abs(r) > TOL_IMPORT}
    if errors:
        listing = ", ".join(f"{k} (residual {r:+.4g})" for k, r in errors.items())
        raise EnsembleImportError(f"{source}: constraints violated: {listing}")
    for k, r in {**hard, **soft}.items():
        warnings.warn(f"{source}: {k} holds only to {r:+.3g}", RoundingWarning, stacklevel=3)
    return rate


def parse_ensemble(doc, source="<config>", normalize: bool = True):
    """Ensemble and rate from a parsed JSON document, validated in import mode."""
    try:
        ens, rate = from_dict(doc)
    except KeyError as e:
        raise EnsembleParseError(f"{source}: {e.args[0]}") from None
    except (TypeError, ValueError, AttributeError) as e:
        raise EnsembleParseError(f"{source}: {e}") from None
    rate = _check_imported(ens, rate, source)
    if normalize and isinstance(ens, DegreeDistribution):
        ens = ens.normalized()
    return ens, rate


def import_ensemble(path, normalize: bool = True):
    """Read an ensemble JSON file (relaxed 1e-2 tolerance, warnings above 1e-6).

    Standard ensembles are rescaled so lambda and rho sum to one exactly.
    Returns ``(ensemble, rate)``.
    """
    path = Path(path)
    text = path.read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise EnsembleParseError(f"{path}: line {e.lineno} column {e.colno}: {e.msg}") from None
    return parse_ensemble(doc, str(path), normalize)


# ---------------------------------------------------------------------------
# config


@dataclass
class ExperimentConfig:
    kind: str
    doc: dict
    base: Path
    trials: int = 1
    seed: int = 0
    timing: bool = False

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: line {e.lineno} column {e.colno}: {e.msg}") from None
        return cls.from_dict(doc, path.parent)

    @classmethod
    def from_dict(cls, doc, base=".") -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        kind = doc.get("kind")
        if kind not in ("threshold", "optimize", "joint", "surface"):
            raise ConfigError(f"kind must be threshold|optimize|joint|surface, got {kind!r}")
        trials = doc.get("trials", 1)
        if int(trials) != trials or trials < 1:
            raise ConfigError("trials must be a positive integer")
        seed = doc.get("seed", 0)
        if int(seed) != seed or seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        return cls(kind, doc, Path(base), int(trials), int(seed), bool(doc.get("timing", False)))

    def channel(self):
        ch = self.doc.get("channel", "bec")
        if isinstance(ch, str):
            return make_channel(ch)
        ch = dict(ch)
        try:
            return make_channel(ch.pop("name", "bec"), **ch)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"channel: {e}") from None

    def ensemble(self):
        d = self.doc
        if "ensemble" in d:
            return parse_ensemble(d["ensemble"])
        if "ensemble_file" in d:
            p = Path(d["ensemble_file"])
            return import_ensemble(p if p.is_absolute() else self.base / p)
        if "reference" in d:
            name = d["reference"]
            if name == "met_reference":
                return reference.met_reference(), reference.RATE
            if name not in reference.TABLE_STANDARD:
                raise ConfigError(f"unknown reference ensemble {name!r}")
            return reference.standard(name).normalized(), reference.RATE
        raise ConfigError("config needs 'ensemble', 'ensemble_file' or 'reference'")

    def structure(self):
        s = self.doc.get("structure")
        if s is None:
            raise ConfigError("optimize needs a 'structure'")
        try:
            if s.get("type", "standard") == "standard":
                return DegreeStructure(tuple(s["lambda"]), tuple(s["rho"]), float(s.get("rate", 0.5)))
            vts = tuple((tuple(v["b"]), tuple(v["d"])) for v in s["var_types"])
            cts = tuple(tuple(c["d"] if isinstance(c, dict) else c) for c in s["chk_types"])
            return MetStructure(int(s["m_e"]), vts, cts, float(s.get("rate", 0.5)))
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"structure: {e}") from None

    def spec(self):
        s = self.doc.get("spec")
        if s is None:
            raise ConfigError("joint/surface search needs a 'spec'")
        s = dict(s)
        kind = s.pop("type", "standard")
        if kind == "standard":
            try:
                return StandardSpec(**s)
            except TypeError as e:
                raise ConfigError(f"spec: {e}") from None
        return MetSpec.from_dict(s)

    def optimizer(self, key="optimizer", defaults=None) -> tuple[str, OptimizerConfig, dict]:
        o = dict(defaults or {})
        o.update(self.doc.get(key, {}))
        name = o.pop("name", "ar")
        extra = {k: o.pop(k) for k in ("inner_budget",) if k in o}
        names = {f.name for f in fields(OptimizerConfig)}
        unknown = set(o) - names
        if unknown:
            raise ConfigError(f"{key}: unknown settings {sorted(unknown)}")
        return name, OptimizerConfig(**o), extra


# ---------------------------------------------------------------------------
# trials


@dataclass
class TrialResult:
    trial: int
    threshold: float
    NOG: int
    NTT: int
    NFE: int
    cpu_s: float
    trace_csv: str | None
    ensemble_json: str | None


def _ensemble_doc(ens, rate, structure=None):
    if ens is None:
        return None
    doc = ens.to_dict(rate)
    if structure is not None:
        doc["structure"] = structure_doc(structure)
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def structure_doc(s):
    if isinstance(s, DegreeStructure):
        return {"lambda": list(s.lambda_degrees), "rho": list(s.rho_degrees), "rate": s.rate}
    return {"type": "met", "m_e": s.m_e,
            "var_types": [{"b": list(b), "d": list(d)} for b, d in s.var_types],
            "chk_types": [{"d": list(d)} for d in s.chk_types], "rate": s.rate}


def run_trial(cfg: ExperimentConfig, t: int) -> TrialResult:
    seed = cfg.seed + t
    channel = cfg.channel()
    if cfg.kind == "threshold":
        ens, rate = cfg.ensemble()
        t0 = time.perf_counter()
        th = float(channel.threshold(ens))
        return TrialResult(t, th, 1, 1, 0, time.perf_counter() - t0, None, _ensemble_doc(ens, rate))
    if cfg.kind == "optimize":
        s = cfg.structure()
        desc = parameterize(s)
        name, ocfg, _ = cfg.optimizer()
        ocfg = _with_seed(ocfg, seed)
        ev = CandidateEvaluator(desc, channel)
        res = optimize(ev, ocfg, name)
        m = res.metrics
        return TrialResult(t, res.best_threshold, m.NOG, m.NTT, m.NFE, m.cpu_seconds,
                           res.trace.to_csv(cfg.timing), _ensemble_doc(res.ensemble, s.rate))
    if cfg.kind == "joint":
        spec = cfg.spec()
        _, icfg, _ = cfg.optimizer("inner", {f: getattr(INNER_DEFAULT, f)
                                             for f in ("NP", "RM", "SR_init", "stall_limit")})
        name, ocfg, extra = cfg.optimizer("outer", OUTER_AR_DEFAULT if
                                          cfg.doc.get("outer", {}).get("name", "ar") == "ar" else {})
        ocfg = _with_seed(ocfg, seed)
        budget = extra.get("inner_budget")
        if budget is not None:
            ocfg = replace(ocfg, stall_limit=10**9)
        obj = StructureObjective(spec, icfg, channel, seed, inner_budget=budget)
        res = optimize(obj, ocfg, name)
        s, ens = res.ensemble if res.ensemble is not None else (None, None)
        m = res.metrics
        return TrialResult(t, res.best_threshold, m.NOG, obj.inner_evals, m.NFE, m.cpu_seconds,
                           res.trace.to_csv(cfg.timing), _ensemble_doc(ens, spec.rate, s))
    raise ConfigError(f"kind {cfg.kind!r} has no trials")


def _with_seed(ocfg: OptimizerConfig, seed: int) -> OptimizerConfig:
    return replace(ocfg, seed=seed)


def _trial_worker(args):
    doc, base, t = args
    return run_trial(ExperimentConfig.from_dict(doc, base), t)


def run_trials(cfg: ExperimentConfig, jobs: int = 1) -> list[TrialResult]:
    ts = list(range(cfg.trials))
    if jobs <= 1 or cfg.trials == 1:
        return [run_trial(cfg, t) for t in ts]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        out = list(pool.map(_trial_worker, [(cfg.doc, str(cfg.base), t) for t in ts]))
    return sorted(out, key=lambda r: r.trial)


# ---------------------------------------------------------------------------
# outputs


def results_csv(results: list[TrialResult], timing: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULT_FIELDS)
    for r in results:
        w.writerow([r.trial, f"{r.threshold:.4f}", repr(float(r.threshold)), r.NOG, r.NTT, r.NFE,
                    f"{r.cpu_s:.3f}" if timing else ""])
    return buf.getvalue()


def summary_rows(results: list[TrialResult], timing: bool = True) -> list[tuple]:
    """``(metric, best, avg, sd)``; *best* is the value in the best trial, SD is the
    population standard deviation over trials."""
    th = np.array([r.threshold for r in results])
    best = int(np.argmax(th))  # first trial among ties
    rows = []
    metrics = [("threshold", th)]
    for name in ("NOG", "NTT", "NFE"):
        metrics.append((name, np.array([getattr(r, name) for r in results], dtype=float)))
    if timing:
        metrics.append(("cpu_s", np.array([r.cpu_s for r in results])))
    for name, v in metrics:
        rows.append((name, float(v[best]), float(v.mean()), float(v.std(ddof=0))))
    return rows


def summary_csv(results: list[TrialResult], timing: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_FIELDS)
    for name, b, a, s in summary_rows(results, timing):
        if name == "threshold":
            w.writerow([name, f"{b:.4f}", f"{a:.4f}", f"{s:.2e}"])
        else:
            w.writerow([name, repr(b), repr(a), repr(s)])
    if not timing:
        w.writerow(["cpu_s", "", "", ""])
    return buf.getvalue()


def _write(path: Path, text: str):
    path.write_text(text)


def run_surface(cfg: ExperimentConfig, out: Path):
    sdoc = cfg.doc.get("surface")
    if not sdoc:
        raise ConfigError("surface runs need a 'surface' section")
    axes = tuple(sdoc.get("axes", ()))
    bindings = sdoc.get("bindings", {})
    channel = cfg.channel()

    def grid(key):
        g = sdoc.get(key)
        if g is None:
            return None
        if isinstance(g, dict):
            return np.linspace(g["start"], g["stop"], int(g["num"]))
        if len(g) == 3 and isinstance(g[2], int) and cfg.doc.get("structure") is not None:
            return np.linspace(g[0], g[1], g[2])
        return np.asarray(g)

    if cfg.doc.get("structure") is not None:
        surf = inner_surface(cfg.structure(), axes, grid("x"), grid("y"), bindings, channel)
    else:
        _, icfg, _ = cfg.optimizer("inner", {f: getattr(INNER_DEFAULT, f)
                                             for f in ("NP", "RM", "SR_init", "stall_limit")})
        surf = structure_surface(cfg.spec(), axes, grid("x"), grid("y"), bindings, icfg,
                                 channel, cfg.seed)
    _write(out / "surface.csv", surf.to_csv())
    return surf


def run(cfg: ExperimentConfig, out, jobs: int = 1):
    """Run an experiment and write its files into ``out``; returns the trial results."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.kind == "surface":
        return run_surface(cfg, out)
    results = run_trials(cfg, jobs)
    _write(out / "results.csv", results_csv(results, cfg.timing))
    _write(out / "summary.csv", summary_csv(results, cfg.timing))
    for r in results:
        if r.trace_csv is not None:
            _write(out / f"trace_{r.trial}.csv", r.trace_csv)
        if r.ensemble_json is not None:
            _write(out / f"ensemble_{r.trial}.json", r.ensemble_json)
    return results


def classify_error(exc: BaseException) -> int:
    """Exit status for an exception raised while running an experiment."""
    if isinstance(exc, EnsembleParseError):
        return EXIT_CONFIG
    if isinstance(exc, (InfeasibleStructureError, EnsembleImportError)):
        return EXIT_INFEASIBLE
    if isinstance(exc, OSError):
        return EXIT_IO
    if isinstance(exc, (ConfigError, InvalidEnsembleError, KeyError, TypeError, ValueError)):
        return EXIT_CONFIG
    raise exc


def default_jobs() -> int:
    return os.cpu_count() or 1
