"""Experiment runners behind the command-line interface.

Each runner takes a resolved config, a seed and a worker count and returns an
:class:`Artifact`: a table (rows), a summary, an exit status and optional
extra text files. Runners never look at the clock or the environment, so
equal inputs give byte-identical outputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import gap, mds, oracle, transform
from .gf import FieldError
from .model import ModelError
from .presets import DEFAULTS, build_instance

OK, VERIFY_FAILED, INVALID = 0, 1, 2


class ConfigError(ValueError):
    pass


@dataclass
class Artifact:
    experiment: str
    columns: list
    rows: list
    summary: dict
    status: int = OK
    files: dict = field(default_factory=dict)  # extra name -> text


def validate(experiment: str, cfg: dict) -> dict:
    if experiment not in DEFAULTS:
        raise ConfigError(f"unknown experiment {experiment!r}")
    allowed = DEFAULTS[experiment]
    unknown = sorted(set(cfg) - set(allowed))
    if unknown:
        raise ConfigError(f"{experiment} does not accept keys {unknown}; allowed: {sorted(allowed)}")
    if "solver" in cfg:
        bad = sorted(set(cfg["solver"]) - set(allowed["solver"]))
        if bad:
            raise ConfigError(f"unknown solver keys {bad}")
    return cfg


def _int(cfg, key, lo=None):
    v = cfg[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or int(v) != v:
        raise ConfigError(f"{key} must be an integer, got {v!r}")
    v = int(v)
    if lo is not None and v < lo:
        raise ConfigError(f"{key} must be >= {lo}, got {v}")
    return v


def _solver(cfg, instance, seed, jobs) -> oracle.SolverConfig:
    s = cfg["solver"]
    try:
        return oracle.SolverConfig.for_instance(
            instance, int(s["points"]), max_iterations=int(s["max_iterations"]),
            rel_tolerance=float(s["rel_tolerance"]), restarts=int(s["restarts"]), seed=seed, jobs=jobs,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def _clean(v):
    """Plain JSON types (numpy scalars, tuples, non-finite floats)."""
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, np.ndarray):
        return _clean(v.tolist())
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    return v


def run_rd_curves(cfg, seed, jobs) -> Artifact:
    inst = build_instance(cfg["instance"])
    scfg = _solver(cfg, inst, seed, jobs)
    try:
        scenarios = [oracle.Scenario(s) for s in cfg["scenarios"]]
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    results = {s: oracle.solve(inst, s, scfg) for s in scenarios}
    rows = [row for s in scenarios for row in oracle.curve_rows(results[s])]
    unconverged = {s.value: results[s].unconverged() for s in scenarios}
    summary = {
        "instance": inst.to_dict(),
        "max_distortion": inst.max_distortion(),
        "unconverged_slopes": unconverged,
        "curve_checks": {s.value: oracle.check_curve(results[s]) for s in scenarios},
        "ordering": oracle.check_ordering(results),
    }
    status = OK if not any(unconverged.values()) else VERIFY_FAILED
    return Artifact("rd-curves", ["scenario", "slope", "rate_nats", "distortion", "iterations"], rows, summary, status)


def _theorem_artifact(name, report) -> Artifact:
    rows = [row for curve in report.curves.values() for row in oracle.curve_rows(curve)]
    return Artifact(name, ["scenario", "slope", "rate_nats", "distortion", "iterations"], rows,
                    report.as_dict(), OK if report.passed else VERIFY_FAILED)


def run_theorem1(cfg, seed, jobs) -> Artifact:
    inst = build_instance(cfg["instance"])
    report = oracle.check_theorem1(inst, _solver(cfg, inst, seed, jobs), float(cfg["tolerance"]),
                                   float(cfg["leak_tolerance"]))
    return _theorem_artifact("theorem1", report)


def run_theorem3(cfg, seed, jobs) -> Artifact:
    inst = build_instance(cfg["instance"])
    report = oracle.check_theorem3(inst, _solver(cfg, inst, seed, jobs), float(cfg["tolerance"]))
    return _theorem_artifact("theorem3", report)


def run_mds_demo(cfg, seed, jobs) -> Artifact:
    cols = ["block", "mask", "payload", "ok"]
    m = _int(cfg, "m", 1)
    if cfg["blocks"] is not None:
        # user blocks: [{"block": hex, "mask": bits}, ...]
        try:
            lines = [mds.code_hex_block(b["block"], b["mask"], m) for b in cfg["blocks"]]
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"blocks entries need 'block' and 'mask': {exc}") from None
        rows = [dict(zip(cols, line.split(","))) for line in lines]
        bad = sum(r["ok"] != "1" for r in rows)
        return Artifact("mds-demo", cols, rows, {"m": m, "blocks": len(rows), "failed": bad},
                        OK if bad == 0 else VERIFY_FAILED)
    n, k, trials = _int(cfg, "n", 1), _int(cfg, "k", 1), _int(cfg, "trials", 1)
    lines, summary = mds.run_trials(n, k, m, trials, seed)
    rows = [dict(zip(cols, line.split(","))) for line in lines]
    summary = {"n": n, "k": k, "m": m, **summary}
    status = OK if summary["mismatches"] == 0 else VERIFY_FAILED
    return Artifact("mds-demo", cols, rows, summary, status)


def run_dft_demo(cfg, seed, jobs) -> Artifact:
    n, k, rate, trials = _int(cfg, "n", 1), _int(cfg, "k", 1), _int(cfg, "rate", 0), _int(cfg, "trials", 1)
    res = transform.run_dft_trials(n, k, rate, trials, seed, cfg["mask_mode"], float(cfg["loading"]), jobs=jobs)
    rows = []
    if cfg["per_trial"]:
        ok = res.contraction_holds
        rows = [
            {"trial": t, "n": n, "k": k, "rate": rate, "relevant_mse": float(res.relevant_mse[t]),
             "coefficient_mse": float(res.coefficient_mse[t]), "contraction_ok": int(ok[t])}
            for t in range(trials)
        ]
    summary = res.summary()
    summary["mean_relevant_le_mean_coefficient"] = bool(summary["relevant_mse"] <= summary["coefficient_mse"])
    if k == n:
        summary["unitary_max_abs_difference"] = float(np.max(np.abs(res.relevant_mse - res.coefficient_mse)))
    status = OK if summary["contraction_violations"] == 0 else VERIFY_FAILED
    cols = ["trial", "n", "k", "rate", "relevant_mse", "coefficient_mse", "contraction_ok"]
    return Artifact("dft-demo", cols, rows, summary, status)


def run_two_stage(cfg, seed, jobs) -> Artifact:
    n, k, trials = _int(cfg, "n", 1), _int(cfg, "k", 0), _int(cfg, "trials", 1)
    pairs = cfg["pairs"]
    if not pairs or any(len(p) != 2 for p in pairs):
        raise ConfigError("pairs must be a non-empty list of [R0, R1]")
    rows, per_pair = [], []
    for R0, R1 in pairs:
        res = transform.run_two_stage_trials(n, k, int(R0), int(R1), trials, seed, cfg["mask_mode"],
                                             float(cfg["loading"]), jobs=jobs)
        rows.extend(res.rows())
        per_pair.append(res.summary())
    deficits = [p["deficit_db"] for p in per_pair]
    limit = float(cfg["max_deficit_db"])
    summary = {
        "pairs": per_pair,
        "deficits_db": deficits,
        "deficit_shrinks": all(b < a for a, b in zip(deficits, deficits[1:])),
        "within_limit_at_first_pair": deficits[0] <= limit,
        "max_deficit_db": limit,
    }
    cols = ["trial", "n", "k", "R0", "R1", "dist_important", "dist_other", "bits"]
    return Artifact("two-stage", cols, rows, summary, OK)


def run_rate_gap(cfg, seed, jobs) -> Artifact:
    samples = _int(cfg, "samples", 2)
    rows, details = [], []
    for spec in cfg["families"]:
        try:
            dist = gap.SideInfoDistribution.of(spec["family"], **spec.get("params", {}))
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"bad family entry {spec!r}: {exc}") from None
        res = gap.gap_monte_carlo(dist, samples, seed)
        rows.append(res.row())
        details.append({
            "family": dist.family.value,
            "params": dist.params,
            "closed_form": res.closed_form,
            "from_moments": gap.gap_from_moments(dist),
            "z_score": res.z_score,
            "within_3_stderr": bool(abs(res.z_score) <= 3) if math.isfinite(res.z_score) else None,
            "nonfinite_samples": res.nonfinite,
            "divergence_trend": res.trend,
            "divergence_detected": gap.divergence_detected(res) if res.diverges else None,
            "approximations": gap.approximate_gap(dist),
        })
    cols = ["family", "params", "gap_closed_nats", "gap_mc_nats", "mc_stderr", "samples", "seed"]
    return Artifact("rate-gap", cols, rows, {"families": details}, OK)


def run_penalty_check(cfg, seed, jobs) -> Artifact:
    try:
        rep = gap.penalty_empirical_check(cfg["atoms"], cfg["probs"], cfg["distortions"], _int(cfg, "points", 3),
                                          float(cfg["span"]), float(cfg["tolerance"]))
    except gap.GapError as exc:
        raise ConfigError(str(exc)) from None
    cols = ["distortion", "rate_none", "rate_both", "gap", "target"]
    return Artifact("penalty-check", cols, list(rep.rows()), rep.summary(), OK if rep.passed else VERIFY_FAILED)


RUNNERS = {
    "rd-curves": run_rd_curves,
    "theorem1": run_theorem1,
    "theorem3": run_theorem3,
    "mds-demo": run_mds_demo,
    "dft-demo": run_dft_demo,
    "two-stage": run_two_stage,
    "rate-gap": run_rate_gap,
    "penalty-check": run_penalty_check,
}


def run(experiment: str, cfg: dict, seed: int = 0, jobs: int = 1) -> Artifact:
    validate(experiment, cfg)
    try:
        art = RUNNERS[experiment](cfg, seed, jobs)
    except (ModelError, mds.CodingError, transform.InterpolationError, transform.QuantizerError,
            gap.GapError, FieldError) as exc:
        raise ConfigError(str(exc)) from None
    art.summary = _clean(art.summary)
    art.rows = [_clean(r) for r in art.rows]
    return art
