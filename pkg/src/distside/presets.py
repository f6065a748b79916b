"""Built-in experiment configurations and instance builders."""

from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np

from .model import (
    DiscreteInstance,
    ModelError,
    cyclic_group,
    cyclic_squared,
    erasure_instance,
    group_instance,
    hamming,
    scaled_instance,
    uniform,
)

EXPERIMENTS = ("rd-curves", "theorem1", "theorem3", "mds-demo", "dft-demo", "two-stage", "rate-gap", "penalty-check")

# command name -> experiment
COMMANDS = {
    "rd-curves": "rd-curves",
    "check-theorem1": "theorem1",
    "check-theorem3": "theorem3",
    "mds-demo": "mds-demo",
    "dft-demo": "dft-demo",
    "two-stage": "two-stage",
    "rate-gap": "rate-gap",
    "penalty-check": "penalty-check",
}

_SOLVER = {"points": 32, "max_iterations": 10000, "rel_tolerance": 1e-9, "restarts": 8}

# defaults per experiment; every accepted config key appears here
DEFAULTS = {
    "rd-curves": {
        "instance": {"kind": "erasure", "alphabet": 2, "relevant_prob": 0.5},
        "scenarios": ["NONE", "DEC", "ENC", "BOTH"],
        "solver": dict(_SOLVER),
    },
    "theorem1": {
        "instance": {"kind": "group", "order": 4, "profile": [[0, 0], [1, 2], [4, 8], [1, 2]], "p_q": [0.5, 0.5]},
        "tolerance": 1e-3,
        "leak_tolerance": 1e-4,
        "solver": dict(_SOLVER),
    },
    "theorem3": {
        "instance": {"kind": "scaled", "p_x": [0.5, 0.5], "d0": [1.0, 3.0], "d1": "hamming", "p_q": [0.5, 0.5]},
        "tolerance": 1e-3,
        "solver": dict(_SOLVER),
    },
    "mds-demo": {"n": 7, "k": 5, "m": 3, "trials": 10000, "blocks": None},
    "dft-demo": {"n": 64, "k": 16, "rate": 8, "trials": 100000, "mask_mode": "random", "loading": 4.0,
                 "per_trial": True},
    "two-stage": {"n": 64, "k": 32, "pairs": [[4, 8], [6, 10], [8, 12]], "trials": 10000, "mask_mode": "random",
                  "loading": 4.0, "max_deficit_db": 1.25},
    "rate-gap": {
        "families": [
            {"family": "exponential", "params": {"tau": 1.0}},
            {"family": "uniform", "params": {}},
            {"family": "lognormal", "params": {"M": 0.0, "Q2": 1.0}},
            {"family": "pareto", "params": {"a": 3.0, "b": 1.0}},
            {"family": "gamma", "params": {"a": 4.0, "b": 1.0}},
            {"family": "pathological", "params": {"eps": 0.01}},
            {"family": "positive-cauchy", "params": {}},
        ],
        "samples": 1000000,
    },
    "penalty-check": {"atoms": [0.25, 4.0], "probs": [0.5, 0.5], "distortions": None, "points": 129, "span": 6.0,
                      "tolerance": 0.05},
}


@dataclass(frozen=True)
class Preset:
    name: str
    experiment: str
    tags: tuple
    description: str
    params: dict
    seed: int = 0

    def resolved(self) -> dict:
        cfg = copy.deepcopy(DEFAULTS[self.experiment])
        deep_update(cfg, copy.deepcopy(self.params))
        return cfg

    def catalog_entry(self) -> dict:
        return {"name": self.name, "experiment": self.experiment, "tags": list(self.tags),
                "description": self.description}


def deep_update(base: dict, extra: dict) -> dict:
    for key, val in extra.items():
        if isinstance(val, dict) and isinstance(base.get(key), dict) and key != "params":
            deep_update(base[key], val)
        else:
            base[key] = val
    return base


PRESETS = [
    Preset("rd-erasure-binary", "rd-curves", ("rd", "lossless"),
           "All four rate-distortion curves for a binary source with an erasure-style relevance mask", {}),
    Preset("rd-scaled-4ary", "rd-curves", ("rd", "theorem"),
           "All four curves for a 4-ary source with scaled cyclic-squared distortion",
           {"instance": {"kind": "scaled", "p_x": [0.25] * 4, "d0": [0.5, 2.0], "d1": "cyclic_squared",
                         "p_q": [0.5, 0.5]}}),
    Preset("theorem1-z2", "theorem1", ("theorem", "encoder-side"),
           "Encoder-only side information matches full side information on Z_2",
           {"instance": {"kind": "group", "order": 2, "profile": [[0, 0], [1, 2]], "p_q": [0.5, 0.5]}}),
    Preset("theorem1-z4", "theorem1", ("theorem", "encoder-side"),
           "Encoder-only side information matches full side information on Z_4", {}),
    Preset("theorem3-binary", "theorem3", ("theorem", "decoder-side"),
           "Decoder-only side information is useless for a scaled binary Hamming distortion", {}),
    Preset("theorem3-4ary", "theorem3", ("theorem", "decoder-side"),
           "Decoder-only side information is useless for a scaled 4-ary cyclic-squared distortion",
           {"instance": {"kind": "scaled", "p_x": [0.25] * 4, "d0": [0.5, 2.0], "d1": "cyclic_squared",
                         "p_q": [0.5, 0.5]}}),
    Preset("mds-7-5-gf8", "mds-demo", ("lossless", "mds"),
           "Curve-fitting code, n = 7, k = 5 over GF(8), 10^4 random blocks", {}),
    Preset("dft-64-16", "dft-demo", ("gaussian", "dft"),
           "Band-limited interpolation coder, n = 64, k = 16, 8 bits per coefficient, 10^5 blocks", {}),
    Preset("dft-64-64", "dft-demo", ("gaussian", "dft"),
           "Unitary case k = n of the interpolation coder", {"k": 64, "trials": 2000}),
    Preset("two-stage-64-32", "two-stage", ("two-stage", "high-resolution"),
           "Two-stage transform quantizer against the informed baseline at three rate pairs", {}),
    Preset("two-stage-equispaced", "two-stage", ("two-stage", "high-resolution"),
           "Two-stage quantizer with equispaced important positions (well-conditioned interpolation)",
           {"mask_mode": "equispaced", "trials": 2000}),
    Preset("rate-gap-all", "rate-gap", ("rate-gap", "high-resolution"),
           "Penalty for an uninformed encoder for every side-information family, closed form and Monte-Carlo", {}),
    Preset("penalty-two-atom", "penalty-check", ("rate-gap", "high-resolution"),
           "Measured R_NONE - R_BOTH on a 129-point Gaussian with side information in {0.25, 4}", {}),
    Preset("penalty-pathological", "penalty-check", ("rate-gap", "high-resolution"),
           "Measured penalty for the two-atom pathological law with eps = 0.1",
           {"atoms": [0.1, 10.0], "probs": [0.9, 0.1]}),
    Preset("penalty-no-side-info", "penalty-check", ("rate-gap",),
           "Control: equal atoms, no penalty expected", {"atoms": [1.0, 1.0], "tolerance": 0.01}),
]

PRESET_INDEX = {p.name: p for p in PRESETS}


def list_presets(tag: str | None = None) -> list[dict]:
    return [p.catalog_entry() for p in PRESETS if tag is None or tag in p.tags]


def default_preset(experiment: str) -> Preset:
    return next(p for p in PRESETS if p.experiment == experiment)


def _matrix(spec, size: int) -> np.ndarray:
    if isinstance(spec, str):
        builders = {"hamming": hamming, "cyclic_squared": cyclic_squared}
        if spec not in builders:
            raise ModelError(f"unknown distortion {spec!r}; use a matrix or one of {sorted(builders)}")
        return builders[spec](size)
    return np.asarray(spec, dtype=float)


def build_instance(spec: dict) -> DiscreteInstance:
    """Instance from a config fragment ``{"kind": ..., ...}``."""
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ModelError("instance must be an object with a 'kind'")
    kind = spec["kind"]
    args = {k: v for k, v in spec.items() if k != "kind"}
    try:
        if kind == "erasure":
            return erasure_instance(int(args["alphabet"]), float(args["relevant_prob"]))
        if kind == "group":
            return group_instance(cyclic_group(int(args["order"])), args["profile"], args["p_q"])
        if kind == "scaled":
            p_x = np.asarray(args.get("p_x") or uniform(int(args["alphabet"])), dtype=float)
            return scaled_instance(p_x, args["d0"], _matrix(args["d1"], p_x.size), args["p_q"])
        if kind == "explicit":
            return DiscreteInstance.from_dict(args)
    except KeyError as exc:
        raise ModelError(f"instance kind {kind!r} needs key {exc}") from None
    raise ModelError(f"unknown instance kind {kind!r}")
