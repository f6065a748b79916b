"""Rate penalty for an encoder that does not see the distortion scale.

Under ``d = q (x - xhat)^2`` the high-resolution rates with side information
at both ends and at the decoder only differ by ``(ln E[q] - E[ln q]) / 2``
nats. This module evaluates that gap per family in closed form and by
Monte-Carlo, and measures it on a discretized Gaussian with the rd-oracle.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .model import DiscreteInstance, scaled_instance
from .oracle import SolverConfig, blahut_arimoto, solve_both
from .special import EULER_GAMMA, digamma

DEFAULT_SAMPLES = 1_000_000
MC_CHUNK = 1 << 18
# two-atom check distortions as fractions of E[q] (the zero-rate level); they
# keep the solver away from zero-rate threshold slopes, where it is slow
PENALTY_FRACTIONS = (0.5, 0.25, 0.0625)
# -ln(gamma)/2, a value sometimes quoted for the exponential row; the moment
# expression gives gamma/2 instead
ALT_EXPONENTIAL_GAP = -0.5 * math.log(EULER_GAMMA)


class GapError(ValueError):
    pass


class Family(str, enum.Enum):
    EXPONENTIAL = "exponential"
    UNIFORM = "uniform"
    LOGNORMAL = "lognormal"
    PARETO = "pareto"
    GAMMA = "gamma"
    PATHOLOGICAL = "pathological"
    CAUCHY = "positive-cauchy"


# parameter names and defaults per family
PARAMS = {
    Family.EXPONENTIAL: {"tau": 1.0},
    Family.UNIFORM: {},
    Family.LOGNORMAL: {"M": 0.0, "Q2": 1.0},
    Family.PARETO: {"a": 3.0, "b": 1.0},
    Family.GAMMA: {"a": 4.0, "b": 1.0},
    Family.PATHOLOGICAL: {"eps": 0.01},
    Family.CAUCHY: {},
}


@dataclass(frozen=True)
class SideInfoDistribution:
    """Law of a positive distortion scale q.

    Gamma uses shape ``a`` and rate ``b``; Pareto has density
    ``a b^a / q^(a+1)`` on ``q >= b``; Pathological puts mass ``1 - eps`` at
    ``eps`` and ``eps`` at ``1/eps``.
    """

    family: Family
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        fam = Family(self.family)
        object.__setattr__(self, "family", fam)
        unknown = set(self.params) - set(PARAMS[fam])
        if unknown:
            raise GapError(f"{fam.value} has no parameters {sorted(unknown)}")
        full = {**PARAMS[fam], **{k: float(v) for k, v in self.params.items()}}
        object.__setattr__(self, "params", full)
        for name, v in full.items():
            if not math.isfinite(v):
                raise GapError(f"{fam.value} parameter {name} must be finite")
        p = full
        if fam is Family.EXPONENTIAL and p["tau"] <= 0:
            raise GapError("exponential needs tau > 0")
        if fam is Family.LOGNORMAL and p["Q2"] <= 0:
            raise GapError("lognormal needs Q2 > 0")
        if fam is Family.PARETO and (p["a"] <= 1 or p["b"] <= 0):
            raise GapError("pareto needs a > 1 and b > 0")
        if fam is Family.GAMMA and (p["a"] <= 0 or p["b"] <= 0):
            raise GapError("gamma needs a > 0 and b > 0")
        if fam is Family.PATHOLOGICAL and not 0 < p["eps"] < 1:
            raise GapError("pathological needs 0 < eps < 1")

    @classmethod
    def of(cls, family: str, **params) -> "SideInfoDistribution":
        return cls(Family(family), params)

    def label(self) -> str:
        return ";".join(f"{k}={v:g}" for k, v in self.params.items())

    def mean(self) -> float:
        f, p = self.family, self.params
        if f is Family.EXPONENTIAL:
            return 1 / p["tau"]
        if f is Family.UNIFORM:
            return 0.5
        if f is Family.LOGNORMAL:
            return math.exp(p["M"] + p["Q2"] / 2)
        if f is Family.PARETO:
            return p["a"] * p["b"] / (p["a"] - 1)
        if f is Family.GAMMA:
            return p["a"] / p["b"]
        if f is Family.PATHOLOGICAL:
            e = p["eps"]
            return 1 + e - e * e
        return math.inf

    def mean_log(self) -> float:
        f, p = self.family, self.params
        if f is Family.EXPONENTIAL:
            return -EULER_GAMMA - math.log(p["tau"])
        if f is Family.UNIFORM:
            return -1.0
        if f is Family.LOGNORMAL:
            return p["M"]
        if f is Family.PARETO:
            return math.log(p["b"]) + 1 / p["a"]
        if f is Family.GAMMA:
            return digamma(p["a"]) - math.log(p["b"])
        if f is Family.PATHOLOGICAL:
            return (1 - 2 * p["eps"]) * math.log(p["eps"])
        return 0.0

    def pdf(self, q):
        """Density on (0, inf); not defined for the two-atom family."""
        q = np.asarray(q, dtype=float)
        f, p = self.family, self.params
        pos = q > 0
        qs = np.where(pos, q, 1.0)
        if f is Family.EXPONENTIAL:
            out = p["tau"] * np.exp(-p["tau"] * qs)
        elif f is Family.UNIFORM:
            out = (qs <= 1).astype(float)
        elif f is Family.LOGNORMAL:
            out = np.exp(-((np.log(qs) - p["M"]) ** 2) / (2 * p["Q2"])) / (qs * math.sqrt(2 * math.pi * p["Q2"]))
        elif f is Family.PARETO:
            out = np.where(qs >= p["b"], p["a"] * p["b"] ** p["a"] / qs ** (p["a"] + 1), 0.0)
        elif f is Family.GAMMA:
            a, b = p["a"], p["b"]
            out = np.exp(a * math.log(b) + (a - 1) * np.log(qs) - b * qs - math.lgamma(a))
        elif f is Family.CAUCHY:
            out = (2 / math.pi) / (1 + qs * qs)
        else:
            raise GapError("the pathological law has no density")
        return np.where(pos, out, 0.0)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        f, p = self.family, self.params
        if f is Family.EXPONENTIAL:
            return rng.exponential(1 / p["tau"], size)
        if f is Family.UNIFORM:
            return 1.0 - rng.random(size)  # (0, 1], keeps ln q finite
        if f is Family.LOGNORMAL:
            return rng.lognormal(p["M"], math.sqrt(p["Q2"]), size)
        if f is Family.PARETO:
            return p["b"] * (1.0 - rng.random(size)) ** (-1 / p["a"])
        if f is Family.GAMMA:
            return rng.gamma(p["a"], 1 / p["b"], size)
        if f is Family.PATHOLOGICAL:
            e = p["eps"]
            return np.where(rng.random(size) < e, 1 / e, e)
        return np.abs(rng.standard_cauchy(size))


def table_rows() -> list[SideInfoDistribution]:
    """One default parameterization per table row."""
    return [SideInfoDistribution(f, {}) for f in Family]


def gap_closed_form(dist: SideInfoDistribution) -> float:
    """``(ln E[q] - E[ln q]) / 2`` in nats; +inf when E[q] diverges."""
    m = dist.mean()
    if not math.isfinite(m):
        return math.inf
    f, p = dist.family, dist.params
    # per-family forms, algebraically equal to the moment expression
    if f is Family.EXPONENTIAL:
        return EULER_GAMMA / 2
    if f is Family.UNIFORM:
        return 0.5 * (1 - math.log(2))
    if f is Family.LOGNORMAL:
        return p["Q2"] / 4
    if f is Family.PARETO:
        a = p["a"]
        return 0.5 * (math.log(a / (a - 1)) - 1 / a)
    if f is Family.GAMMA:
        return 0.5 * (math.log(p["a"]) - digamma(p["a"]))
    if f is Family.PATHOLOGICAL:
        e = p["eps"]
        return 0.5 * math.log(1 + e - e * e) - (1 - 2 * e) / 2 * math.log(e)
    return 0.5 * (math.log(m) - dist.mean_log())


def gap_from_moments(dist: SideInfoDistribution) -> float:
    m = dist.mean()
    return 0.5 * (math.log(m) - dist.mean_log()) if math.isfinite(m) else math.inf


def approximate_gap(dist: SideInfoDistribution) -> dict:
    """Informational approximations: ~1/(2a) is a commonly quoted large-a form
    for Gamma, while the digamma series gives ~1/(4a); Pathological tends to
    ~ln(1/eps)/2 as eps -> 0."""
    f, p = dist.family, dist.params
    if f is Family.GAMMA:
        return {"quoted_1_over_2a": 1 / (2 * p["a"]), "series_1_over_4a": 1 / (4 * p["a"])}
    if f is Family.PATHOLOGICAL:
        return {"half_ln_inv_eps": 0.5 * math.log(1 / p["eps"])}
    if f is Family.EXPONENTIAL:
        return {"alt_neg_half_ln_gamma": ALT_EXPONENTIAL_GAP}
    return {}


@dataclass
class GapResult:
    dist: SideInfoDistribution
    closed_form: float
    monte_carlo: float
    stderr: float
    samples: int
    seed: int
    nonfinite: int = 0
    trend: list = field(default_factory=list)  # (samples, estimate) for divergent laws

    @property
    def z_score(self) -> float:
        if not math.isfinite(self.closed_form) or not self.stderr > 0:
            return math.nan
        return (self.monte_carlo - self.closed_form) / self.stderr

    @property
    def diverges(self) -> bool:
        return not math.isfinite(self.closed_form)

    def row(self) -> dict:
        return {
            "family": self.dist.family.value,
            "params": self.dist.label(),
            "gap_closed_nats": self.closed_form,
            "gap_mc_nats": self.monte_carlo,
            "mc_stderr": self.stderr,
            "samples": self.samples,
            "seed": self.seed,
        }


def family_stream(family: Family) -> int:
    return list(Family).index(Family(family))


def _draw(dist, samples, seed):
    """Samples in fixed-size chunks, each from its own counter-based stream."""
    stream = family_stream(dist.family)
    parts = []
    for c, start in enumerate(range(0, samples, MC_CHUNK)):
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), stream, c])))
        parts.append(dist.sample(rng, min(MC_CHUNK, samples - start)))
    return np.concatenate(parts) if parts else np.empty(0)


def gap_estimate(q: np.ndarray) -> tuple[float, float]:
    """Plug-in estimate of the gap with a delta-method standard error."""
    n = q.size
    lq = np.log(q)
    mq, ml = q.mean(), lq.mean()
    # gradient of (ln m_q - m_l)/2 wrt (m_q, m_l) is (1/(2 m_q), -1/2)
    g = np.array([0.5 / mq, -0.5])
    cov = np.cov(np.vstack([q, lq]), ddof=1)
    return 0.5 * (math.log(mq) - ml), float(math.sqrt(max(g @ cov @ g, 0.0) / n))


def gap_monte_carlo(dist: SideInfoDistribution, samples: int = DEFAULT_SAMPLES, seed: int = 0,
                    replicates: int = 9) -> GapResult:
    if samples < 2:
        raise GapError("need at least two samples")
    closed = gap_closed_form(dist)
    q = _draw(dist, samples, seed)
    finite = np.isfinite(q) & (q > 0)
    bad = int((~finite).sum())
    est, se = gap_estimate(q[finite])
    trend = []
    if not math.isfinite(dist.mean()):
        # running estimate over growing sample counts, median over replicates
        for size in np.unique(np.geomspace(max(100, samples // 1000), samples, 4).astype(int)):
            vals = []
            for r in range(replicates):
                sub = _draw(dist, int(size), seed * 1000 + 1 + r)
                vals.append(gap_estimate(sub[np.isfinite(sub) & (sub > 0)])[0])
            trend.append((int(size), float(np.median(vals))))
        se = math.nan
    return GapResult(dist, closed, est, se, samples, seed, bad, trend)


def divergence_detected(result: GapResult) -> bool:
    vals = [v for _, v in result.trend]
    return len(vals) >= 2 and all(b > a for a, b in zip(vals, vals[1:]))


def high_resolution_rates(source_entropy: float, D: float, dist: SideInfoDistribution) -> tuple[float, float]:
    """``(R_BOTH, R_DEC)`` in nats for ``d = q (x - xhat)^2`` at small D."""
    if not D > 0:
        raise GapError("D must be positive")
    base = source_entropy - 0.5 * math.log(2 * math.pi * math.e * D)
    r_both = base + 0.5 * dist.mean_log()
    m = dist.mean()
    r_dec = base + 0.5 * math.log(m) if math.isfinite(m) else math.inf
    return r_both, r_dec


# measured penalty on a discretized Gaussian


def gaussian_grid(points: int = 129, span: float = 6.0) -> tuple[np.ndarray, np.ndarray]:
    """Cell probabilities of a unit Gaussian quantized to ``points`` levels on
    ``[-span, span]``; outer cells absorb the tails."""
    from math import erf, sqrt

    x = np.linspace(-span, span, points)
    edges = np.concatenate([[-np.inf], (x[1:] + x[:-1]) / 2, [np.inf]])
    cdf = np.array([0.5 * (1 + erf(e / sqrt(2))) if np.isfinite(e) else float(e > 0) for e in edges])
    p = np.diff(cdf)
    return x, p / p.sum()


def penalty_instance(atoms, probs, points: int = 129, span: float = 6.0) -> DiscreteInstance:
    x, p = gaussian_grid(points, span)
    sq = (x[:, None] - x[None, :]) ** 2
    return scaled_instance(p, np.asarray(atoms, dtype=float), sq, np.asarray(probs, dtype=float))


def _none_at(instance, slope, tol):
    st = blahut_arimoto(instance.p_x, instance.averaged_distortion(), slope, 100_000, tol)
    return st.upper - slope * _none_distortion(instance, st), _none_distortion(instance, st)


def _none_distortion(instance, st):
    return float(instance.p_x @ (st.channel * instance.averaged_distortion()).sum(axis=1))


def _both_at(instance, slope, tol):
    res = solve_both(instance, SolverConfig(slopes=(slope,), max_iterations=100_000, rel_tolerance=tol))
    pt = res.points[0]
    return pt.rate, pt.distortion


def rate_at_distortion(instance: DiscreteInstance, scenario: str, D: float, tol: float = 1e-6,
                       rel: float = 1e-6, max_steps: int = 40) -> dict:
    """Rate at distortion D, searching the slope by secant steps on
    ``log D(log slope)``.

    The last point is moved to D along its supporting line, an error of
    second order in the remaining distortion mismatch.
    """
    at = {"none": _none_at, "both": _both_at}[scenario]
    if D >= instance.max_distortion():
        return {"rate": 0.0, "slope": 0.0, "steps": 0}
    if D <= instance.min_distortion():
        raise GapError(f"D = {D} is not above the minimum distortion {instance.min_distortion():.3g}")
    x = math.log(1 / (2 * D))  # exact for a Gaussian, a starting guess otherwise
    lo, hi = -math.inf, math.inf  # log slopes known to give d > D and d < D
    r, d = at(instance, math.exp(x), tol)
    x_prev = f_prev = None
    steps = 1
    while abs(d / D - 1) > rel and steps < max_steps:
        if d > D:
            lo = max(lo, x)
        else:
            hi = min(hi, x)
        f = math.log(d / D) if d > 0 else -math.inf
        if x_prev is None or not math.isfinite(f) or f == f_prev:
            step = f if math.isfinite(f) else -3.0
        else:
            step = -f * (x - x_prev) / (f - f_prev)
        nxt = x + max(-3.0, min(3.0, step))  # log D falls about one-for-one with log slope
        if not lo < nxt < hi:
            nxt = 0.5 * (lo + hi) if math.isfinite(lo) and math.isfinite(hi) else x + (3.0 if d > D else -3.0)
        x_prev, f_prev = x, f
        x = nxt
        r, d = at(instance, math.exp(x), tol)
        steps += 1
    if abs(d / D - 1) > 1e-4:
        raise GapError(f"slope search for D = {D} stalled at D = {d:.6g}")
    slope = math.exp(x)
    return {"rate": float(r + slope * (d - D)), "slope": slope, "steps": steps}


@dataclass
class PenaltyReport:
    atoms: tuple
    probs: tuple
    distortions: list
    rate_none: list
    rate_both: list
    target: float
    tolerance: float
    warnings: list = field(default_factory=list)

    @property
    def gaps(self) -> list:
        return [float(a - b) for a, b in zip(self.rate_none, self.rate_both)]

    @property
    def monotone(self) -> bool:
        # distortions are listed from large to small; gaps must not decrease
        g = self.gaps
        return all(b >= a - 1e-9 for a, b in zip(g, g[1:]))

    @property
    def final_error(self) -> float:
        return float(abs(self.gaps[-1] - self.target))

    @property
    def passed(self) -> bool:
        return self.monotone and self.final_error <= self.tolerance

    def rows(self):
        for D, rn, rb in zip(self.distortions, self.rate_none, self.rate_both):
            yield {"distortion": D, "rate_none": rn, "rate_both": rb, "gap": rn - rb, "target": self.target}

    def summary(self) -> dict:
        return {
            "atoms": list(self.atoms),
            "probs": list(self.probs),
            "target_gap_nats": self.target,
            "measured_gaps": self.gaps,
            "monotone": self.monotone,
            "final_error": self.final_error,
            "tolerance": self.tolerance,
            "passed": bool(self.passed),
            "warnings": self.warnings,
        }


def two_atom_gap(atoms, probs) -> float:
    a = np.asarray(atoms, dtype=float)
    p = np.asarray(probs, dtype=float)
    return 0.5 * (math.log(p @ a) - float(p @ np.log(a)))


def penalty_empirical_check(atoms=(0.25, 4.0), probs=(0.5, 0.5), distortions=None, points: int = 129,
                            span: float = 6.0, tolerance: float = 0.05) -> PenaltyReport:
    """Measure ``R_NONE - R_BOTH`` at decreasing distortions.

    For a continuous Gaussian the full gap appears once D drops below
    ``min(atoms)``; the grid adds an error that grows as D shrinks.
    """
    if len(atoms) != len(probs) or min(atoms) <= 0:
        raise GapError("atoms must be positive and match probs")
    inst = penalty_instance(atoms, probs, points, span)
    if distortions is None:
        distortions = [f * float(np.asarray(atoms) @ np.asarray(probs)) for f in PENALTY_FRACTIONS]
    distortions = sorted((float(d) for d in distortions), reverse=True)
    step = 2 * span / (points - 1)
    warnings = []
    for D in distortions:
        # grid error is second order in step relative to D
        if D < 10 * float(np.asarray(atoms) @ np.asarray(probs)) * step**2 / 12:
            warnings.append(f"D = {D:g} is close to the grid resolution; discretization may dominate")
    rn = [rate_at_distortion(inst, "none", D)["rate"] for D in distortions]
    rb = [rate_at_distortion(inst, "both", D)["rate"] for D in distortions]
    return PenaltyReport(tuple(atoms), tuple(probs), distortions, rn, rb, two_atom_gap(atoms, probs), tolerance, warnings)
