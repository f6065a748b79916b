"""Rate-distortion functions of a :class:`DiscreteInstance` for the four
side-information scenarios, by slope-parameterized alternating minimization.

Every solver sweeps the Lagrange slope ``lam`` and minimizes
``rate + lam * distortion``:

* NONE: Blahut-Arimoto on the q-averaged distortion.
* BOTH: one Blahut-Arimoto problem per side value at a common slope.
* ENC: Blahut-Arimoto on the super source (x, q).
* DEC: alternating updates of the encoder channel p(u|x) and the decoder map
  v(u, q), restarted from random channels.

NONE, BOTH and ENC stop on a certified duality gap (upper minus Blahut lower
bound); DEC is non-convex and stops on relative objective change.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, fields

import numpy as np

from .parallel import pmap
from .model import (
    DiscreteInstance,
    ModelError,
    check_group_table,
    cyclic_group,
    entropy,
    make_group_difference_distortion,
)

DEFAULT_POINTS = 32


class Scenario(str, enum.Enum):
    NONE = "NONE"
    DEC = "DEC"
    ENC = "ENC"
    BOTH = "BOTH"


class SolverError(RuntimeError):
    pass


def default_slopes(instance: DiscreteInstance | None = None, points: int = DEFAULT_POINTS) -> tuple:
    """Log-spaced slopes, scaled to the instance's zero-rate distortion."""
    scale = 1.0
    if instance is not None:
        dmax = instance.max_distortion()
        if dmax > 0:
            scale = dmax
    return tuple(float(s) for s in np.geomspace(0.05, 50.0, points) / scale)


@dataclass(frozen=True)
class SolverConfig:
    slopes: tuple = field(default_factory=default_slopes)
    max_iterations: int = 10_000
    rel_tolerance: float = 1e-9
    aux_cardinality: int | None = None
    restarts: int = 8
    seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        s = np.asarray(self.slopes, dtype=float)
        if s.ndim != 1 or s.size == 0 or np.any(s <= 0) or np.any(np.diff(s) <= 0):
            raise ModelError("slope grid must be strictly positive and strictly increasing")
        if not 0 < self.rel_tolerance <= 1e-3:
            raise ModelError("rel_tolerance must lie in (0, 1e-3]")
        if self.max_iterations < 1 or self.restarts < 1 or self.jobs < 1:
            raise ModelError("max_iterations, restarts and jobs must be positive")
        object.__setattr__(self, "slopes", tuple(float(v) for v in s))

    @classmethod
    def for_instance(cls, instance: DiscreteInstance, points: int = DEFAULT_POINTS, **kw) -> "SolverConfig":
        return cls(slopes=default_slopes(instance, points), **kw)


@dataclass
class RdPoint:
    rate: float
    distortion: float
    slope: float
    scenario: Scenario
    iterations: int
    converged: bool
    gap: float = float("nan")

    @property
    def objective(self) -> float:
        return self.rate + self.slope * self.distortion


@dataclass
class ScenarioResult:
    scenario: Scenario
    points: list[RdPoint]
    channels: list[np.ndarray]
    recon_maps: list[np.ndarray] | None = None
    diagnostics: list[dict] = field(default_factory=list)

    @property
    def rates(self) -> np.ndarray:
        return np.array([p.rate for p in self.points])

    @property
    def distortions(self) -> np.ndarray:
        return np.array([p.distortion for p in self.points])

    @property
    def slopes(self) -> np.ndarray:
        return np.array([p.slope for p in self.points])

    @property
    def objectives(self) -> np.ndarray:
        return np.array([p.objective for p in self.points])

    @property
    def converged(self) -> bool:
        return all(p.converged for p in self.points)

    def unconverged(self) -> list[float]:
        return [p.slope for p in self.points if not p.converged]


# ---------------------------------------------------------------------------
# Blahut-Arimoto kernels


def _mi(p: np.ndarray, w: np.ndarray) -> float:
    """I(in; out) for input law p and channel w[in, out]; 0 ln 0 = 0."""
    out = p @ w
    joint = p[:, None] * w
    mask = joint > 1e-300
    ratio = w[mask] / np.broadcast_to(out, w.shape)[mask]
    return max(float(np.sum(joint[mask] * np.log(ratio))), 0.0)


@dataclass
class _BAState:
    channel: np.ndarray
    marginal: np.ndarray
    upper: float
    lower: float
    iterations: int
    converged: bool
    history: list | None = None


def blahut_arimoto(
    p: np.ndarray,
    dist: np.ndarray,
    slope: float,
    max_iterations: int = 10_000,
    tol: float = 1e-9,
    trace: bool = False,
    accelerate: bool = True,
) -> _BAState:
    """Minimize ``I(in; out) + slope * E[dist]`` over channels.

    Each step is the classical output-marginal update ``r <- r * c(r)``. With
    ``accelerate`` every pair of steps is followed by a squared extrapolation
    (SQUAREM), kept only if it does not raise the objective. Stops once the
    Blahut lower bound is within ``tol * max(1, upper)`` of the attained
    objective; ``iterations`` counts marginal updates.
    """
    shift = dist.min(axis=1, keepdims=True)
    kernel = np.exp(-slope * (dist - shift))
    offset = slope * float(p @ shift[:, 0])

    def evaluate(r):
        # with w = kernel * r / z the output law is r * c, and the attained
        # objective reduces to G(r) - sum_y (r c)_y ln c_y
        z = kernel @ r
        c = (p / z) @ kernel
        g = -float(p @ np.log(z)) + offset
        out = r * c
        used = out > 0
        upper = g - float(out[used] @ np.log(c[used]))
        lower = g - float(np.log(c.max()))
        return upper, lower, c

    def step(r, c):
        r = r * c
        return r / r.sum()

    r = np.full(dist.shape[1], 1.0 / dist.shape[1])
    history = [] if trace else None
    upper, lower, c = evaluate(r)
    it = 0
    converged = False
    while True:
        if history is not None:
            history.append(upper)
        if upper - lower <= tol * max(1.0, abs(upper)):
            converged = True
            break
        if it >= max_iterations:
            break
        r1 = step(r, c)
        it += 1
        if not accelerate or it >= max_iterations:
            r = r1
            upper, lower, c = evaluate(r)
            continue
        c1 = evaluate(r1)[2]
        r2 = step(r1, c1)
        it += 1
        cand = evaluate(r2)
        s = r1 - r
        v = r2 - r1 - s
        nv = float(np.linalg.norm(v))
        if nv > 0 and it < max_iterations:
            alpha = min(-float(np.linalg.norm(s)) / nv, -1.0)
            rx = r - 2 * alpha * s + alpha**2 * v
            while np.any(rx <= 0) and alpha < -1.0:
                alpha = min((alpha - 1.0) / 2, -1.0)
                rx = r - 2 * alpha * s + alpha**2 * v
            if np.all(rx > 0):
                r3 = step(rx / rx.sum(), evaluate(rx / rx.sum())[2])
                it += 1
                ext = evaluate(r3)
                if ext[0] <= cand[0]:
                    r2, cand = r3, ext
        r = r2
        upper, lower, c = cand
    z = kernel @ r
    w = kernel * r[None, :] / z[:, None]
    return _BAState(w, p @ w, upper, lower, it, converged, history)


def _support_rate(p: np.ndarray, allowed: np.ndarray, max_iterations: int, tol: float) -> tuple[float, bool]:
    """``min I`` over channels supported on ``allowed``: the slope -> inf limit."""
    kernel = allowed.astype(float)
    r = np.full(kernel.shape[1], 1.0 / kernel.shape[1])
    g = np.inf
    for _ in range(max_iterations):
        z = kernel @ r
        c = (p / z) @ kernel
        g = -float(p @ np.log(z))
        if g - (g - np.log(c.max())) <= tol:
            return max(g, 0.0), True
        r = r * c
        r /= r.sum()
    return max(g, 0.0), False


def _zero_excess(dist: np.ndarray) -> np.ndarray:
    return dist <= dist.min(axis=1, keepdims=True) + 1e-12


# ---------------------------------------------------------------------------
# scenario solvers


_map = pmap


def _none_point(args):
    instance, slope, cfg, trace = args
    st = blahut_arimoto(instance.p_x, instance.averaged_distortion(), slope, cfg.max_iterations, cfg.rel_tolerance, trace)
    dbar = instance.averaged_distortion()
    d = float(np.sum(instance.p_x[:, None] * st.channel * dbar))
    pt = RdPoint(_mi(instance.p_x, st.channel), d, slope, Scenario.NONE, st.iterations, st.converged, st.upper - st.lower)
    return pt, st.channel, {"history": st.history} if trace else {}


def solve_none(instance: DiscreteInstance, config: SolverConfig | None = None, trace: bool = False) -> ScenarioResult:
    """R_NONE: q unavailable at both ends, so only its average matters."""
    cfg = config or SolverConfig.for_instance(instance)
    out = _map(_none_point, [(instance, s, cfg, trace) for s in cfg.slopes], cfg.jobs)
    return ScenarioResult(Scenario.NONE, [o[0] for o in out], [o[1] for o in out], diagnostics=[o[2] for o in out])


def _both_point(args):
    instance, slope, cfg, trace = args
    rate = dist_total = 0.0
    iters, ok, gap = 0, True, 0.0
    channel = np.empty((instance.n_source, instance.n_side, instance.n_recon))
    histories = []
    for q, pq in enumerate(instance.p_q):
        d = instance.dist[:, :, q]
        st = blahut_arimoto(instance.p_x, d, slope, cfg.max_iterations, cfg.rel_tolerance, trace)
        channel[:, q, :] = st.channel
        rate += pq * _mi(instance.p_x, st.channel)
        dist_total += pq * float(np.sum(instance.p_x[:, None] * st.channel * d))
        iters = max(iters, st.iterations)
        ok &= st.converged
        gap += pq * (st.upper - st.lower)
        histories.append(st.history)
    pt = RdPoint(rate, dist_total, slope, Scenario.BOTH, iters, ok, gap)
    return pt, channel, {"history": histories} if trace else {}


def solve_both(instance: DiscreteInstance, config: SolverConfig | None = None, trace: bool = False) -> ScenarioResult:
    """R_BOTH: conditional rate-distortion function, one problem per q."""
    cfg = config or SolverConfig.for_instance(instance)
    out = _map(_both_point, [(instance, s, cfg, trace) for s in cfg.slopes], cfg.jobs)
    return ScenarioResult(Scenario.BOTH, [o[0] for o in out], [o[1] for o in out], diagnostics=[o[2] for o in out])


def super_source(instance: DiscreteInstance) -> tuple[np.ndarray, np.ndarray]:
    """Law and distortion of the composite source (x, q), row index x*|Q| + q."""
    p = np.outer(instance.p_x, instance.p_q).ravel()
    d = instance.dist.transpose(0, 2, 1).reshape(instance.n_source * instance.n_side, instance.n_recon)
    return p, d


def enc_decomposition(instance: DiscreteInstance, channel: np.ndarray) -> dict:
    """I(x; xhat | q) and I(xhat; q) for a channel indexed [x, q, xhat]."""
    cond = sum(pq * _mi(instance.p_x, channel[:, q, :]) for q, pq in enumerate(instance.p_q))
    out_given_q = np.einsum("x,xqy->qy", instance.p_x, channel)
    leak = _mi(instance.p_q, out_given_q)
    return {"I_x_xhat_given_q": float(cond), "I_xhat_q": float(leak)}


def _enc_point(args):
    instance, slope, cfg, trace = args
    p, d = super_source(instance)
    st = blahut_arimoto(p, d, slope, cfg.max_iterations, cfg.rel_tolerance, trace)
    channel = st.channel.reshape(instance.n_source, instance.n_side, instance.n_recon)
    pt = RdPoint(
        _mi(p, st.channel), float(np.sum(p[:, None] * st.channel * d)), slope,
        Scenario.ENC, st.iterations, st.converged, st.upper - st.lower,
    )
    diag = enc_decomposition(instance, channel)
    if trace:
        diag["history"] = st.history
    return pt, channel, diag


def solve_enc(instance: DiscreteInstance, config: SolverConfig | None = None, trace: bool = False) -> ScenarioResult:
    """R_ENC: classical rate-distortion of the super source (x, q)."""
    cfg = config or SolverConfig.for_instance(instance)
    out = _map(_enc_point, [(instance, s, cfg, trace) for s in cfg.slopes], cfg.jobs)
    return ScenarioResult(Scenario.ENC, [o[0] for o in out], [o[1] for o in out], diagnostics=[o[2] for o in out])


def best_reconstruction(instance: DiscreteInstance, channel: np.ndarray) -> np.ndarray:
    """v(u, q) = argmin_xhat E[d(x, xhat, q) | u, q]; ties go to the lowest index.

    ``channel[x, u]`` is the encoder; since q is independent of (x, u) the
    posterior of x given (u, q) is the posterior given u alone.
    """
    weights = instance.p_x[:, None] * channel  # p(x, u), unnormalized posterior
    cost = np.einsum("xu,xyq->uqy", weights, instance.dist)
    return np.argmin(cost, axis=2)


def induced_distortion(instance: DiscreteInstance, recon: np.ndarray) -> np.ndarray:
    """rho(x, u) = sum_q p(q) d(x, v(u, q), q)."""
    q_idx = np.arange(instance.n_side)
    picked = instance.dist[:, recon, q_idx[None, :]]  # [x, u, q]
    return picked @ instance.p_q


def _dec_run(instance, slope, cfg, channel, trace):
    p = instance.p_x
    w = channel
    history = [] if trace else None
    prev = np.inf
    converged = False
    it = 0
    for it in range(1, cfg.max_iterations + 1):
        recon = best_reconstruction(instance, w)
        rho = induced_distortion(instance, recon)
        r = p @ w
        kernel = np.exp(-slope * (rho - rho.min(axis=1, keepdims=True)))
        w = kernel * r[None, :]
        w /= w.sum(axis=1, keepdims=True)
        obj = _mi(p, w) + slope * float(np.sum(p[:, None] * w * rho))
        if history is not None:
            history.append(obj)
        if abs(prev - obj) <= cfg.rel_tolerance * max(1.0, abs(obj)):
            converged = True
            break
        prev = obj
    recon = best_reconstruction(instance, w)
    rho = induced_distortion(instance, recon)
    rate = _mi(p, w)
    dist = float(np.sum(p[:, None] * w * rho))
    return rate, dist, w, recon, it, converged, history


def _dec_starts(instance, slope, index, cfg, n_aux):
    """Random encoder channels, then the NONE optimum with u = xhat."""
    for restart in range(cfg.restarts):
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, index, restart]))
        yield rng.dirichlet(np.ones(n_aux), size=instance.n_source)
    st = blahut_arimoto(instance.p_x, instance.averaged_distortion(), slope, cfg.max_iterations, cfg.rel_tolerance)
    warm = np.zeros((instance.n_source, n_aux))
    warm[:, : instance.n_recon] = st.channel
    yield warm


def _dec_point(args):
    instance, slope, index, cfg, trace = args
    n_aux = cfg.aux_cardinality or instance.n_recon + 1
    best = None
    runs = []
    for restart, init in enumerate(_dec_starts(instance, slope, index, cfg, n_aux)):
        res = _dec_run(instance, slope, cfg, init, trace)
        obj = res[0] + slope * res[1]
        runs.append(obj)
        if best is None or obj < best[0] - 1e-15:
            best = (obj, restart, res)
    _, restart, (rate, dist, w, recon, it, ok, history) = best
    pt = RdPoint(rate, dist, slope, Scenario.DEC, it, ok)
    diag = {"restart": restart, "restart_objectives": runs}
    if trace:
        diag["history"] = history
    return pt, w, recon, diag


def _polish(instance, cfg, out, trace):
    """Re-run any slope from another slope's solution when that solution
    already scores better there; repeat until no slope improves."""
    slopes = [o[0].slope for o in out]
    for _ in range(len(out)):
        changed = False
        for i, lam in enumerate(slopes):
            own = out[i][0].objective
            scores = [o[0].rate + lam * o[0].distortion for o in out]
            j = int(np.argmin(scores))
            if scores[j] >= own - cfg.rel_tolerance * max(1.0, abs(own)):
                continue
            rate, dist, w, recon, it, ok, history = _dec_run(instance, lam, cfg, out[j][1], trace)
            diag = dict(out[i][3], restart=f"slope:{j}")
            if trace:
                diag["history"] = history
            out[i] = (RdPoint(rate, dist, lam, Scenario.DEC, it, ok), w, recon, diag)
            changed = True
        if not changed:
            break
    return out


def solve_dec(instance: DiscreteInstance, config: SolverConfig | None = None, trace: bool = False) -> ScenarioResult:
    """R_DEC: Wyner-Ziv function with the distortion depending on q.

    The I(u; q) term vanishes because u is generated from x alone and x is
    independent of q, so the reported rate is I(x; u).
    """
    cfg = config or SolverConfig.for_instance(instance)
    if cfg.aux_cardinality is not None and cfg.aux_cardinality < instance.n_recon:
        raise ModelError(f"aux_cardinality {cfg.aux_cardinality} < |Xhat| = {instance.n_recon}")
    items = [(instance, s, i, cfg, trace) for i, s in enumerate(cfg.slopes)]
    out = _polish(instance, cfg, _map(_dec_point, items, cfg.jobs), trace)
    return ScenarioResult(
        Scenario.DEC, [o[0] for o in out], [o[1] for o in out],
        recon_maps=[o[2] for o in out], diagnostics=[o[3] for o in out],
    )


SOLVERS = {
    Scenario.NONE: solve_none,
    Scenario.BOTH: solve_both,
    Scenario.ENC: solve_enc,
    Scenario.DEC: solve_dec,
}


def solve(instance: DiscreteInstance, scenario: Scenario | str, config: SolverConfig | None = None, trace: bool = False) -> ScenarioResult:
    return SOLVERS[Scenario(scenario)](instance, config, trace)


def min_distortion_rate(instance: DiscreteInstance, scenario: Scenario | str, max_iterations: int = 100_000, tol: float = 1e-12) -> float:
    """Rate at the smallest achievable distortion (the lossless end point).

    Computed from the support-restricted dual problem, which is the exact
    limit of the slope sweep; DEC is not supported.
    """
    scenario = Scenario(scenario)
    if scenario is Scenario.NONE:
        rate, ok = _support_rate(instance.p_x, _zero_excess(instance.averaged_distortion()), max_iterations, tol)
    elif scenario is Scenario.BOTH:
        rate, ok = 0.0, True
        for q, pq in enumerate(instance.p_q):
            rq, okq = _support_rate(instance.p_x, _zero_excess(instance.dist[:, :, q]), max_iterations, tol)
            rate += pq * rq
            ok &= okq
    elif scenario is Scenario.ENC:
        p, d = super_source(instance)
        rate, ok = _support_rate(p, _zero_excess(d), max_iterations, tol)
    else:
        raise ModelError("min_distortion_rate does not support the DEC scenario")
    if not ok:
        raise SolverError(f"{scenario.value} end point did not converge")
    return rate


def binary_entropy(p: float) -> float:
    return entropy([p, 1.0 - p])


# ---------------------------------------------------------------------------
# curve utilities


def envelope(result: ScenarioResult, d) -> np.ndarray:
    """Supporting-line lower envelope ``max_i (F_i - lam_i D)`` clipped at 0.

    For a converged convex solver this is the tightest convex curve consistent
    with the swept (slope, objective) pairs; two curves whose objectives are
    ordered slope by slope have envelopes ordered at every distortion.
    """
    d = np.atleast_1d(np.asarray(d, dtype=float))
    lines = result.objectives[None, :] - result.slopes[None, :] * d[:, None]
    return np.maximum(lines.max(axis=1), 0.0)


def interpolate(result: ScenarioResult, d) -> np.ndarray:
    """Piecewise-linear interpolation of the swept points in D."""
    order = np.argsort(result.distortions)
    return np.interp(d, result.distortions[order], result.rates[order])


def matched_grid(a: ScenarioResult, b: ScenarioResult) -> np.ndarray:
    lo = max(a.distortions.min(), b.distortions.min())
    hi = min(a.distortions.max(), b.distortions.max())
    grid = np.concatenate([a.distortions, b.distortions])
    return np.unique(grid[(grid >= lo) & (grid <= hi)])


def check_curve(result: ScenarioResult, tol: float = 1e-6) -> dict:
    """Non-increasing in D, and convex: every interior point lies on or below
    the chord of its neighbours, within ``tol`` nats."""
    order = np.argsort(result.distortions, kind="stable")
    d = result.distortions[order]
    r = result.rates[order]
    nonincreasing = bool(np.all(np.diff(r) <= tol))
    convex = True
    for i in range(1, d.size - 1):
        span = d[i + 1] - d[i - 1]
        if span <= 0:
            continue
        chord = r[i - 1] + (r[i + 1] - r[i - 1]) * (d[i] - d[i - 1]) / span
        if r[i] > chord + tol:
            convex = False
            break
    return {"nonincreasing": nonincreasing, "convex": convex}


def curve_rows(result: ScenarioResult) -> list[dict]:
    return [
        {
            "scenario": p.scenario.value,
            "slope": p.slope,
            "rate_nats": p.rate,
            "distortion": p.distortion,
            "iterations": p.iterations,
        }
        for p in result.points
    ]


# ---------------------------------------------------------------------------
# theorem checks


@dataclass
class GapReport:
    check: str
    max_gap: float
    argmax_distortion: float
    max_slope_gap: float
    argmax_slope: float
    tolerance: float
    passed: bool
    converged: bool
    diagnostics: dict = field(default_factory=dict)
    curves: dict = field(default_factory=dict, repr=False, compare=False)  # scenario -> ScenarioResult

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name != "curves"}

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)


def compare_curves(a: ScenarioResult, b: ScenarioResult) -> tuple[float, float, float, float]:
    """Max |R_a - R_b| at matched distortion and at matched slope."""
    grid = matched_grid(a, b)
    if grid.size == 0:
        gaps, where = np.array([np.inf]), np.array([np.nan])
    else:
        gaps, where = np.abs(envelope(a, grid) - envelope(b, grid)), grid
    slope_gaps = np.abs(a.rates - b.rates)
    i, j = int(np.argmax(gaps)), int(np.argmax(slope_gaps))
    return float(gaps[i]), float(where[i]), float(slope_gaps[j]), float(a.slopes[j])


def is_group_difference(instance: DiscreteInstance, table=None) -> bool:
    """True when the source is uniform over a group (cyclic by default) and
    ``dist`` equals ``profile[xhat^-1 * x, q]`` for some profile."""
    n = instance.n_source
    if instance.n_recon != n or not np.allclose(instance.p_x, 1.0 / n, atol=1e-12):
        return False
    try:
        t = check_group_table(cyclic_group(n) if table is None else table)
    except ModelError:
        return False
    if t.shape[0] != n:
        return False
    identity = int(np.flatnonzero([np.array_equal(row, np.arange(n)) for row in t])[0])
    profile = instance.dist[:, identity, :]
    return bool(np.allclose(make_group_difference_distortion(t, profile), instance.dist, atol=1e-12))


def check_theorem1(
    instance: DiscreteInstance,
    config: SolverConfig | None = None,
    tolerance: float = 1e-3,
    leak_tolerance: float = 1e-4,
    table=None,
) -> GapReport:
    """R_ENC = R_BOTH for a uniform group source with difference distortion."""
    if not is_group_difference(instance, table):
        raise ModelError("check_theorem1 needs a uniform source with a group-difference distortion")
    cfg = config or SolverConfig.for_instance(instance)
    enc = solve_enc(instance, cfg)
    both = solve_both(instance, cfg)
    gap, at_d, slope_gap, at_s = compare_curves(enc, both)
    leak = max(dg["I_xhat_q"] for dg in enc.diagnostics)
    converged = enc.converged and both.converged
    return GapReport(
        "theorem1", gap, at_d, slope_gap, at_s, tolerance,
        gap <= tolerance and leak <= leak_tolerance and converged, converged,
        {"max_I_xhat_q": leak, "leak_tolerance": leak_tolerance,
         "unconverged_slopes": enc.unconverged() + both.unconverged()},
        {"ENC": enc, "BOTH": both},
    )


def separable_factors(instance: DiscreteInstance, atol: float = 1e-12) -> tuple[np.ndarray, np.ndarray] | None:
    """Split dist into d0[q] * d1[x, xhat] when possible."""
    flat = instance.dist.reshape(-1, instance.n_side)
    if not np.any(flat):
        return np.zeros(instance.n_side), np.zeros(instance.dist.shape[:2])
    q_ref = int(np.argmax(np.abs(flat).sum(axis=0)))
    d1 = instance.dist[:, :, q_ref]
    pivot = np.unravel_index(np.argmax(d1), d1.shape)
    d0 = instance.dist[pivot[0], pivot[1], :] / d1[pivot]
    if not np.allclose(d1[:, :, None] * d0[None, None, :], instance.dist, atol=atol, rtol=1e-12):
        return None
    return d0, d1


def check_theorem3(instance: DiscreteInstance, config: SolverConfig | None = None, tolerance: float = 1e-3) -> GapReport:
    """R_DEC = R_NONE for a scaled distortion d0(q) d1(x, xhat)."""
    factors = separable_factors(instance)
    if factors is None:
        raise ModelError("check_theorem3 needs a separable distortion d0(q) * d1(x, xhat)")
    d0, _ = factors
    cfg = config or SolverConfig.for_instance(instance)
    dec = solve_dec(instance, cfg)
    none = solve_none(instance, cfg)
    gap, at_d, slope_gap, at_s = compare_curves(dec, none)
    active = d0 > 0
    varying = []
    for slope, w, recon in zip(dec.slopes, dec.channels, dec.recon_maps):
        used = instance.p_x @ w > 1e-9
        sub = recon[np.ix_(used, active)]
        if sub.size and np.any(sub != sub[:, :1]):
            varying.append(float(slope))
    # the warm start reproduces NONE; a restart that beats NONE would refute equality
    advantage = max(
        f_none - min(dg["restart_objectives"])
        for f_none, dg in zip(none.objectives, dec.diagnostics)
    )
    random_gap = max(
        min(dg["restart_objectives"][: cfg.restarts]) - f_none
        for f_none, dg in zip(none.objectives, dec.diagnostics)
    )
    converged = dec.converged and none.converged
    return GapReport(
        "theorem3", gap, at_d, slope_gap, at_s, tolerance,
        gap <= tolerance and advantage <= tolerance and not varying and converged, converged,
        {"recon_constant_in_q": not varying, "slopes_with_q_dependent_recon": varying,
         "max_restart_advantage_over_none": float(advantage),
         "max_random_restart_excess": float(random_gap),
         "unconverged_slopes": dec.unconverged() + none.unconverged()},
        {"DEC": dec, "NONE": none},
    )


ORDERINGS = (("BOTH", "ENC"), ("ENC", "NONE"), ("BOTH", "DEC"), ("DEC", "NONE"))


def check_ordering(results: dict, slack: float = 1e-6) -> dict:
    """Largest violation of R_a <= R_b at matched distortion for each of
    BOTH <= ENC <= NONE and BOTH <= DEC <= NONE (negative or 0 means ok)."""
    res = {Scenario(k): v for k, v in results.items()}
    out = {}
    for a, b in ORDERINGS:
        a, b = Scenario(a), Scenario(b)
        if a not in res or b not in res:
            continue
        grid = matched_grid(res[a], res[b])
        worst = float((envelope(res[a], grid) - envelope(res[b], grid)).max()) if grid.size else 0.0
        out[f"{a.value}<={b.value}"] = worst
    out["passed"] = all(v <= slack for v in out.values())
    return out
