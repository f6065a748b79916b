"""Band-limited DFT interpolation coding and the two-stage transform quantizer.

The DFT is unitary (``norm="ortho"``). A block of n samples with k relevant
positions is described by the k lowest-frequency coefficients whose inverse
DFT matches the block at those positions. The decoder zero-pads and inverts,
and never sees the relevance mask.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .parallel import pmap
from .quantizer import (
    DEFAULT_LOADING,
    Bypass,
    QuantizerError,
    ScalarQuantizer,
    chunk_rng,
    chunks,
    complex_gaussian,
    random_masks,
)

MAX_CONDITION = 1e6
CALIBRATION_BLOCKS = 2048
CALIBRATION_STREAM = 1
MASK_MODES = ("random", "equispaced")


class InterpolationError(ValueError):
    pass


def mask_string(mask) -> str:
    return "".join("1" if b else "0" for b in np.asarray(mask, dtype=bool))


def _as_mask(mask, n: int) -> np.ndarray:
    m = np.asarray(mask)
    if m.shape[-1] != n or not np.all((m == 0) | (m == 1)):
        raise InterpolationError(f"mask must be a length-{n} binary vector")
    return m.astype(bool)


def idft_matrix(n: int) -> np.ndarray:
    t = np.arange(n)
    return np.exp(2j * np.pi * np.outer(t, t) / n) / np.sqrt(n)


def system_matrices(masks: np.ndarray, k: int) -> np.ndarray:
    """A[b] = rows of the unitary inverse DFT at the relevant positions of
    mask b, restricted to the first k frequencies. Shape (B, k, k)."""
    masks = np.atleast_2d(masks)
    n = masks.shape[1]
    if np.any(masks.sum(axis=1) != k):
        raise InterpolationError(f"every mask must have exactly {k} ones")
    pos = np.nonzero(masks)[1].reshape(len(masks), k)
    f = np.arange(k)
    return np.exp(2j * np.pi * pos[:, :, None] * f[None, None, :] / n) / np.sqrt(n)


def condition_numbers(masks: np.ndarray, k: int) -> np.ndarray:
    if k == 0:
        return np.ones(len(np.atleast_2d(masks)))
    return np.linalg.cond(system_matrices(masks, k))


def interpolate_batch(x: np.ndarray, masks: np.ndarray, k: int, max_condition: float = MAX_CONDITION):
    """Solve A X = x_S for each row. Returns (coefficients (B, k), cond (B,))."""
    x = np.atleast_2d(np.asarray(x, dtype=complex))
    masks = np.atleast_2d(masks).astype(bool)
    if k == 0:
        return np.zeros((len(x), 0), dtype=complex), np.ones(len(x))
    A = system_matrices(masks, k)
    cond = np.linalg.cond(A)
    bad = np.flatnonzero(~(cond <= max_condition))
    if bad.size:
        b = int(bad[0])
        raise InterpolationError(
            f"mask {mask_string(masks[b])} gives condition number {cond[b]:.3e} > {max_condition:.0e}"
        )
    rhs = x[masks].reshape(len(x), k)
    return np.linalg.solve(A, rhs[..., None])[..., 0], cond


def bandlimited_interpolate(samples, mask, max_condition: float = MAX_CONDITION) -> np.ndarray:
    """k coefficients whose zero-padded inverse DFT matches ``samples`` where
    ``mask`` is set."""
    samples = np.asarray(samples, dtype=complex)
    if samples.ndim != 1 or samples.size < 1:
        raise InterpolationError("samples must be a non-empty vector")
    m = _as_mask(mask, samples.size)
    coeffs, _ = interpolate_batch(samples[None], m[None], int(m.sum()), max_condition)
    return coeffs[0]


def synthesize(coeffs, n: int) -> np.ndarray:
    """Zero-pad k coefficients to n frequencies and invert (unitary)."""
    coeffs = np.asarray(coeffs, dtype=complex)
    k = coeffs.shape[-1]
    if k > n:
        raise InterpolationError(f"{k} coefficients do not fit in {n} frequencies")
    padded = np.zeros(coeffs.shape[:-1] + (n,), dtype=complex)
    padded[..., :k] = coeffs
    return np.fft.ifft(padded, axis=-1, norm="ortho")


# scheme of the relevance-mask case: quantize the interpolating coefficients


def dft_scheme_encode(samples, mask, quantizer: ScalarQuantizer, max_condition: float = MAX_CONDITION) -> np.ndarray:
    return quantizer.encode(bandlimited_interpolate(samples, mask, max_condition))


def dft_scheme_decode(codes, n: int, quantizer: ScalarQuantizer) -> np.ndarray:
    return synthesize(quantizer.decode(codes), n)


def dft_payload_bits(k: int, rate: int) -> int:
    return k * int(rate)


def draw_masks(rng, count: int, n: int, k: int, mode: str = "random", max_condition: float = MAX_CONDITION):
    """Masks whose interpolation system is acceptable; rejected draws are
    replaced. Returns (masks, rejected_count)."""
    if mode == "equispaced":
        if k == 0 or n % k:
            raise InterpolationError("equispaced masks need k dividing n")
        offs = rng.integers(0, n // k, size=count)
        masks = np.zeros((count, n), dtype=bool)
        for j in range(k):
            masks[np.arange(count), offs + j * (n // k)] = True
        return masks, 0
    if mode != "random":
        raise InterpolationError(f"unknown mask mode {mode!r}; choose from {MASK_MODES}")
    masks = random_masks(rng, count, n, k)
    rejected = 0
    todo = np.flatnonzero(~(condition_numbers(masks, k) <= max_condition))
    while todo.size:
        rejected += todo.size
        masks[todo] = random_masks(rng, todo.size, n, k)
        todo = todo[~(condition_numbers(masks[todo], k) <= max_condition)]
    return masks, rejected


def _rms(z: np.ndarray) -> float:
    """Standard deviation per real dimension of complex values."""
    return float(np.sqrt(np.mean(np.abs(z) ** 2) / 2)) if z.size else float(np.sqrt(0.5))


def calibrate_coefficient_sigma(n: int, k: int, seed: int, mode: str = "random", blocks: int = CALIBRATION_BLOCKS) -> float:
    rng = chunk_rng(seed, 0, CALIBRATION_STREAM)
    x = complex_gaussian(rng, (blocks, n))
    masks, _ = draw_masks(rng, blocks, n, k, mode)
    coeffs, _ = interpolate_batch(x, masks, k)
    return _rms(coeffs)


@dataclass
class DftTrials:
    n: int
    k: int
    rate: int
    sigma: float
    relevant_mse: np.ndarray  # per trial, mean |x - xhat|^2 over relevant positions
    coefficient_mse: np.ndarray  # per trial, mean |X - Xq|^2 over the k coefficients
    error_norm: np.ndarray  # ||error on relevant positions||
    coefficient_error_norm: np.ndarray
    rejected_masks: int
    max_condition: float

    @property
    def contraction_holds(self) -> np.ndarray:
        return self.error_norm <= self.coefficient_error_norm * (1 + 1e-12) + 1e-300

    @property
    def payload_bits(self) -> int:
        return dft_payload_bits(self.k, self.rate)

    def summary(self) -> dict:
        return {
            "n": self.n,
            "k": self.k,
            "rate_bits": self.rate,
            "trials": int(self.relevant_mse.size),
            "coefficient_sigma": self.sigma,
            "relevant_mse": float(self.relevant_mse.mean()),
            "coefficient_mse": float(self.coefficient_mse.mean()),
            "contraction_violations": int((~self.contraction_holds).sum()),
            "rejected_masks": self.rejected_masks,
            "max_condition": self.max_condition,
            "payload_bits": self.payload_bits,
            "payload_bits_ignoring_side_info": self.n * self.rate,
        }


def _dft_chunk(args):
    n, k, quant, seed, c, size, mode = args
    rng = chunk_rng(seed, c)
    x = complex_gaussian(rng, (size, n))
    masks, rejected = draw_masks(rng, size, n, k, mode)
    coeffs, cond = interpolate_batch(x, masks, k)
    cq = quant(coeffs)
    err = (x - synthesize(cq, n))[masks].reshape(size, k)
    cerr = coeffs - cq
    stats = np.stack([
        np.mean(np.abs(err) ** 2, axis=1),
        np.mean(np.abs(cerr) ** 2, axis=1),
        np.linalg.norm(err, axis=1),
        np.linalg.norm(cerr, axis=1),
    ])
    return stats, rejected, float(cond.max())


def run_dft_trials(n: int, k: int, rate: int, trials: int, seed: int, mode: str = "random",
                   loading: float = DEFAULT_LOADING, sigma: float | None = None, jobs: int = 1) -> DftTrials:
    """Monte-Carlo run of the interpolation coder; results depend only on
    ``seed`` (blocks are drawn in fixed chunks), not on ``jobs``."""
    if not 1 <= k <= n:
        raise InterpolationError(f"need 1 <= k <= n, got n={n}, k={k}")
    if trials < 1:
        raise InterpolationError("need at least one trial")
    if sigma is None:
        sigma = calibrate_coefficient_sigma(n, k, seed, mode)
    quant = ScalarQuantizer(rate, sigma, loading)
    parts = pmap(_dft_chunk, [(n, k, quant, seed, c, size, mode) for c, _, size in chunks(trials)], jobs)
    stats = np.concatenate([p[0] for p in parts], axis=1)
    return DftTrials(n, k, rate, sigma, *stats, sum(p[1] for p in parts), max(p[2] for p in parts))


# two-stage quantizer for two-level side information


@dataclass(frozen=True)
class TwoStageConfig:
    """Shared by encoder and decoder; holds no per-block label information."""

    n: int
    k: int
    R0: int
    R1: int
    sigma0: float = float(np.sqrt(0.5))
    sigma_shift: float = float(np.sqrt(0.5))
    loading: float = DEFAULT_LOADING

    def __post_init__(self):
        if not 0 <= self.k <= self.n or self.n < 1:
            raise QuantizerError(f"need 0 <= k <= n, got n={self.n}, k={self.k}")
        if self.R1 < self.R0 or self.R0 < 0:
            raise QuantizerError(f"need R1 >= R0 >= 0, got R0={self.R0}, R1={self.R1}")

    @property
    def base(self) -> ScalarQuantizer:
        return ScalarQuantizer(self.R0, self.sigma0, self.loading)

    @property
    def shift(self) -> ScalarQuantizer:
        return ScalarQuantizer(self.R1 - self.R0, self.sigma_shift, self.loading)

    @property
    def payload_bits(self) -> int:
        return self.n * self.R0 + self.k * (self.R1 - self.R0)


@dataclass
class TwoStagePayload:
    """``base`` holds one rate-R0 code per position (stage 1 at important
    positions, stage 2 elsewhere); ``shift`` holds the k shift codes."""

    base: np.ndarray
    shift: np.ndarray
    meta: dict = dc_field(default_factory=dict)


def two_stage_encode_batch(x, masks, cfg: TwoStageConfig, bypass: tuple = ()):
    """Vectorized encoder over blocks. ``bypass`` may name "stage1", "shift"
    or "stage2" to replace that quantizer by the identity."""
    x = np.atleast_2d(np.asarray(x, dtype=complex))
    masks = np.atleast_2d(masks).astype(bool)
    if x.shape[1] != cfg.n or masks.shape != x.shape:
        raise QuantizerError(f"blocks must have shape (B, {cfg.n}) with matching masks")
    if ("stage1" in bypass) != ("stage2" in bypass):
        raise QuantizerError("stage1 and stage2 must be bypassed together")
    q1 = Bypass() if "stage1" in bypass else cfg.base
    qs = Bypass() if "shift" in bypass else cfg.shift
    q2 = Bypass() if "stage2" in bypass else cfg.base
    c1 = q1.encode(x)
    y1 = np.where(masks, q1.decode(c1), 0)
    e = x - y1
    E, _ = interpolate_batch(e, masks, cfg.k)
    cs = qs.encode(E)
    ehat = synthesize(qs.decode(cs), cfg.n)
    c2 = q2.encode(x - y1 - ehat)
    sel = masks if np.ndim(c1) == masks.ndim else masks[..., None]
    base = np.where(sel, c1, c2)
    return TwoStagePayload(base, cs, {"bypass": tuple(bypass)})


def two_stage_decode_batch(payload: TwoStagePayload, cfg: TwoStageConfig) -> np.ndarray:
    bypass = payload.meta.get("bypass", ())
    if ("stage1" in bypass) != ("stage2" in bypass):
        # the decoder cannot tell stage-1 codes from stage-2 codes
        raise QuantizerError("stage1 and stage2 must be bypassed together")
    q0 = Bypass() if "stage1" in bypass else cfg.base
    qs = Bypass() if "shift" in bypass else cfg.shift
    base = np.asarray(payload.base)
    shift = np.asarray(payload.shift)
    if base.shape[:2] != (shift.shape[0], cfg.n) or shift.shape[1] != cfg.k:
        raise QuantizerError("malformed two-stage payload")
    return q0.decode(base) + synthesize(qs.decode(shift), cfg.n)


def two_stage_encode(samples, mask, cfg: TwoStageConfig, bypass: tuple = ()) -> TwoStagePayload:
    p = two_stage_encode_batch(np.asarray(samples)[None], _as_mask(mask, cfg.n)[None], cfg, bypass)
    return TwoStagePayload(p.base[0], p.shift[0], p.meta)


def two_stage_decode(payload: TwoStagePayload, cfg: TwoStageConfig) -> np.ndarray:
    p = TwoStagePayload(np.asarray(payload.base)[None], np.asarray(payload.shift)[None], payload.meta)
    return two_stage_decode_batch(p, cfg)[0]


def informed_baseline(samples, mask, R0: int, R1: int, sigma: float = float(np.sqrt(0.5)),
                      loading: float = DEFAULT_LOADING) -> dict:
    """Rate-R1 quantization at important positions and rate R0 elsewhere,
    with labels known at both ends."""
    x = np.atleast_2d(np.asarray(samples, dtype=complex))
    m = np.atleast_2d(mask).astype(bool)
    if R1 < R0:
        raise QuantizerError("need R1 >= R0")
    xhat = np.where(m, ScalarQuantizer(R1, sigma, loading)(x), ScalarQuantizer(R0, sigma, loading)(x))
    err = np.abs(x - xhat) ** 2
    k = int(m[0].sum())
    n = x.shape[1]
    return {
        "reconstruction": xhat,
        "dist_important": _masked_mean(err, m),
        "dist_other": _masked_mean(err, ~m),
        "dist_overall": err.mean(axis=1),
        "bits": k * R1 + (n - k) * R0,
    }


def _masked_mean(err: np.ndarray, m: np.ndarray) -> np.ndarray:
    cnt = m.sum(axis=1)
    return np.where(cnt > 0, (err * m).sum(axis=1) / np.maximum(cnt, 1), 0.0)


def calibrate_two_stage(n: int, k: int, R0: int, R1: int, seed: int, mode: str = "random",
                        loading: float = DEFAULT_LOADING, blocks: int = CALIBRATION_BLOCKS) -> TwoStageConfig:
    """Set the base and shift quantizer scales from a calibration corpus."""
    rng = chunk_rng(seed, 0, CALIBRATION_STREAM)
    x = complex_gaussian(rng, (blocks, n))
    masks, _ = draw_masks(rng, blocks, n, k, mode)
    base = ScalarQuantizer(R0, float(np.sqrt(0.5)), loading)
    y1 = np.where(masks, base(x), 0)
    E, _ = interpolate_batch(x - y1, masks, k)
    sigma_shift = _rms(E)
    stage2_in = (x - y1 - synthesize(E, n))[~masks]
    sigma0 = max(float(np.sqrt(0.5)), _rms(stage2_in))
    return TwoStageConfig(n, k, R0, R1, sigma0, sigma_shift, loading)


@dataclass
class TwoStageTrials:
    config: TwoStageConfig
    dist_important: np.ndarray
    dist_other: np.ndarray
    informed_important: np.ndarray
    informed_other: np.ndarray
    rejected_masks: int

    @property
    def deficit_db(self) -> float:
        return float(10 * np.log10(self.dist_important.mean() / self.informed_important.mean()))

    def rows(self):
        c = self.config
        for t in range(self.dist_important.size):
            yield {
                "trial": t,
                "n": c.n,
                "k": c.k,
                "R0": c.R0,
                "R1": c.R1,
                "dist_important": float(self.dist_important[t]),
                "dist_other": float(self.dist_other[t]),
                "bits": c.payload_bits,
            }

    def summary(self) -> dict:
        c = self.config
        return {
            "n": c.n,
            "k": c.k,
            "R0": c.R0,
            "R1": c.R1,
            "trials": int(self.dist_important.size),
            "sigma0": c.sigma0,
            "sigma_shift": c.sigma_shift,
            "dist_important": float(self.dist_important.mean()),
            "dist_other": float(self.dist_other.mean()),
            "informed_important": float(self.informed_important.mean()),
            "informed_other": float(self.informed_other.mean()),
            "deficit_db": self.deficit_db,
            "bits": c.payload_bits,
            "informed_bits": c.k * c.R1 + (c.n - c.k) * c.R0,
            "rejected_masks": self.rejected_masks,
        }


def _two_stage_chunk(args):
    cfg, seed, c, size, mode = args
    rng = chunk_rng(seed, c)
    x = complex_gaussian(rng, (size, cfg.n))
    masks, rejected = draw_masks(rng, size, cfg.n, cfg.k, mode)
    xhat = two_stage_decode_batch(two_stage_encode_batch(x, masks, cfg), cfg)
    err = np.abs(x - xhat) ** 2
    inf = informed_baseline(x, masks, cfg.R0, cfg.R1, loading=cfg.loading)
    stats = np.stack([_masked_mean(err, masks), _masked_mean(err, ~masks), inf["dist_important"], inf["dist_other"]])
    return stats, rejected


def run_two_stage_trials(n: int, k: int, R0: int, R1: int, trials: int, seed: int, mode: str = "random",
                         loading: float = DEFAULT_LOADING, config: TwoStageConfig | None = None,
                         jobs: int = 1) -> TwoStageTrials:
    if trials < 1:
        raise QuantizerError("need at least one trial")
    cfg = config or calibrate_two_stage(n, k, R0, R1, seed, mode, loading)
    parts = pmap(_two_stage_chunk, [(cfg, seed, c, size, mode) for c, _, size in chunks(trials)], jobs)
    stats = np.concatenate([p[0] for p in parts], axis=1)
    return TwoStageTrials(cfg, *stats, sum(p[1] for p in parts))
