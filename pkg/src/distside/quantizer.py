"""Uniform scalar quantization of complex samples and seeded Gaussian corpora.

Rates are in bits per complex sample. A rate-R quantizer spends ceil(R/2)
bits on the real part and floor(R/2) on the imaginary part, so block payloads
are exact integer bit counts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_LOADING = 4.0
CHUNK = 1024  # blocks per RNG stream; independent of --jobs


class QuantizerError(ValueError):
    pass


def split_bits(rate: int) -> tuple[int, int]:
    if int(rate) != rate or rate < 0:
        raise QuantizerError(f"rate must be a nonnegative integer number of bits, got {rate!r}")
    rate = int(rate)
    return (rate + 1) // 2, rate // 2


def _levels_1d(x: np.ndarray, bits: int, sigma: float, loading: float) -> np.ndarray:
    if bits == 0:
        return np.zeros(x.shape, dtype=np.int64)
    L = 1 << bits
    step = 2.0 * loading * sigma / L
    return np.clip(np.floor(x / step + L / 2), 0, L - 1).astype(np.int64)


def _values_1d(idx: np.ndarray, bits: int, sigma: float, loading: float) -> np.ndarray:
    if bits == 0:
        return np.zeros(np.shape(idx))
    L = 1 << bits
    step = 2.0 * loading * sigma / L
    return (np.asarray(idx, dtype=float) - L / 2 + 0.5) * step


@dataclass(frozen=True)
class ScalarQuantizer:
    """Mid-rise uniform quantizer with overload point ``loading * sigma``.

    ``sigma`` is the standard deviation per real dimension of the input.
    """

    rate: int
    sigma: float = float(np.sqrt(0.5))
    loading: float = DEFAULT_LOADING

    def __post_init__(self):
        split_bits(self.rate)
        if not self.sigma > 0 or not self.loading > 0:
            raise QuantizerError("sigma and loading must be positive")

    @property
    def bits(self) -> tuple[int, int]:
        return split_bits(self.rate)

    def encode(self, z) -> np.ndarray:
        """Integer codes with a trailing (re, im) axis."""
        z = np.asarray(z, dtype=complex)
        br, bi = self.bits
        return np.stack(
            [_levels_1d(z.real, br, self.sigma, self.loading), _levels_1d(z.imag, bi, self.sigma, self.loading)],
            axis=-1,
        )

    def decode(self, codes) -> np.ndarray:
        codes = np.asarray(codes)
        br, bi = self.bits
        re = _values_1d(codes[..., 0], br, self.sigma, self.loading)
        im = _values_1d(codes[..., 1], bi, self.sigma, self.loading)
        return re + 1j * im

    def __call__(self, z) -> np.ndarray:
        return self.decode(self.encode(z))


class Bypass:
    """Stand-in quantizer that passes values through; for composition tests."""

    rate = 0

    def encode(self, z):
        return np.asarray(z, dtype=complex)

    def decode(self, codes):
        return np.asarray(codes, dtype=complex)

    def __call__(self, z):
        return np.asarray(z, dtype=complex)


def chunk_rng(seed: int, chunk: int, stream: int = 0) -> np.random.Generator:
    """Generator for one chunk of blocks; counter-based so chunks are independent."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(stream), int(chunk)])))


def complex_gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    """Box-Muller draws, variance 1/2 per real dimension (unit total variance)."""
    u1 = 1.0 - rng.random(shape)
    u2 = rng.random(shape)
    r = np.sqrt(-np.log(u1))  # sqrt(-2 ln u) * sqrt(1/2)
    return r * np.cos(2 * np.pi * u2) + 1j * r * np.sin(2 * np.pi * u2)


def random_masks(rng: np.random.Generator, count: int, n: int, k: int) -> np.ndarray:
    """Boolean masks with exactly k ones per row, uniformly chosen."""
    order = np.argsort(rng.random((count, n)), axis=1, kind="stable")[:, :k]
    masks = np.zeros((count, n), dtype=bool)
    np.put_along_axis(masks, order, True, axis=1)
    return masks


def chunks(trials: int, size: int = CHUNK):
    for c, start in enumerate(range(0, trials, size)):
        yield c, start, min(size, trials - start)
