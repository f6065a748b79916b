"""Lossless coding of the relevant samples by polynomial curve fitting.

The encoder treats the n source symbols as a Reed-Solomon codeword whose
irrelevant positions are erasures. Erasure decoding is Lagrange interpolation
through the k relevant points; the k coefficients are the payload. The
decoder re-evaluates the polynomial at all n points and never sees the mask.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .gf import GF2m, FieldError, field


class CodingError(ValueError):
    pass


@dataclass(frozen=True)
class MaskedBlock:
    symbols: tuple
    mask: tuple

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(int(s) for s in self.symbols))
        object.__setattr__(self, "mask", tuple(int(b) for b in self.mask))
        if len(self.symbols) != len(self.mask):
            raise CodingError("symbols and mask differ in length")
        if any(b not in (0, 1) for b in self.mask):
            raise CodingError("mask must be binary")

    @property
    def n(self) -> int:
        return len(self.symbols)

    @property
    def k(self) -> int:
        return sum(self.mask)


@dataclass(frozen=True)
class FieldPolynomial:
    coefficients: tuple  # ascending degree

    @property
    def k(self) -> int:
        return len(self.coefficients)


def default_eval_points(gf: GF2m, n: int) -> list[int]:
    """First n nonzero elements in generator-power order (0 appended when n = 2^m)."""
    if n <= gf.order - 1:
        return list(gf.generator_powers(n))
    if n == gf.order:
        return list(gf.generator_powers(n - 1)) + [0]
    raise CodingError(f"n = {n} exceeds the field size {gf.order}")


def _validate(gf: GF2m, block: MaskedBlock | None, points: list[int], n: int, k: int | None = None):
    if len(points) != n:
        raise CodingError(f"need {n} evaluation points, got {len(points)}")
    if len(set(points)) != len(points):
        raise CodingError("evaluation points must be distinct")
    for p in points:
        gf.check(p)
    if block is not None:
        for s in block.symbols:
            gf.check(s)
        if k is not None and block.k != k:
            raise CodingError(f"mask weight {block.k} != k = {k}")
        if block.k < 1:
            raise CodingError("mask must select at least one symbol")


def interpolate(gf: GF2m, xs: list[int], ys: list[int]) -> list[int]:
    """Coefficients (ascending) of the unique degree < len(xs) polynomial
    through the points, by the Lagrange basis."""
    k = len(xs)
    master = [1]
    for a in xs:  # master(x) = prod (x - a)
        shifted = [0] + master
        master = gf.poly_add(shifted, gf.poly_scale(master, a))
    coeffs = [0] * k
    for j, (a, y) in enumerate(zip(xs, ys)):
        # master / (x - a) by synthetic division, highest degree first
        quot = [0] * k
        carry = 0
        for i in range(k, 0, -1):
            carry = master[i] ^ gf.mul(a, carry) if i < k else master[k]
            quot[i - 1] = carry
        denom = gf.poly_eval(quot, a)
        scale = gf.div(y, denom)
        for i in range(k):
            coeffs[i] ^= gf.mul(quot[i], scale)
    return coeffs


def encode(block: MaskedBlock, eval_points: list[int] | None = None, m: int = 3, k: int | None = None) -> FieldPolynomial:
    gf = field(m)
    points = default_eval_points(gf, block.n) if eval_points is None else list(eval_points)
    _validate(gf, block, points, block.n, k)
    idx = [i for i, b in enumerate(block.mask) if b]
    return FieldPolynomial(tuple(interpolate(gf, [points[i] for i in idx], [block.symbols[i] for i in idx])))


def reconstruct(poly: FieldPolynomial, n: int, eval_points: list[int] | None = None, m: int = 3) -> list[int]:
    gf = field(m)
    points = default_eval_points(gf, n) if eval_points is None else list(eval_points)
    _validate(gf, None, points, n)
    if poly.k > n:
        raise CodingError("polynomial has more coefficients than evaluation points")
    coeffs = [gf.check(c) for c in poly.coefficients]
    return [gf.poly_eval(coeffs, x) for x in points]


def binary_entropy_bits(p: float) -> float:
    if p <= 0 or p >= 1:
        return 0.0
    return -(p * math.log2(p) + (1 - p) * math.log2(1 - p))


def rate_report(n: int, k: int, m: int) -> dict:
    """Bits per block for the three strategies: ignore the mask, send the mask
    then the relevant symbols, and the curve-fitting scheme."""
    if not (0 <= k <= n) or n < 1 or m < 1:
        raise CodingError(f"invalid parameters n={n}, k={k}, m={m}")
    ignore = n * m
    tell = n * binary_entropy_bits(k / n) + k * m
    scheme = k * m
    return {
        "n": n,
        "k": k,
        "m": m,
        "ignore_bits": float(ignore),
        "tell_decoder_bits": tell,
        "scheme_bits": float(scheme),
        "compression_ratio": k / n,
        "ordering_ok": scheme <= ignore <= tell + 1e-12 or scheme <= tell <= ignore + 1e-12,
    }


# serialization


def pack_payload(poly: FieldPolynomial, m: int) -> str:
    """m-bit symbols, ascending degree, MSB first, zero padded to whole bytes."""
    bits = "".join(format(c, f"0{m}b") for c in poly.coefficients)
    if not bits:
        return ""
    bits += "0" * (-len(bits) % 8)
    return bytes(int(bits[i : i + 8], 2) for i in range(0, len(bits), 8)).hex()


def unpack_payload(payload: str, k: int, m: int) -> FieldPolynomial:
    raw = bytes.fromhex(payload)
    bits = "".join(format(b, "08b") for b in raw)
    if len(bits) < k * m or len(raw) != math.ceil(k * m / 8):
        raise CodingError(f"payload of {len(raw)} bytes cannot hold {k} symbols of {m} bits")
    return FieldPolynomial(tuple(int(bits[i * m : (i + 1) * m], 2) for i in range(k)))


def _digits(m: int) -> int:
    return math.ceil(m / 4)


def block_to_hex(symbols, m: int) -> str:
    return "".join(format(s, f"0{_digits(m)}x") for s in symbols)


def block_from_hex(text: str, m: int) -> list[int]:
    w = _digits(m)
    if len(text) % w:
        raise CodingError(f"hex block length {len(text)} is not a multiple of {w}")
    gf = field(m)
    try:
        return [gf.check(int(text[i : i + w], 16)) for i in range(0, len(text), w)]
    except (ValueError, FieldError) as exc:
        raise CodingError(str(exc)) from None


def mask_from_bits(text: str) -> list[int]:
    if any(ch not in "01" for ch in text):
        raise CodingError(f"mask {text!r} must be a bitstring")
    return [int(ch) for ch in text]


def code_hex_block(block_hex: str, mask_bits: str, m: int) -> str:
    """Encode one hex block under a mask and verify the round trip.

    Returns the golden-file line ``block,mask,payload,ok``.
    """
    symbols = block_from_hex(block_hex, m)
    mask = mask_from_bits(mask_bits)
    block = MaskedBlock(symbols, mask)
    poly = encode(block, None, m)
    payload = pack_payload(poly, m)
    xhat = reconstruct(unpack_payload(payload, block.k, m), block.n, None, m)
    ok = all(x == y for x, y, s in zip(symbols, xhat, mask) if s)
    return f"{block_hex.lower()},{mask_bits},{payload},{int(ok)}"


def run_trials(n: int, k: int, m: int, trials: int, seed: int) -> tuple[list[str], dict]:
    """Round-trip random blocks with random weight-k masks.

    Returns golden-file lines ``block,mask,payload,ok`` and a summary.
    """
    if not 1 <= k <= n:
        raise CodingError(f"need 1 <= k <= n, got n={n}, k={k}")
    if trials < 1:
        raise CodingError("need at least one trial")
    gf = field(m)
    points = default_eval_points(gf, n)
    rng = np.random.default_rng(seed)
    lines = []
    mismatches = 0
    for _ in range(trials):
        symbols = rng.integers(0, gf.order, size=n).tolist()
        mask = [0] * n
        for i in rng.choice(n, size=k, replace=False):
            mask[int(i)] = 1
        block = MaskedBlock(symbols, mask)
        poly = encode(block, points, m, k)
        payload = pack_payload(poly, m)
        xhat = reconstruct(unpack_payload(payload, k, m), n, points, m)
        bad = sum(1 for x, y, s in zip(symbols, xhat, mask) if s and x != y)
        mismatches += bad
        lines.append(f"{block_to_hex(symbols, m)},{''.join(map(str, mask))},{payload},{int(bad == 0)}")
    summary = {
        "trials": trials,
        "mismatches": mismatches,
        "payload_bits_per_block": k * m,
        "payload_bytes_per_block": math.ceil(k * m / 8),
        **{key: v for key, v in rate_report(n, k, m).items() if key not in ("n", "k", "m")},
    }
    return lines, summary
