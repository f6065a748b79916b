import itertools
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from distside.gf import PRIMITIVE_POLYS, FieldError, field
from distside.mds import (
    CodingError,
    FieldPolynomial,
    MaskedBlock,
    block_from_hex,
    block_to_hex,
    code_hex_block,
    default_eval_points,
    encode,
    pack_payload,
    rate_report,
    reconstruct,
    run_trials,
    unpack_payload,
)

GOLDEN = Path(__file__).parent / "data" / "reed_solomon_erasure_coding_galois_field_gf_2_m_" / "mds_7_5_gf8_seed0.csv"


def _clmul_mod(a, b, m):
    """Shift-and-add product reduced by the field modulus."""
    mod = PRIMITIVE_POLYS[m]
    acc = 0
    for i in range(m):
        if b >> i & 1:
            acc ^= a << i
    for bit in range(2 * m - 2, m - 1, -1):
        if acc >> bit & 1:
            acc ^= mod << (bit - m)
    return acc


@pytest.mark.parametrize("m", [3, 4])
def test_field_axioms_exhaustive(m):
    gf = field(m)
    els = range(gf.order)
    for a, b in itertools.product(els, repeat=2):
        assert gf.mul(a, b) == _clmul_mod(a, b, m)
        assert gf.mul(a, b) == gf.mul(b, a)
        assert gf.add(a, b) == gf.add(b, a)
        if b:
            assert gf.mul(gf.div(a, b), b) == a
    for a, b, c in itertools.product(els, repeat=3):
        assert gf.mul(gf.mul(a, b), c) == gf.mul(a, gf.mul(b, c))
        assert gf.mul(a, gf.add(b, c)) == gf.add(gf.mul(a, b), gf.mul(a, c))
    for a in els:
        assert gf.mul(a, 1) == a and gf.add(a, 0) == a and gf.add(a, a) == 0
        if a:
            assert gf.mul(a, gf.inv(a)) == 1


def test_gf256_matches_clmul():
    gf = field(8)
    rng = np.random.default_rng(0)
    for a, b in rng.integers(0, 256, size=(2000, 2)):
        assert gf.mul(int(a), int(b)) == _clmul_mod(int(a), int(b), 8)


def test_unsupported_field():
    with pytest.raises(FieldError):
        field(5)
    with pytest.raises(FieldError):
        field(3).check(8)


def test_scheme_7_5():
    rep = rate_report(7, 5, 3)
    assert rep["scheme_bits"] == 15 and rep["ignore_bits"] == 21
    assert rep["tell_decoder_bits"] == pytest.approx(21.04, abs=5e-3)
    assert rep["compression_ratio"] == pytest.approx(5 / 7)


def test_rate_report_edges():
    full = rate_report(6, 6, 3)
    assert full["ignore_bits"] == full["tell_decoder_bits"] == full["scheme_bits"] == 18
    assert rate_report(6, 0, 3)["scheme_bits"] == 0


def test_constant_block_gives_constant_poly():
    poly = encode(MaskedBlock([5] * 7, [1, 0, 1, 1, 0, 1, 1]), m=3)
    assert poly.coefficients == (5, 0, 0, 0, 0)


def test_single_relevant_symbol():
    poly = encode(MaskedBlock([1, 2, 3, 4, 5, 6, 7], [0, 0, 0, 1, 0, 0, 0]), m=3)
    assert poly.coefficients == (4,)


def test_full_mask_reproduces_block():
    rng = np.random.default_rng(2)
    for m, n in [(3, 8), (4, 16), (8, 40)]:
        sym = rng.integers(0, 2**m, n).tolist()
        assert reconstruct(encode(MaskedBlock(sym, [1] * n), m=m), n, m=m) == sym


def test_unmasked_positions_follow_curve():
    gf = field(3)
    sym = [1, 2, 3, 4, 5, 6, 7]
    mask = [1, 1, 0, 1, 0, 1, 1]
    poly = encode(MaskedBlock(sym, mask), m=3)
    xhat = reconstruct(poly, 7, m=3)
    pts = default_eval_points(gf, 7)
    for i in range(7):
        assert xhat[i] == gf.poly_eval(list(poly.coefficients), pts[i])
    assert any(xhat[i] != sym[i] for i in range(7) if not mask[i])


@settings(max_examples=200, deadline=None)
@given(st.sampled_from([3, 4, 8]), st.data())
def test_round_trip_and_mds(m, data):
    n = data.draw(st.integers(1, min(2**m, 24)))
    k = data.draw(st.integers(1, n))
    sym = data.draw(st.lists(st.integers(0, 2**m - 1), min_size=n, max_size=n))
    pos = data.draw(st.permutations(range(n)))[:k]
    mask = [int(i in pos) for i in range(n)]
    poly = encode(MaskedBlock(sym, mask), m=m, k=k)
    payload = pack_payload(poly, m)
    assert len(bytes.fromhex(payload)) == math.ceil(k * m / 8)
    xhat = reconstruct(unpack_payload(payload, k, m), n, m=m)
    assert all(xhat[i] == sym[i] for i in pos)
    # MDS: any k positions of the codeword determine it
    other = data.draw(st.permutations(range(n)))[:k]
    again = encode(MaskedBlock(xhat, [int(i in other) for i in range(n)]), m=m)
    assert again == poly


@settings(max_examples=100, deadline=None)
@given(st.sampled_from([3, 4, 8]), st.data())
def test_evaluation_linear(m, data):
    gf = field(m)
    k = data.draw(st.integers(1, 6))
    coef = st.lists(st.integers(0, 2**m - 1), min_size=k, max_size=k)
    a, b = data.draw(coef), data.draw(coef)
    s = data.draw(st.integers(0, 2**m - 1))
    n = 2**m - 1 if m < 8 else 20
    ra = reconstruct(FieldPolynomial(tuple(a)), n, m=m)
    rb = reconstruct(FieldPolynomial(tuple(b)), n, m=m)
    combo = [gf.mul(s, x) ^ y for x, y in zip(a, b)]
    rc = reconstruct(FieldPolynomial(tuple(combo)), n, m=m)
    assert rc == [gf.mul(s, x) ^ y for x, y in zip(ra, rb)]


def test_validation_errors():
    with pytest.raises(CodingError):
        MaskedBlock([1, 2], [1])
    with pytest.raises(CodingError):
        MaskedBlock([1, 2], [1, 2])
    with pytest.raises(CodingError):
        encode(MaskedBlock([1, 2, 3], [1, 1, 0]), m=3, k=1)
    with pytest.raises(CodingError):
        encode(MaskedBlock([0] * 9, [1] * 9), m=3)
    with pytest.raises(CodingError):
        encode(MaskedBlock([1, 2], [1, 1]), eval_points=[3, 3], m=3)
    with pytest.raises(FieldError):
        encode(MaskedBlock([9, 2], [1, 1]), m=3)
    with pytest.raises(CodingError):
        unpack_payload("ff", 5, 3)
    with pytest.raises(CodingError):
        run_trials(7, 9, 3, 10, 0)


def test_hex_round_trip():
    for m in (3, 4, 8):
        sym = list(range(min(2**m, 20)))
        assert block_from_hex(block_to_hex(sym, m), m) == sym


def test_code_hex_block():
    assert code_hex_block("1234567", "1101011", 3).endswith(",1")


def test_run_trials_no_mismatch():
    lines, summary = run_trials(7, 5, 3, 500, 1)
    assert summary["mismatches"] == 0 and summary["payload_bits_per_block"] == 15
    assert len(lines) == 500 and all(line.endswith(",1") for line in lines)


def test_golden_corpus():
    lines, _ = run_trials(7, 5, 3, 200, 0)
    assert "\n".join(lines) + "\n" == GOLDEN.read_text()
