import itertools

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from distside.model import (
    ConditionalChannel,
    DiscreteInstance,
    ModelError,
    cyclic_group,
    cyclic_squared,
    erasure_instance,
    expected_distortion,
    hamming,
    make_group_difference_distortion,
    make_scaled_distortion,
    mutual_information,
    uniform,
)


def _mp_mutual_information(joint):
    mpmath.mp.dps = 40
    rows = [[mpmath.mpf(str(v)) for v in r] for r in joint]
    pa = [sum(r) for r in rows]
    pb = [sum(col) for col in zip(*rows)]
    total = mpmath.mpf(0)
    for i, r in enumerate(rows):
        for j, v in enumerate(r):
            if v > 0:
                total += v * mpmath.log(v / (pa[i] * pb[j]))
    return float(total)


def test_mi_independent_is_zero():
    joint = np.outer([0.3, 0.7], [0.2, 0.5, 0.3])
    assert mutual_information(joint) == pytest.approx(0.0, abs=1e-15)


def test_mi_identity_bit():
    assert mutual_information(np.diag([0.5, 0.5])) == pytest.approx(np.log(2), abs=1e-15)


def test_mi_against_high_precision_sum():
    joint = [[0.4, 0.1], [0.1, 0.4]]
    assert mutual_information(joint) == pytest.approx(_mp_mutual_information(joint), abs=1e-14)


@pytest.mark.parametrize("bad", [[[0.5, -0.1], [0.3, 0.3]], [[0.5, 0.2], [0.2, 0.2]], [0.5, 0.5]])
def test_mi_rejects_bad_joint(bad):
    with pytest.raises(ModelError):
        mutual_information(bad)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 5), st.integers(2, 5), st.integers(0, 2**31))
def test_mi_nonnegative_and_bounded(a, b, seed):
    rng = np.random.default_rng(seed)
    joint = rng.dirichlet(np.ones(a * b)).reshape(a, b)
    mi = mutual_information(joint)
    assert 0 <= mi <= min(np.log(a), np.log(b)) + 1e-12
    assert mi == pytest.approx(_mp_mutual_information(joint.tolist()), abs=1e-12)


def test_distortion_identity_channel_zero():
    inst = DiscreteInstance(uniform(2), [0.5, 0.5], make_scaled_distortion([1, 2], hamming(2)))
    assert expected_distortion(inst, ConditionalChannel(np.eye(2))) == 0.0


def test_distortion_constant_channel_half():
    inst = DiscreteInstance(uniform(2), [1.0], make_scaled_distortion([1.0], hamming(2)))
    ch = ConditionalChannel(np.array([[1.0, 0.0], [1.0, 0.0]]))
    assert expected_distortion(inst, ch) == pytest.approx(0.5)


@pytest.mark.parametrize("mode", ["x", "xq"])
def test_distortion_brute_force(mode):
    rng = np.random.default_rng(3)
    inst = DiscreteInstance(rng.dirichlet(np.ones(3)), rng.dirichlet(np.ones(3)), rng.random((3, 3, 3)))
    shape = (3, 3) if mode == "x" else (3, 3, 3)
    kernel = rng.dirichlet(np.ones(3), size=shape[:-1])
    total = 0.0
    for x, y, q in itertools.product(range(3), repeat=3):
        w = kernel[x, y] if mode == "x" else kernel[x, q, y]
        total += inst.p_x[x] * inst.p_q[q] * w * inst.dist[x, y, q]
    assert expected_distortion(inst, ConditionalChannel(kernel), mode) == pytest.approx(total, rel=1e-13)


def test_distortion_rejects_wrong_conditioning():
    inst = erasure_instance(2, 0.5)
    with pytest.raises(ModelError):
        expected_distortion(inst, ConditionalChannel(np.eye(2)), "xq")


def test_channel_rows_must_sum_to_one():
    with pytest.raises(ModelError):
        ConditionalChannel(np.array([[0.5, 0.4], [0.0, 1.0]]))


def test_scaled_unit_scale_replicates():
    d1 = cyclic_squared(3)
    t = make_scaled_distortion([1.0, 1.0], d1)
    assert np.array_equal(t[:, :, 0], d1) and np.array_equal(t[:, :, 1], d1)


def test_scaled_erasure_measure():
    t = make_scaled_distortion([0.0, 1.0], hamming(2))
    assert np.all(t[:, :, 0] == 0)
    assert np.array_equal(t[:, :, 1], hamming(2))


def test_scaled_entrywise():
    d1 = (np.arange(4)[:, None] - np.arange(4)[None, :]) ** 2.0
    t = make_scaled_distortion([1, 2], d1)
    for x, y, q in itertools.product(range(4), range(4), range(2)):
        assert t[x, y, q] == [1, 2][q] * (x - y) ** 2


def test_group_z2_is_scaled_hamming():
    t = make_group_difference_distortion(cyclic_group(2), [[0, 0], [1, 2]])
    assert np.array_equal(t, make_scaled_distortion([1, 2], hamming(2)))


def test_group_z4_cyclic_squared():
    q = np.array([1.0, 3.0])
    profile = np.array([min(z, 4 - z) ** 2 for z in range(4)], dtype=float)[:, None] * q[None, :]
    t = make_group_difference_distortion(cyclic_group(4), profile)
    for x, y in itertools.product(range(4), repeat=2):
        z = (x - y) % 4
        assert np.array_equal(t[x, y], q * min(z, 4 - z) ** 2)


def test_group_zero_profile():
    assert not np.any(make_group_difference_distortion(cyclic_group(3), np.zeros((3, 2))))


def test_group_rejects_non_group():
    table = np.array([[0, 1], [1, 1]])
    with pytest.raises(ModelError):
        make_group_difference_distortion(table, np.ones((2, 1)))


def test_group_non_abelian_invariance():
    # S_3 as permutations; dist(g x, g xhat) = dist(x, xhat)
    perms = list(itertools.permutations(range(3)))
    idx = {p: i for i, p in enumerate(perms)}
    table = np.array([[idx[tuple(a[b[i]] for i in range(3))] for b in perms] for a in perms])
    profile = np.random.default_rng(0).random((6, 2))
    d = make_group_difference_distortion(table, profile)
    for g in range(6):
        assert np.allclose(d[np.ix_(table[g], table[g])], d)


def test_instance_validation():
    with pytest.raises(ModelError):
        DiscreteInstance([0.5, 0.6], [1.0], np.zeros((2, 2, 1)))
    with pytest.raises(ModelError):
        DiscreteInstance([0.5, 0.5], [1.0], -np.ones((2, 2, 1)))
    with pytest.raises(ModelError):
        DiscreteInstance([0.5, 0.5], [1.0], np.zeros((2, 2, 2)))


def test_instance_round_trip_json():
    inst = erasure_instance(3, 0.25)
    back = DiscreteInstance.loads(inst.dumps())
    assert np.array_equal(back.dist, inst.dist) and np.array_equal(back.p_q, inst.p_q)
