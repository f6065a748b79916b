import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from distside.model import (
    DiscreteInstance,
    ModelError,
    cyclic_group,
    erasure_instance,
    group_instance,
    hamming,
    scaled_instance,
    uniform,
)
from distside.oracle import (
    Scenario,
    SolverConfig,
    binary_entropy,
    blahut_arimoto,
    check_curve,
    check_ordering,
    check_theorem1,
    check_theorem3,
    envelope,
    min_distortion_rate,
    solve,
    solve_both,
    solve_dec,
    solve_enc,
    solve_none,
)


def _hamming_rd(D, M):
    """M-ary Hamming rate-distortion function of a uniform source (nats)."""
    if D >= (M - 1) / M:
        return 0.0
    return math.log(M) - binary_entropy(D) - D * math.log(M - 1)


def test_binary_hamming_point():
    slope = math.log(9)  # D = 1 / (1 + e^slope) = 0.1
    inst = scaled_instance(uniform(2), [1.0], hamming(2), [1.0])
    pt = solve_none(inst, SolverConfig(slopes=(slope,))).points[0]
    assert pt.distortion == pytest.approx(0.1, abs=1e-9)
    assert pt.rate == pytest.approx(math.log(2) - binary_entropy(0.1), abs=1e-9)
    assert pt.rate == pytest.approx(0.3680, abs=1e-4)


def test_small_slope_reaches_zero_rate():
    inst = scaled_instance([0.3, 0.7], [1.0, 2.0], hamming(2), [0.5, 0.5])
    pt = solve_none(inst, SolverConfig(slopes=(1e-3,))).points[0]
    assert pt.rate == pytest.approx(0.0, abs=1e-6)
    assert pt.distortion == pytest.approx(inst.max_distortion(), abs=1e-3)


def test_scaled_hamming_4ary_rescales_axis():
    inst = scaled_instance(uniform(4), [1.0, 2.0], hamming(4), [0.5, 0.5])
    res = solve_none(inst, SolverConfig.for_instance(inst, 16))
    for pt in res.points:
        assert pt.rate == pytest.approx(_hamming_rd(pt.distortion / 1.5, 4), abs=1e-7)


def test_constant_side_info_collapses_scenarios():
    inst = scaled_instance([0.2, 0.5, 0.3], [1.5, 1.5], hamming(3), [0.4, 0.6])
    cfg = SolverConfig.for_instance(inst, 8)
    none = solve_none(inst, cfg)
    for scen in ("BOTH", "ENC", "DEC"):
        other = solve(inst, scen, cfg)
        assert np.allclose(other.rates, none.rates, atol=1e-9)
        assert np.allclose(other.distortions, none.distortions, atol=1e-9)


@pytest.mark.parametrize("alphabet,relevant", [(2, 0.5), (4, 0.25), (8, 5 / 7)])
def test_erasure_lossless_rate(alphabet, relevant):
    inst = erasure_instance(alphabet, relevant)
    target = relevant * math.log(alphabet)
    assert min_distortion_rate(inst, "BOTH") == pytest.approx(target, abs=1e-9)
    assert min_distortion_rate(inst, "ENC") == pytest.approx(target, abs=1e-9)
    assert min_distortion_rate(inst, "NONE") == pytest.approx(math.log(alphabet), abs=1e-9)


def test_both_matches_allocation_split():
    inst = scaled_instance(uniform(2), [1.0, 2.0], hamming(2), [0.5, 0.5])
    res = solve_both(inst, SolverConfig.for_instance(inst, 12))

    def r1(e):  # binary Hamming rate at error rate e
        return math.log(2) - binary_entropy(e) if e < 0.5 else 0.0

    for pt in res.points:
        D = pt.distortion
        # split D = (e_a + 2 e_b) / 2 between the two side values, e_a = error rate under q = 1
        lo, hi = max(0.0, 2 * D - 1.0), min(2 * D, 0.5)
        best = minimize_scalar(lambda e_a: 0.5 * (r1(e_a) + r1((2 * D - e_a) / 2)), bounds=(lo, hi),
                               method="bounded", options={"xatol": 1e-13})
        grid = np.linspace(lo, hi, 2001)
        floor = min(best.fun, min(0.5 * (r1(e) + r1((2 * D - e) / 2)) for e in grid))
        assert pt.rate == pytest.approx(floor, abs=1e-7)


def test_enc_equals_both_on_z4():
    inst = group_instance(cyclic_group(4), [[0, 0], [1, 2], [4, 8], [1, 2]], [0.5, 0.5])
    rep = check_theorem1(inst, SolverConfig.for_instance(inst, 16))
    assert rep.passed, rep.as_dict()
    assert rep.max_gap <= 1e-3
    assert rep.diagnostics["max_I_xhat_q"] <= 1e-4


def test_theorem1_constant_side_info():
    inst = group_instance(cyclic_group(2), [[0, 0], [1, 1]], [0.5, 0.5])
    rep = check_theorem1(inst, SolverConfig.for_instance(inst, 8))
    assert rep.max_gap <= 1e-9


def test_theorem1_rejects_non_group():
    inst = scaled_instance([0.3, 0.7], [1, 2], hamming(2), [0.5, 0.5])
    with pytest.raises(ModelError):
        check_theorem1(inst)


def test_theorem3_unit_scale():
    inst = scaled_instance(uniform(2), [1.0, 1.0], hamming(2), [0.5, 0.5])
    rep = check_theorem3(inst, SolverConfig.for_instance(inst, 8))
    assert rep.max_gap <= 1e-9


def test_theorem3_rejects_non_separable():
    rng = np.random.default_rng(1)
    inst = DiscreteInstance(uniform(2), [0.5, 0.5], rng.random((2, 2, 2)))
    with pytest.raises(ModelError):
        check_theorem3(inst)


@pytest.mark.parametrize("accelerate", [True, False])
def test_ba_objective_monotone(accelerate):
    rng = np.random.default_rng(7)
    p = rng.dirichlet(np.ones(5))
    d = rng.random((5, 4)) * 3
    st_ = blahut_arimoto(p, d, 2.0, 5000, 1e-12, trace=True, accelerate=accelerate)
    h = np.array(st_.history)
    assert np.all(np.diff(h) <= 1e-12)
    assert st_.upper >= st_.lower - 1e-12


def test_ba_acceleration_agrees():
    rng = np.random.default_rng(8)
    p = rng.dirichlet(np.ones(6))
    d = rng.random((6, 6))
    a = blahut_arimoto(p, d, 5.0, 100_000, 1e-11, accelerate=True)
    b = blahut_arimoto(p, d, 5.0, 100_000, 1e-11, accelerate=False)
    assert a.converged and b.converged
    assert a.upper == pytest.approx(b.upper, abs=1e-9)
    assert a.iterations <= b.iterations


def test_solver_config_validation():
    with pytest.raises(ModelError):
        SolverConfig(slopes=(2.0, 1.0))
    with pytest.raises(ModelError):
        SolverConfig(slopes=(1.0,), rel_tolerance=0.1)


def _rand_instance(rng, nx, ny, nq):
    return DiscreteInstance(rng.dirichlet(np.ones(nx)), rng.dirichlet(np.ones(nq)), rng.random((nx, ny, nq)) * 2)


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 2**31), st.integers(2, 3), st.integers(2, 3))
def test_curves_monotone_convex(seed, nx, ny):
    inst = _rand_instance(np.random.default_rng(seed), nx, ny, 2)
    cfg = SolverConfig.for_instance(inst, 10)
    for scen in ("NONE", "BOTH", "ENC"):
        chk = check_curve(solve(inst, scen, cfg))
        assert chk["nonincreasing"] and chk["convex"], (scen, chk)


@settings(max_examples=6, deadline=None)
@given(st.integers(0, 2**31))
def test_ordering_property(seed):
    inst = _rand_instance(np.random.default_rng(seed), 2, 2, 2)
    cfg = SolverConfig.for_instance(inst, 10, restarts=4)
    results = {s: solve(inst, s, cfg) for s in Scenario}
    rep = check_ordering(results)
    assert rep["passed"], rep


# Wyner-Ziv style oracle for binary x, xhat and q with |U| = 3: exhaustive
# decoder maps v(u, q); for each map the best encoder is a classical
# rate-distortion problem in the induced distortion rho_v(x, u), whose value
# is min over output laws r of -sum_x p(x) ln sum_u r(u) exp(-slope rho_v(x, u)),
# a smooth convex function searched on a fine grid of the simplex.

GRID = 600


def _simplex_grid(step):
    a, b = np.meshgrid(np.arange(step + 1), np.arange(step + 1), indexing="ij")
    keep = a + b <= step
    return np.stack([a[keep], b[keep], step - a[keep] - b[keep]], axis=1) / step


def _dec_oracle(inst, slope):
    r = _simplex_grid(GRID)
    best = np.inf
    for v in itertools.product(range(2), repeat=6):
        vm = np.array(v).reshape(3, 2)  # vm[u, q]
        rho = np.array([[sum(inst.p_q[q] * inst.dist[x, vm[u, q], q] for q in range(2)) for u in range(3)]
                        for x in range(2)])
        z = r @ np.exp(-slope * rho).T  # (grid, x)
        best = min(best, float((-np.log(z) @ inst.p_x).min()))
    return best


def _toy_swap():
    # q = 0 rewards copying x, q = 1 rewards flipping it
    d = np.zeros((2, 2, 2))
    for x, y in itertools.product(range(2), repeat=2):
        d[x, y, 0] = float(x != y)
        d[x, y, 1] = float(x == y)
    return DiscreteInstance(uniform(2), [0.5, 0.5], d)


@pytest.mark.parametrize("which", ["random", "toy"])
def test_dec_matches_brute_force(which):
    inst = _toy_swap() if which == "toy" else _rand_instance(np.random.default_rng(11), 2, 2, 2)
    slopes = (0.5, 1.5, 4.0)
    res = solve_dec(inst, SolverConfig(slopes=slopes, aux_cardinality=3, restarts=8))
    for pt in res.points:
        oracle = _dec_oracle(inst, pt.slope)
        assert pt.objective >= oracle - 1e-6
        assert pt.objective == pytest.approx(oracle, abs=2e-3)


def test_dec_beats_none_on_non_separable_toy():
    inst = _toy_swap()
    cfg = SolverConfig(slopes=tuple(np.geomspace(0.5, 20, 8)), restarts=4)
    dec, none = solve_dec(inst, cfg), solve_none(inst, cfg)
    grid = np.linspace(0.05, 0.45, 9)
    gaps = envelope(none, grid) - envelope(dec, grid)
    assert gaps.max() > 1e-3
