import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from adaprelora import sampling
from adaprelora.errors import ContractError, NonFiniteGradientError
from adaprelora.precond import (
    DEFAULT_DECAY,
    DEFAULT_EPS,
    AdafactorState,
    DiagWeights,
    apply_h,
    apply_h_inv,
    build_weights,
    update_stats,
    weighted_inner,
    weighted_norm,
)

seeds = st.integers(0, 2**32 - 1)


def _state(l, r, decay=DEFAULT_DECAY, eps=DEFAULT_EPS, step_count=1):
    return AdafactorState(np.asarray(l, float), np.asarray(r, float), decay, decay, eps, step_count)


def test_defaults():
    assert DEFAULT_DECAY == 0.98
    assert DEFAULT_EPS == 1e-6


def test_update_stats_no_decay(backend):
    s = update_stats(AdafactorState.zeros(2, 2, 0.0, 0.0), np.ones((2, 2)))
    np.testing.assert_array_equal(s.l, [2, 2])
    np.testing.assert_array_equal(s.r, [2, 2])
    assert s.step_count == 1


def test_update_stats_full_retention(backend, rng):
    s0 = _state([1.0, 2.0, 3.0], [4.0, 5.0], decay=1.0)
    s1 = update_stats(s0, rng.standard_normal((3, 2)))
    np.testing.assert_array_equal(s1.l, s0.l)
    np.testing.assert_array_equal(s1.r, s0.r)
    assert s1.step_count == s0.step_count + 1


def test_update_stats_zero_gradient(backend):
    s0 = _state([1.0, 2.0], [3.0, 4.0, 5.0], decay=0.5)
    s1 = update_stats(s0, np.zeros((2, 3)))
    np.testing.assert_allclose(s1.l, 0.5 * s0.l)
    np.testing.assert_allclose(s1.r, 0.5 * s0.r)


def test_update_stats_is_pure(backend, rng):
    s0 = _state([1.0, 2.0], [3.0, 4.0, 5.0], decay=0.5)
    before = (s0.l.copy(), s0.r.copy())
    update_stats(s0, rng.standard_normal((2, 3)))
    np.testing.assert_array_equal(s0.l, before[0])
    np.testing.assert_array_equal(s0.r, before[1])


@pytest.mark.parametrize("bad", [np.nan, np.inf])
def test_update_stats_rejects_nonfinite(bad):
    G = np.ones((2, 2))
    G[0, 1] = bad
    with pytest.raises(NonFiniteGradientError):
        update_stats(AdafactorState.zeros(2, 2), G)


def test_update_stats_shape_mismatch():
    with pytest.raises(ContractError):
        update_stats(AdafactorState.zeros(2, 3), np.ones((3, 2)))


@given(seeds, st.floats(0, 1), st.floats(0, 1))
def test_update_stats_matches_formula(seed, dr, dc):
    rng = np.random.default_rng(seed)
    m, n = rng.integers(1, 9, size=2)
    s0 = AdafactorState(rng.random(m), rng.random(n), dr, dc, 1e-6, 3)
    G = rng.standard_normal((m, n))
    s1 = update_stats(s0, G)
    np.testing.assert_allclose(s1.l, dr * s0.l + (1 - dr) * (G**2).sum(1), rtol=1e-14, atol=1e-15)
    np.testing.assert_allclose(s1.r, dc * s0.r + (1 - dc) * (G**2).sum(0), rtol=1e-14, atol=1e-15)
    assert s1.step_count == 4
    assert (s1.l >= 0).all() and (s1.r >= 0).all()


def test_state_validation():
    with pytest.raises(ContractError):
        _state([-1.0], [1.0])
    with pytest.raises(ContractError):
        _state([1.0], [1.0], decay=1.5)
    with pytest.raises(ContractError):
        _state([1.0], [1.0], eps=0.0)


def test_state_memory_is_m_plus_n():
    assert AdafactorState.zeros(37, 11).n_scalars == 48


def test_build_weights_uniform():
    w = build_weights(_state([2.0, 2.0], [2.0, 2.0]))
    np.testing.assert_array_equal(w.l_half, [1.0, 1.0])


def test_build_weights_eps_floor():
    w = build_weights(_state([1.0, 0.0], [1.0], eps=1e-6))
    np.testing.assert_allclose(w.l_half, [1.0, 1e-3], rtol=1e-15)


def test_build_weights_all_zero():
    w = build_weights(_state([0.0, 0.0, 0.0], [0.0, 0.0], eps=1e-6))
    np.testing.assert_allclose(w.l_half**2, 1e-6, rtol=1e-15)
    np.testing.assert_allclose(w.r_half**2, 1e-6, rtol=1e-15)


@given(
    arrays(np.float64, st.integers(1, 10), elements=st.floats(0, 1e6)),
    arrays(np.float64, st.integers(1, 10), elements=st.floats(0, 1e6)),
    st.floats(1e-12, 1.0),
)
def test_weights_always_positive(l, r, eps):
    w = build_weights(_state(l, r, eps=eps))
    assert (w.l_half > 0).all() and (w.r_half > 0).all()
    np.testing.assert_allclose(w.l_half * w.l_neg_half, 1.0, atol=1e-14)
    np.testing.assert_allclose(w.r_half * w.r_neg_half, 1.0, atol=1e-14)


def test_diag_weights_reject_nonpositive():
    with pytest.raises(ContractError):
        DiagWeights.from_half([1.0, 0.0], [1.0])


def test_apply_h_examples(backend):
    w = DiagWeights.from_half([2.0], [3.0])
    assert apply_h(w, np.array([[1.0]]))[0, 0] == 6.0
    assert apply_h_inv(w, np.array([[6.0]]))[0, 0] == 1.0
    assert weighted_inner(w, np.array([[1.0]]), np.array([[1.0]])) == 6.0


def test_identity_weights_are_noops(backend, rng):
    Y = rng.standard_normal((3, 4))
    Z = rng.standard_normal((3, 4))
    w = DiagWeights.identity(3, 4)
    np.testing.assert_array_equal(apply_h(w, Y), Y)
    np.testing.assert_array_equal(apply_h_inv(w, Y), Y)
    assert weighted_inner(w, Y, Z) == pytest.approx(float(np.vdot(Y, Z)), rel=1e-14)


def test_apply_h_shape_mismatch():
    with pytest.raises(ContractError):
        apply_h(DiagWeights.identity(2, 2), np.ones((2, 3)))
    with pytest.raises(ContractError):
        weighted_inner(DiagWeights.identity(2, 2), np.ones((2, 2)), np.ones((3, 2)))


@given(seeds)
def test_operator_round_trips(seed):
    rng = np.random.default_rng(seed)
    m, n = rng.integers(1, 9, size=2)
    w = sampling.random_weights(rng, m, n)
    K = rng.standard_normal((m, n))
    np.testing.assert_allclose(apply_h(w, apply_h_inv(w, K)), K, rtol=1e-13, atol=0)
    np.testing.assert_allclose(apply_h_inv(w, apply_h(w, K)), K, rtol=1e-14, atol=0)


@given(seeds)
def test_inner_product_axioms(seed):
    rng = np.random.default_rng(seed)
    m, n = rng.integers(1, 9, size=2)
    w = sampling.random_weights(rng, m, n)
    X, Y, Z = (rng.standard_normal((m, n)) for _ in range(3))
    a, b = rng.standard_normal(2)
    scale = 1 + np.linalg.norm(X) * np.linalg.norm(Y) * np.linalg.norm(Z) * 100
    assert abs(weighted_inner(w, Y, Z) - weighted_inner(w, Z, Y)) <= 1e-12 * scale
    lhs = weighted_inner(w, a * X + b * Y, Z)
    rhs = a * weighted_inner(w, X, Z) + b * weighted_inner(w, Y, Z)
    assert abs(lhs - rhs) <= 1e-12 * scale * (1 + abs(a) + abs(b))
    assert weighted_inner(w, Y, Y) > 0
    assert weighted_norm(w, np.zeros((m, n))) == 0.0
