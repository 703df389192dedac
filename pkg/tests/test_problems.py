import numpy as np
import pytest

from adaprelora import sampling
from adaprelora.errors import ContractError
from adaprelora.generator import FactorPair
from adaprelora.oracle import finite_diff_gradient
from adaprelora.problems import ProblemInstance, loss_and_gradient, make_problem, planted_spectrum


def _rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def test_optimum_has_zero_loss(rng):
    p = make_problem("recovery", 6, 5, 2, 10.0, 0)
    U, s, Vt = np.linalg.svd(p.target - p.W0)
    fp = FactorPair(U[:, :2] * s[:2], Vt[:2])
    loss, G = loss_and_gradient(p, fp)
    assert loss <= 1e-24 and np.abs(G).max() <= 1e-12


def test_hand_example():
    p = ProblemInstance("recovery", np.zeros((2, 2)), np.diag([1.0, 0.0]), 1.0, 1, 0, target=np.diag([1.0, 0.0]))
    fp = FactorPair(np.zeros((2, 1)), [[0.3, -0.7]])
    loss, G = loss_and_gradient(p, fp)
    assert loss == 0.5
    np.testing.assert_array_equal(G, -p.target)


def test_kappa_one_flat_spectrum():
    p = make_problem("recovery", 7, 5, 3, 1.0, 4)
    s = np.linalg.svd(p.target - p.W0, compute_uv=False)
    np.testing.assert_allclose(s[:3], 1.0, rtol=1e-12)
    assert s[3] <= 1e-12


@pytest.mark.parametrize("kappa", [1.0, 10.0, 100.0])
def test_planted_spectrum_round_trip(kappa):
    p = make_problem("recovery", 12, 9, 4, kappa, 1)
    s = np.linalg.svd(p.target - p.W0, compute_uv=False)
    np.testing.assert_allclose(s[:4], planted_spectrum(4, kappa), rtol=1e-12)
    assert abs(s[0] / s[3] - kappa) <= 1e-10 * kappa
    assert np.linalg.matrix_rank(p.target - p.W0) == 4


@pytest.mark.parametrize("kind", ["recovery", "sensing"])
def test_deterministic_in_seed(kind):
    a, b = make_problem(kind, 5, 4, 2, 3.0, 77), make_problem(kind, 5, 4, 2, 3.0, 77)
    assert a.W0.tobytes() == b.W0.tobytes()
    assert a.planted.tobytes() == b.planted.tobytes()
    c = make_problem(kind, 5, 4, 2, 3.0, 78)
    assert not np.array_equal(a.W0, c.W0)


def test_sensing_is_consistent():
    p = make_problem("sensing", 5, 4, 2, 3.0, 2)
    assert p.measurements.shape == (5 * 2 * 9, 5, 4)
    U, s, Vt = np.linalg.svd(p.planted)
    loss, G = loss_and_gradient(p, FactorPair(U[:, :2] * s[:2], Vt[:2]))
    assert loss <= 1e-20 and np.abs(G).max() <= 1e-9


@pytest.mark.parametrize("kind", ["recovery", "sensing"])
@pytest.mark.parametrize("seed", range(5))
def test_gradient_matches_finite_differences(kind, seed):
    rng = np.random.default_rng(seed)
    p = make_problem(kind, 5, 4, 2, 10.0, seed)
    fp = sampling.random_factor_pair(rng, 5, 4, 2)
    _, G = loss_and_gradient(p, fp)
    fd_B = finite_diff_gradient(lambda B: loss_and_gradient(p, FactorPair(B, fp.A))[0], fp.B)
    assert _rel(G @ fp.A.T, fd_B) <= 1e-6


def test_params_are_serializable():
    import json

    p = make_problem("sensing", 5, 4, 2, 3.0, 2)
    q = make_problem(**{k: v for k, v in json.loads(json.dumps(p.params())).items()})
    assert q.W0.tobytes() == p.W0.tobytes()


def test_invalid_inputs():
    with pytest.raises(ContractError):
        make_problem("denoising", 4, 4, 1, 1.0, 0)
    with pytest.raises(ContractError):
        make_problem("recovery", 4, 3, 4, 1.0, 0)
    with pytest.raises(ContractError):
        make_problem("recovery", 4, 3, 1, 0.5, 0)
    p = make_problem("recovery", 4, 3, 1, 1.0, 0)
    with pytest.raises(ContractError):
        loss_and_gradient(p, FactorPair(np.ones((3, 1)), np.ones((1, 3))))
