import numpy as np
import pytest
from hypothesis import given, strategies as st

from adaprelora import _backend, _kernels_py

compiled = pytest.importorskip("adaprelora._kernels")
seeds = st.integers(0, 2**32 - 1)


def _inputs(seed):
    rng = np.random.default_rng(seed)
    m, n = rng.integers(1, 40, size=2)
    r = int(rng.integers(1, min(m, n, 6) + 1))
    return rng, m, n, r


@given(seeds)
def test_kernels_agree(seed):
    rng, m, n, r = _inputs(seed)
    G = rng.standard_normal((m, n))
    B, A = rng.standard_normal((m, r)), rng.standard_normal((r, n))
    lh, rh = rng.uniform(0.1, 10, m), rng.uniform(0.1, 10, n)
    l, rr = rng.random(m), rng.random(n)

    for a, b in zip(compiled.accumulate_stats(G, l, rr, 0.9, 0.8), _kernels_py.accumulate_stats(G, l, rr, 0.9, 0.8)):
        np.testing.assert_allclose(a, b, rtol=1e-13)
    np.testing.assert_allclose(compiled.scale_outer(G, lh, rh), _kernels_py.scale_outer(G, lh, rh), rtol=1e-14)
    np.testing.assert_allclose(compiled.unscale_outer(G, lh, rh), _kernels_py.unscale_outer(G, lh, rh), rtol=1e-14)
    wi_c, wi_p = compiled.weighted_inner(G, G, lh, rh), _kernels_py.weighted_inner(G, G, lh, rh)
    assert wi_c == pytest.approx(wi_p, rel=1e-12)
    for a, b in zip(compiled.factor_grads(G, B, A), _kernels_py.factor_grads(G, B, A)):
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)
    GB, GA = G @ A.T, B.T @ G
    out_c = compiled.closed_form(B, A, GB, GA, lh, rh, 1e-6)
    out_p = _kernels_py.closed_form(B, A, GB, GA, lh, rh, 1e-6)
    for a, b in zip(out_c[:2], out_p[:2]):
        np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-11 * (1 + np.abs(b).max()))
    for a, b in zip(out_c[2:], out_p[2:]):
        assert a == pytest.approx(b, rel=1e-6)


def test_kernels_accept_noncontiguous_views():
    rng = np.random.default_rng(0)
    G = rng.standard_normal((10, 12))[:, ::2]
    B = rng.standard_normal((4, 10)).T
    A = rng.standard_normal((2, 6))
    for a, b in zip(compiled.factor_grads(G, B[:, :2], A), _kernels_py.factor_grads(G, B[:, :2], A)):
        np.testing.assert_allclose(a, b, rtol=1e-13)


def test_closed_form_rejects_indefinite_gram():
    B = np.zeros((3, 2))
    A = np.zeros((2, 3))
    z = np.zeros((3, 2)), np.zeros((2, 3))
    with pytest.raises(np.linalg.LinAlgError):
        compiled.closed_form(B, A, *z, np.ones(3), np.ones(3), -1.0)


def test_set_backend_round_trip():
    previous = _backend.set_backend("python")
    try:
        assert _backend.backend_name() == "python"
    finally:
        _backend.set_backend(previous)
    assert _backend.backend_name() == previous
    with pytest.raises(ValueError):
        _backend.set_backend("fortran")


def test_default_prefers_compiled():
    assert "cython" in _backend.available_backends()


def test_env_forces_fallback():
    import subprocess
    import sys

    code = "from adaprelora import _backend; print(_backend.backend_name())"
    out = subprocess.run(
        [sys.executable, "-c", code],
        env={**__import__("os").environ, "ADAPRELORA_PURE_PYTHON": "1"},
        capture_output=True,
        text=True,
        check=True,
    )
    assert out.stdout.strip() == "python"
