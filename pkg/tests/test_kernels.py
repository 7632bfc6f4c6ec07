import subprocess
import sys

import numpy as np
import pytest

from ltrlab import kernels


def random_problem(rng, dim=6, n=5):
    q = rng.normal(size=dim)
    V = rng.normal(size=(n, dim))
    W = rng.normal(size=(dim, dim))
    b = float(rng.normal())
    g = rng.normal(size=n)
    return q, V, W, b, g


def test_bilinear_logits_matches_numpy_reference():
    rng = np.random.default_rng(0)
    for _ in range(20):
        q, V, W, b, _g = random_problem(rng)
        fast = kernels.bilinear_logits(q, V, W, b)
        ref = kernels.bilinear_logits_numpy(q, V, W, b)
        assert np.allclose(fast, ref, atol=1e-12, rtol=1e-12)


def test_grad_outer_matches_numpy_reference():
    rng = np.random.default_rng(1)
    for _ in range(20):
        q, V, _W, _b, g = random_problem(rng)
        fast = kernels.grad_outer(q, V, g)
        ref = kernels.grad_outer_numpy(q, V, g)
        assert fast.shape == (q.size, q.size)
        assert np.allclose(fast, ref, atol=1e-12, rtol=1e-12)


def test_grad_outer_matches_explicit_sum():
    rng = np.random.default_rng(2)
    q, V, _W, _b, g = random_problem(rng, dim=4, n=3)
    expected = sum(g[i] * np.outer(q, V[i]) for i in range(3))
    assert np.allclose(kernels.grad_outer(q, V, g), expected, atol=1e-12)


def test_auc_pair_count_matches_numpy_reference():
    rng = np.random.default_rng(3)
    for _ in range(20):
        pos = np.round(rng.normal(size=int(rng.integers(1, 20))), 1)
        neg = np.round(rng.normal(size=int(rng.integers(1, 20))), 1)
        assert kernels.auc_pair_count(pos, neg) == pytest.approx(
            kernels.auc_pair_count_numpy(pos, neg), abs=1e-15)


def test_bilinear_logits_noncontiguous_input():
    rng = np.random.default_rng(4)
    q, V, W, b, _g = random_problem(rng)
    assert np.allclose(kernels.bilinear_logits(q, V[::1], W.T.T, b),
                       kernels.bilinear_logits_numpy(q, V, W, b), atol=1e-12)


def test_env_flag_selects_numpy_backend():
    code = (
        "import os; os.environ['LTRLAB_NO_NUMBA'] = '1';"
        "from ltrlab import kernels;"
        "assert not kernels.USE_NUMBA;"
        "assert kernels.bilinear_logits is kernels.bilinear_logits_numpy;"
        "assert kernels.grad_outer is kernels.grad_outer_numpy;"
        "assert kernels.auc_pair_count is kernels.auc_pair_count_numpy;"
        "print('numpy backend ok')"
    )
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    assert "numpy backend ok" in out.stdout
