import os
import subprocess
import sys

import numpy as np
import pytest

from drcc import kernels


@pytest.fixture
def data(rng):
    xi = np.sort(rng.uniform(0, 50, 40))[::-1].copy()
    xi[5:9] = xi[5]  # ties
    return xi, 0.7


def test_water_and_critical_index_agree(data, rng):
    xi, eps = data
    for _ in range(200):
        a = float(rng.uniform(0.001, 0.999))
        v = float(rng.uniform(-5, 60))
        assert kernels.water_nb(xi, v, a) == pytest.approx(kernels.water_np(xi, v, a), abs=1e-12)
        assert kernels.critical_index_nb(xi, eps, a) == kernels.critical_index_np(xi, eps, a)


def test_var_and_levels_agree(data):
    xi, eps = data
    alphas = np.linspace(0.01, 0.99, 97)
    outs = []
    for fn in (kernels.var_continuous_nb, kernels.var_continuous_np):
        oc, od, oj = np.empty(97), np.empty(97), np.empty(97, dtype=np.int64)
        fn(xi, eps, alphas, oc, od, oj)
        outs.append((oc, od, oj))
    np.testing.assert_allclose(outs[0][0], outs[1][0], atol=1e-10)
    np.testing.assert_allclose(outs[0][1], outs[1][1], atol=1e-10)
    np.testing.assert_array_equal(outs[0][2], outs[1][2])
    a, b = np.empty(xi.size), np.empty(xi.size)
    kernels.alpha_levels_nb(xi, eps, 1e-10, a)
    kernels.alpha_levels_np(xi, eps, 1e-10, b)
    np.testing.assert_allclose(a, b, atol=1e-10)


def test_greedy_and_pivot_agree(rng):
    d = rng.uniform(0, 5, 30)
    order = np.argsort(-rng.uniform(size=30), kind="stable").astype(np.int64)
    a, b = np.empty(30), np.empty(30)
    kernels.greedy_pi_nb(2.0, d, order, a)
    kernels.greedy_pi_np(2.0, d, order, b)
    np.testing.assert_allclose(a, b, atol=1e-12)
    tab = rng.normal(size=(8, 12))
    t1, t2 = tab.copy(), tab.copy()
    kernels.pivot_nb(t1, 2, 3)
    kernels.pivot_np(t2, 2, 3)
    np.testing.assert_allclose(t1, t2, atol=1e-12)


def test_env_flag_selects_numpy():
    code = "from drcc import kernels, _accel; print(_accel.USE_NUMBA, kernels.water is kernels.water_np)"
    env = dict(os.environ, DRCC_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["False", "True"]
