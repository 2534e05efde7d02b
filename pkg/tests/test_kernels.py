import os
import subprocess
import sys

import numpy as np
import pytest

from theftgru import kernels
from theftgru.kernels import reference

needs_compiled = pytest.mark.skipif(kernels.compiled is None, reason="compiled extension not built")


def case(seed, T=7, B=5, N=6):
    rng = np.random.default_rng(seed)
    xu = rng.normal(0, 1, (T, B, 3 * N))
    W = rng.normal(0, 0.5, (N, 3 * N))
    s0 = rng.normal(0, 0.5, (B, N))
    return xu, W, s0, rng


@needs_compiled
@pytest.mark.parametrize("kind", [kernels.SIGMOID, kernels.RELU, kernels.HARD_SIGMOID, kernels.TANH])
def test_compiled_matches_reference(kind):
    xu, W, s0, rng = case(kind)
    fa = reference.gru_forward(xu, W, s0, kind)
    fb = kernels.compiled.gru_forward(xu, W, s0, kind)
    for a, b in zip(fa, fb):
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-13)
    dS = rng.normal(0, 1, fa[0][1:].shape)
    ba = reference.gru_backward(dS, *fa, W)
    bb = kernels.compiled.gru_backward(dS, *fa, W)
    for a, b in zip(ba, bb):
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-13)


@needs_compiled
def test_compiled_handles_single_unit_and_step():
    xu, W, s0, _ = case(3, T=1, B=1, N=1)
    for a, b in zip(reference.gru_forward(xu, W, s0, kernels.SIGMOID),
                    kernels.compiled.gru_forward(xu, W, s0, kernels.SIGMOID)):
        np.testing.assert_allclose(a, b, rtol=1e-13)


def test_pure_python_switch():
    code = "import theftgru.kernels as k; print(k.BACKEND)"
    env = dict(os.environ, THEFTGRU_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_backend_name():
    assert kernels.BACKEND in ("cython", "python")
