from __future__ import annotations

import os
import subprocess
import sys

import numpy as np
import pytest

from entropix import kernels
from entropix.chain import preset
from entropix.scattering import smatrix

pytestmark = pytest.mark.skipif(not kernels.HAVE_NUMBA, reason="numba not installed")


@pytest.mark.parametrize("kind,p", [(kernels.KIND_ES, 2.0), (kernels.KIND_P, 0.5), (kernels.KIND_P, 3.0), (kernels.KIND_INF, 1.0)])
@pytest.mark.parametrize("alpha", [-0.7, 0.0, 0.4, 1.0, 1.9, 30.0])
def test_logdet_ratio_paths_agree(kind, p, alpha):
    spec = preset("step_J")
    E = np.linspace(-0.999, 0.999, 501)
    s = smatrix(E, spec)
    args = (s, -spec.beta_l * E, -spec.beta_r * E, alpha, p, kind)
    np.testing.assert_allclose(kernels.logdet_ratio_numba(*args), kernels.logdet_ratio_numpy(*args), rtol=1e-12, atol=1e-14)


def test_continued_fraction_paths_agree():
    z = np.linspace(-3, 3, 77) + 0.01j
    rng = np.random.default_rng(0)
    lam = rng.normal(size=300)
    Jsq = rng.uniform(0.2, 2.0, 300)
    m0 = np.full(z.shape, 0.1j)
    np.testing.assert_allclose(
        kernels.continued_fraction_numba(z, lam, Jsq, m0), kernels.continued_fraction_numpy(z, lam, Jsq, m0), rtol=1e-12
    )


def test_pair_weights_paths_agree():
    rng = np.random.default_rng(1)
    U, _ = np.linalg.qr(rng.normal(size=(40, 40)) + 1j * rng.normal(size=(40, 40)))
    w = rng.random(40)
    labels = np.sort(rng.integers(0, 9, 40)).astype(np.int64)
    np.testing.assert_allclose(kernels.pair_weights_numba(U, w, labels, 9), kernels.pair_weights_numpy(U, w, labels, 9), atol=1e-15)


def test_env_flag_selects_numpy_path():
    code = "from entropix import kernels; print(kernels.backend())"
    env = {**os.environ, "ENTROPIX_NUMBA": "0"}
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
    env["ENTROPIX_NUMBA"] = "1"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numba"


def test_functional_results_independent_of_backend():
    code = (
        "from entropix import asymptotics, fock, chain;"
        "s = chain.preset('step_J');"
        "m = fock.fcs_distribution(s, chain.Interval.of_size(5), t=1.0);"
        "print(repr(asymptotics.e_plus(0.4, s)), repr(m.log_mgf(0.3, 1.0).real))"
    )
    outs = []
    for flag in ("0", "1"):
        env = {**os.environ, "ENTROPIX_NUMBA": flag}
        outs.append(subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True).stdout.split())
    np.testing.assert_allclose([float(x) for x in outs[0]], [float(x) for x in outs[1]], rtol=1e-12)
