"""Time the numba and numpy paths of each hot kernel on realistic inputs.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Prints best-of-N wall time per path, the speedup, and the largest difference
between the two results.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from entropix import kernels
from entropix.chain import preset
from entropix.scattering import smatrix


def _best(fn, repeat: int) -> float:
    fn()  # compile / warm caches
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def _cases():
    rng = np.random.default_rng(7)
    spec = preset("step_J")
    E = np.linspace(-0.99, 0.99, 20_000)
    s = smatrix(E, spec)
    kl, kr = -spec.beta_l * E, -spec.beta_r * E
    for kind, p in ((kernels.KIND_ES, 2.0), (kernels.KIND_P, 1.0), (kernels.KIND_INF, 2.0)):
        yield (
            f"logdet_ratio kind={kind} (20k energies)",
            lambda kind=kind, p=p: kernels.logdet_ratio_numpy(s, kl, kr, 0.3, p, kind),
            lambda kind=kind, p=p: kernels.logdet_ratio_numba(s, kl, kr, 0.3, p, kind),
        )

    z = np.linspace(-1.9, 1.9, 400) + 1e-3j
    depth = 10_000
    lam = np.zeros(depth)
    Jsq = np.ones(depth)
    m0 = np.zeros(z.shape, complex)
    yield (
        "continued_fraction (400 z, depth 1e4)",
        lambda: kernels.continued_fraction_numpy(z, lam, Jsq, m0),
        lambda: kernels.continued_fraction_numba(z, lam, Jsq, m0),
    )

    n = 1024
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    U, _ = np.linalg.qr(A)
    w = rng.random(n)
    labels = np.sort(rng.integers(0, 300, n)).astype(np.int64)
    yield (
        "pair_weights (dim 1024, 300 clusters)",
        lambda: kernels.pair_weights_numpy(U, w, labels, 300),
        lambda: kernels.pair_weights_numba(U, w, labels, 300),
    )


def main(argv=None) -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if not kernels.HAVE_NUMBA:
        print("numba is not installed; only the numpy path exists")
    print(f"{'kernel':44s} {'numpy [ms]':>11s} {'numba [ms]':>11s} {'speedup':>8s} {'max |diff|':>11s}")
    for name, np_fn, nb_fn in _cases():
        diff = float(np.max(np.abs(np.asarray(np_fn()) - np.asarray(nb_fn()))))
        t_np = _best(np_fn, args.repeat)
        t_nb = _best(nb_fn, args.repeat)
        print(f"{name:44s} {1e3 * t_np:11.2f} {1e3 * t_nb:11.2f} {t_np / t_nb:8.1f} {diff:11.2e}")


if __name__ == "__main__":
    main()
