"""Compare the numba and pure-numpy kernel sets on typical workloads.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Also times one dense ``eigh`` at the same dimension, which is what
dominates a full inequality evaluation.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from secondlaw import _kernels
from secondlaw.sampling import haar_unitaries


def best_of(fn, repeat: int) -> float:
    fn()  # warm-up, includes JIT compilation
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def workloads(rng: np.random.Generator):
    d = 24
    w = haar_unitaries(4096, d, rng)
    lam = rng.dirichlet(np.ones(d))
    mu = np.sort(rng.random(d))
    p = rng.dirichlet(np.ones(4096))
    pops = rng.dirichlet(np.ones(256))
    energies = rng.random(256)
    r = w[0] @ np.diag(lam) @ w[0].conj().T
    return {
        "batched_energy (4096 x 24x24)": lambda k: k.batched_energy(w, mu, lam),
        "shannon_entropy (4096)": lambda k: k.shannon_entropy(p, 0.0),
        "gibbs_entropy (4096)": lambda k: k.gibbs_entropy(p, 1.3),
        "passive_gap (256)": lambda k: k.passive_gap(pops, energies),
        "best_pair_swap (24x24)": lambda k: k.best_pair_swap(r, mu, 1e-12),
    }, r


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    loads, r = workloads(rng)
    sets = [_kernels.NUMPY_KERNELS] + ([_kernels.NUMBA_KERNELS] if _kernels.HAS_NUMBA else [])
    print(f"active kernel set: {_kernels.ACTIVE.name}")
    print(f"{'kernel':32s}" + "".join(f"{k.name:>12s}" for k in sets) + ("     speedup" if len(sets) == 2 else ""))
    for name, call in loads.items():
        ts = [best_of(lambda k=k: call(k), args.repeat) for k in sets]
        row = f"{name:32s}" + "".join(f"{t * 1e3:10.3f}ms" for t in ts)
        if len(ts) == 2:
            row += f"{ts[0] / ts[1]:11.1f}x"
        print(row)
    t_eigh = best_of(lambda: np.linalg.eigh(r), args.repeat)
    big = rng.standard_normal((256, 256))
    t_eigh_big = best_of(lambda: np.linalg.eigh(big + big.T), args.repeat)
    print(f"{'eigh (24x24), reference':32s}{t_eigh * 1e3:10.3f}ms")
    print(f"{'eigh (256x256), reference':32s}{t_eigh_big * 1e3:10.3f}ms")


if __name__ == "__main__":
    main()
