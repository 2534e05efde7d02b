"""Time the compiled and pure-Python GRU kernels on the same workload.

    python3 benchmarks/bench_kernels.py [--T 48] [--batch 350] [--units 64 128] [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from theftgru import kernels
from theftgru.kernels import reference


def workload(T, B, N, seed=0):
    rng = np.random.default_rng(seed)
    xu = rng.normal(0, 1, (T, B, 3 * N))
    W = rng.normal(0, 1 / np.sqrt(N), (N, 3 * N))
    s0 = np.zeros((B, N))
    return xu, W, s0, rng.normal(0, 1, (T, B, N))


def bench(impl, T, B, N, repeat):
    xu, W, s0, dS = workload(T, B, N)
    fwd = impl.gru_forward(xu, W, s0, kernels.SIGMOID)
    t_f = min(timeit.repeat(lambda: impl.gru_forward(xu, W, s0, kernels.SIGMOID), number=1, repeat=repeat))
    t_b = min(timeit.repeat(lambda: impl.gru_backward(dS, *fwd, W), number=1, repeat=repeat))
    return t_f, t_b


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--T", type=int, default=48)
    ap.add_argument("--batch", type=int, default=350)
    ap.add_argument("--units", type=int, nargs="+", default=[16, 64, 128, 428])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    impls = [("python", reference)]
    if kernels.compiled is not None:
        impls.append(("cython", kernels.compiled))
    else:
        print("compiled extension not available; timing the fallback only")
    print(f"T={args.T} batch={args.batch}, best of {args.repeat}, milliseconds")
    print(f"{'N':>5} {'backend':>8} {'forward':>9} {'backward':>9} {'speedup':>8}")
    for N in args.units:
        base = None
        for name, impl in impls:
            t_f, t_b = bench(impl, args.T, args.batch, N, args.repeat)
            total = t_f + t_b
            base = base or total
            print(f"{N:>5} {name:>8} {1e3 * t_f:>9.2f} {1e3 * t_b:>9.2f} {base / total:>7.2f}x")


if __name__ == "__main__":
    main()
