"""Benchmark the numba kernels against the pure-numpy reference path.

Times the three hot kernels (bilinear logit block, gradient outer
product, AUC pair counting) at reranking-realistic shapes. The numba
functions are warmed once before timing so JIT compilation is excluded.

Run: python3 benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import timeit

import numpy as np

from ltrlab import kernels


def bench(label, fn, args, repeats, inner=100):
    best = min(timeit.repeat(lambda: fn(*args), number=inner, repeat=repeats))
    per_call_us = best / inner * 1e6
    print(f"  {label:<28} {per_call_us:10.2f} us/call")
    return per_call_us


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--dim", type=int, default=64)
    parser.add_argument("--candidates", type=int, default=100)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    if not kernels.USE_NUMBA:
        parser.error("run without LTRLAB_NO_NUMBA set; the benchmark needs both backends")

    rng = np.random.default_rng(args.seed)
    q = rng.normal(size=args.dim)
    V = rng.normal(size=(args.candidates, args.dim))
    W = rng.normal(size=(args.dim, args.dim))
    g = rng.normal(size=args.candidates)
    pos = rng.normal(1.0, 1.0, size=80)
    neg = rng.normal(0.0, 1.0, size=120)

    # warm the JIT caches
    kernels.bilinear_logits(q, V, W, 0.1)
    kernels.grad_outer(q, V, g)
    kernels.auc_pair_count(pos, neg)

    print(f"dim={args.dim} candidates={args.candidates} "
          f"repeats={args.repeats} (best of, 100 calls each)\n")
    pairs = [
        ("bilinear_logits", kernels.bilinear_logits,
         kernels.bilinear_logits_numpy, (q, V, W, 0.1)),
        ("grad_outer", kernels.grad_outer,
         kernels.grad_outer_numpy, (q, V, g)),
        ("auc_pair_count", kernels.auc_pair_count,
         kernels.auc_pair_count_numpy, (pos, neg)),
    ]
    for name, fast, ref, fargs in pairs:
        print(f"{name}:")
        t_nb = bench("numba", fast, fargs, args.repeats)
        t_np = bench("numpy reference", ref, fargs, args.repeats)
        print(f"  speedup {t_np / t_nb:26.2f}x")
        a, b = np.asarray(fast(*fargs)), np.asarray(ref(*fargs))
        assert np.allclose(a, b, atol=1e-10), f"{name}: backends disagree"
        print()


if __name__ == "__main__":
    main()
