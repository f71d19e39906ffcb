"""Compare the compiled and pure-Python polygon kernels.

    python3 benchmarks/bench_polyclip.py [--pairs N] [--repeat R]

Times single-pair IoU calls and the batched ``iou_pairs`` entry point on
random footprint-like quads, and checks the backends agree bitwise.
"""

import argparse
import time

import numpy as np

from benthicvpr.polygon import available_backends


def random_quads(rng, n):
    c = rng.uniform(-3, 3, (n, 1, 2))
    base = np.array([[-0.8, -0.6], [0.8, -0.6], [0.8, 0.6], [-0.8, 0.6]])
    t = rng.uniform(0, np.pi, n)
    R = np.stack([np.cos(t), -np.sin(t), np.sin(t), np.cos(t)], axis=1).reshape(n, 2, 2)
    jitter = rng.normal(0, 0.05, (n, 4, 2))
    return np.einsum("nij,kj->nki", R, base) + jitter + c


def best_of(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--pairs", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    a = random_quads(rng, args.pairs)
    b = random_quads(rng, args.pairs)
    idx = np.arange(args.pairs, dtype=np.int64)
    single_n = min(args.pairs, 5000)

    results = {}
    for name, k in available_backends().items():
        t_single, _ = best_of(lambda: [k.iou(a[i], b[i]) for i in range(single_n)], args.repeat)
        t_batch, vals = best_of(lambda: k.iou_pairs(a, b, idx, idx), args.repeat)
        results[name] = vals
        print(
            f"{name:7s} single: {1e6 * t_single / single_n:8.2f} us/pair   "
            f"batched: {1e6 * t_batch / args.pairs:8.2f} us/pair"
        )
    if len(results) == 2:
        same = np.array_equal(results["python"], results["cython"])
        print(f"backends agree bitwise: {same}")
    else:
        print("compiled backend not built; only the pure-Python kernel was timed")


if __name__ == "__main__":
    main()
