"""Compare the numba-accelerated kernels against the pure-numpy fallback.

Usage: python benchmarks/bench_accel.py [--sizes 500,1000,2000] [--repeat 5]

Reports wall-clock times for Gram construction and batch prediction on both
paths, verifies they agree numerically, and times one end-to-end pricing rep
per path (the fallback rep runs in a subprocess with KRRDP_NUMBA=0).
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), os.pardir, "src"))

from krrdp import accel  # noqa: E402


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        tic = time.perf_counter()
        fn()
        times.append(time.perf_counter() - tic)
    return min(times)


def bench_kernels(sizes, repeat):
    rng = np.random.default_rng(0)
    print(f"{'n':>6} {'op':>8} {'numpy (s)':>10} {'numba (s)':>10} {'speedup':>8}")
    for n in sizes:
        X = rng.normal(size=(n, 5))
        coef = rng.normal(size=n)
        if accel.HAS_NUMBA:  # warm up the JIT before timing
            accel.rbf_gram(X[:10], X[:10], 40.0)
            accel.rbf_predict(X[:10], X[:10], coef[:10], 40.0)
        t_np_gram = best_of(lambda: accel._rbf_gram_numpy(X, X, 40.0), repeat)
        t_np_pred = best_of(lambda: accel._rbf_predict_numpy(X, X, coef, 40.0), repeat)
        if accel.HAS_NUMBA:
            t_nb_gram = best_of(lambda: accel._rbf_gram_numba(X, X, 40.0), repeat)
            t_nb_pred = best_of(lambda: accel._rbf_predict_numba(X, X, coef, 40.0), repeat)
            np.testing.assert_allclose(accel._rbf_gram_numba(X, X, 40.0),
                                       accel._rbf_gram_numpy(X, X, 40.0),
                                       rtol=1e-12, atol=1e-14)
            print(f"{n:>6} {'gram':>8} {t_np_gram:>10.4f} {t_nb_gram:>10.4f}"
                  f" {t_np_gram / t_nb_gram:>7.1f}x")
            print(f"{n:>6} {'predict':>8} {t_np_pred:>10.4f} {t_nb_pred:>10.4f}"
                  f" {t_np_pred / t_nb_pred:>7.1f}x")
        else:
            print(f"{n:>6} {'gram':>8} {t_np_gram:>10.4f} {'-':>10} {'-':>8}")
            print(f"{n:>6} {'predict':>8} {t_np_pred:>10.4f} {'-':>10} {'-':>8}")


END_TO_END = (
    "import time;"
    "from krrdp.config import build_run_config;"
    "from krrdp import bellman;"
    "cfg = build_run_config({'market.d': '5', 'contract.payoff': 'geo_basket_put',"
    " 'contract.strike': '100', 'seed': '7', 'repetitions': '1'});"
    "tic = time.perf_counter();"
    "bellman.backward_pass(cfg);"
    "print(f'{time.perf_counter() - tic:.2f}')"
)


def bench_end_to_end():
    print("\nend-to-end backward pass, d=5 geometric put, one repetition:")
    for label, flag in (("numba", "1"), ("numpy", "0")):
        env = dict(os.environ, KRRDP_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", END_TO_END], env=env,
                             capture_output=True, text=True, check=True)
        print(f"  {label:>6}: {out.stdout.strip()}s")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="500,1000,2000")
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--skip-end-to-end", action="store_true")
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]
    print(f"numba available: {accel.HAS_NUMBA}")
    bench_kernels(sizes, args.repeat)
    if not args.skip_end_to_end:
        bench_end_to_end()


if __name__ == "__main__":
    main()
