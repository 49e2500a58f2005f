"""Compare the compiled and pure-Python kernel backends on the default scene sizes.

Usage: python3 benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from vlcsee import _pykernels

try:
    from vlcsee import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def cases(rng):
    K, L, N = 2, 6, 16
    h = rng.uniform(1e-6, 1e-5, (K, L))
    g = rng.uniform(0, 1e-6, (L, N, K))
    q = np.zeros((N, L * K))
    q[np.arange(N), rng.integers(0, L * K, N)] = 1.0
    v = rng.normal(size=(K + 1, L))
    he = rng.uniform(1e-6, 1e-5, L)
    noise = np.full(K, 1e-13)
    delta = rng.normal(size=2048)
    # tiny instance for the exhaustive enumeration: (2*2+1)^5 configurations
    h3 = rng.uniform(1e-6, 1e-5, (2, 2))
    g3 = rng.uniform(0, 1e-6, (2, 5, 2))
    v3 = rng.normal(size=(3, 2))
    return {
        "effective_channel": lambda m: m.effective_channel(h, g, q),
        "project_rows": lambda m: m.project_rows(rng.random((N, L * K))),
        "sinr_terms": lambda m: m.sinr_terms(h, he, v, noise, 1e-13),
        "gae[2048]": lambda m: m.gae(delta, 0.9, np.zeros(2048, dtype=np.uint8)),
        "enumerate_alignments[3125]": lambda m: m.enumerate_alignments(
            h3, g3, rng.uniform(1e-6, 1e-5, 2), v3, np.array([0.1, 0.1]), noise, 1e-13, 10.0),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    backends = [("python", _pykernels)] + ([("cython", _ckernels)] if _ckernels else [])
    print(f"{'kernel':28s}" + "".join(f"{name:>14s}" for name, _ in backends) + ("  speedup" if _ckernels else ""))
    for name, fn in cases(rng).items():
        times = []
        for _, mod in backends:
            number = 1 if "enumerate" in name else 200
            best = min(timeit.repeat(lambda: fn(mod), number=number, repeat=args.repeat)) / number
            times.append(best)
        cols = "".join(f"{t * 1e6:12.1f}us" for t in times)
        speed = f"  {times[0] / times[1]:6.1f}x" if len(times) == 2 else ""
        print(f"{name:28s}{cols}{speed}")
    if _ckernels is None:
        print("compiled backend unavailable; build with `pip install -e . --no-build-isolation`")


if __name__ == "__main__":
    main()
