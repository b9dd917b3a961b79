"""Compare the compiled popcount kernels against the numpy fallback.

Run:  python3 benchmarks/bench_kernels.py
"""

import time

import numpy as np

from mstbnn.kernels import _numpy

try:
    from mstbnn.kernels import _popcount
    backends = [("numpy", _numpy), ("cython", _popcount)]
except ImportError:
    print("compiled kernel not built; benchmarking numpy only")
    backends = [("numpy", _numpy)]


def timeit(fn, *args, repeat=5):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    rng = np.random.default_rng(0)
    cases = [
        ("distance matrix 512x512, 144-bit rows",
         rng.integers(0, 1 << 63, size=(512, 3), dtype=np.uint64),
         None),
        ("distance matrix 64x64, 4608-bit rows",
         rng.integers(0, 1 << 63, size=(64, 72), dtype=np.uint64),
         None),
        ("conv popcounts 64 channels x 4096 pixels, 576-bit windows",
         rng.integers(0, 1 << 63, size=(64, 9), dtype=np.uint64),
         rng.integers(0, 1 << 63, size=(4096, 9), dtype=np.uint64)),
    ]
    for label, a, b in cases:
        print(label)
        ref = None
        for name, mod in backends:
            args = (a, a if b is None else b)
            out = mod.xor_popcount_rows(*args)
            if ref is None:
                ref = out
            assert np.array_equal(out, ref), f"{name} disagrees"
            dt = timeit(mod.xor_popcount_rows, *args)
            print(f"  {name:7s} {dt * 1e3:8.2f} ms")
    flat = rng.integers(0, 1 << 63, size=1 << 20, dtype=np.uint64)
    print("total popcount of 2^20 words")
    for name, mod in backends:
        assert mod.popcount_words(flat) == backends[0][1].popcount_words(flat)
        print(f"  {name:7s} {timeit(mod.popcount_words, flat) * 1e3:8.2f} ms")


if __name__ == "__main__":
    main()
