"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--sizes 50 100 200] [--repeat 5]

Prints one row per (kernel, size) with the best-of-``repeat`` wall time for
each backend and the speedup. Both backends are checked for agreement first.
"""
import argparse
import timeit

import numpy as np

from robustgsl import kernels


def _inputs(n, rng):
    G = rng.normal(size=(n, n))
    M = rng.random((n, n))
    M = np.ascontiguousarray(M + M.T)
    q = rng.random(n) + 0.1
    active = np.ones(n)
    B = rng.normal(size=(n, n))
    return (G, M, q, active), B + B.T


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[50, 100, 200])
    ap.add_argument("--jacobi-sizes", type=int, nargs="+", default=[20, 40, 80])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    backends = kernels.available_backends()
    if "cython" not in backends:
        print("compiled extension not built; only the fallback is available")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<20}{'n':>6}" + "".join(f"{name + ' [ms]':>16}" for name in sorted(backends)) + f"{'speedup':>10}")

    def report(name, n, fn_by_backend, number):
        times = {}
        for b, fn in fn_by_backend.items():
            times[b] = min(timeit.repeat(fn, number=number, repeat=args.repeat)) / number * 1e3
        cols = "".join(f"{times[b]:>16.3f}" for b in sorted(times))
        speed = times["python"] / times["cython"] if "cython" in times else float("nan")
        print(f"{name:<20}{n:>6}{cols}{speed:>10.1f}")

    for n in args.sizes:
        bw_args, _ = _inputs(n, rng)
        outs = [m.sym_norm_backward(*bw_args) for m in backends.values()]
        assert all(np.allclose(o, outs[0], rtol=1e-12, atol=1e-12) for o in outs)
        report("sym_norm_backward", n, {b: (lambda m=m: m.sym_norm_backward(*bw_args)) for b, m in backends.items()}, 20)

    for n in args.jacobi_sizes:
        _, A = _inputs(n, rng)
        ws = [m.jacobi_eigh(A, 1e-10, 100)[0] for m in backends.values()]
        assert all(np.allclose(w, ws[0], atol=1e-8) for w in ws)
        report("jacobi_eigh", n, {b: (lambda m=m: m.jacobi_eigh(A, 1e-10, 100)) for b, m in backends.items()}, 1)
        t = min(timeit.repeat(lambda: np.linalg.eigh(A), number=20, repeat=args.repeat)) / 20 * 1e3
        print(f"{'  lapack eigh (ref)':<20}{n:>6}{t:>16.3f}")


if __name__ == "__main__":
    main()
