"""Compare the compiled and pure-numpy kernels on relay-sized workloads.

Run with ``python3 benchmarks/bench_kernels.py``.  Prints the best-of-``repeat``
wall time per call for each backend and the speed-up.
"""
import argparse
import timeit

import numpy as np

from fdrelay.kernels import get_backend
from fdrelay.modem import qam


def workload(blocks, symbols, K, order, seed=0):
    rng = np.random.default_rng(seed)
    pts = qam(order).points
    base = pts[rng.integers(0, order, (blocks, symbols, K))] + 0.1 * (
        rng.standard_normal((blocks, symbols, K)) + 1j * rng.standard_normal((blocks, symbols, K)))
    coupling = 0.05 * (rng.standard_normal((blocks, K, K)) + 1j * rng.standard_normal((blocks, K, K)))
    y = base.ravel().copy()
    return base, coupling, y, qam(order).axis_levels


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--blocks", type=int, default=50)
    p.add_argument("--symbols", type=int, default=200)
    p.add_argument("--K", type=int, default=5)
    p.add_argument("--order", type=int, default=16, choices=(4, 16, 64))
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args()
    base, coupling, y, levels = workload(args.blocks, args.symbols, args.K, args.order)
    try:
        backends = {"cython": get_backend("cython"), "python": get_backend("python")}
    except ImportError:
        print("compiled extension not built; only the python backend is available")
        backends = {"python": get_backend("python")}
    ref = backends["python"].feedback_detect(base, coupling, 1, levels)[0]
    print(f"workload: {args.blocks} blocks x {args.symbols} slots x K={args.K}, {args.order}-QAM")
    print(f"{'kernel':<18}{'backend':<10}{'time [ms]':>12}")
    times = {}
    for name, mod in backends.items():
        assert np.array_equal(mod.feedback_detect(base, coupling, 1, levels)[0], ref)
        for kernel, call in (("feedback_detect", lambda: mod.feedback_detect(base, coupling, 1, levels)),
                             ("quantize_labels", lambda: mod.quantize_labels(y, levels))):
            best = min(timeit.repeat(call, number=1, repeat=args.repeat))
            times[(kernel, name)] = best
            print(f"{kernel:<18}{name:<10}{1e3 * best:>12.3f}")
    if len(backends) == 2:
        for kernel in ("feedback_detect", "quantize_labels"):
            print(f"speed-up {kernel}: {times[(kernel, 'python')] / times[(kernel, 'cython')]:.1f}x")


if __name__ == "__main__":
    main()
