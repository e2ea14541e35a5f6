#!/usr/bin/env python3
"""Compare the compiled execution kernel against the pure-Python fallback.

Two views: raw block-execution throughput (instructions/second over the
bundled workloads, no strobing) and end-to-end verify sessions at a few
strobe intervals, where the Python-side readback/compare machinery bounds
the gain at small intervals.

Usage:  python benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import time
from array import array

from feriver import engine
from feriver.backends import state_from_image
from feriver.harness import RunConfig, run_verify
from feriver.workloads import builtin_workloads


def raw_throughput(kernel_name, image, repeats):
    mod = engine.kernel_module(kernel_name)
    best = 0.0
    total = 0
    for _ in range(repeats):
        st = state_from_image(image)
        t0 = time.perf_counter()
        out = mod.run_block(st.regs, st.mem, st.base, st.pc, 0, 10**9,
                            0, 0, 0, 0, b"", array("I"), None)
        dt = time.perf_counter() - t0
        total = out[4]
        best = max(best, total / dt)
    return best, total


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    images = builtin_workloads()
    available = ["pure"]
    try:
        engine.kernel_module("compiled")
        available.append("compiled")
    except ImportError:
        print("compiled kernel not built; benchmarking the fallback only")

    print(f"{'workload':<10} {'kernel':<10} {'instrs':>8} {'MIPS':>10}")
    speedups = {}
    for name, image in images.items():
        per_kernel = {}
        for kernel in available:
            reps = args.repeats if kernel == "compiled" else max(1, args.repeats // 2)
            ips, n = raw_throughput(kernel, image, reps)
            per_kernel[kernel] = ips
            print(f"{name:<10} {kernel:<10} {n:>8} {ips / 1e6:>10.2f}")
        if len(per_kernel) == 2:
            speedups[name] = per_kernel["compiled"] / per_kernel["pure"]
    if speedups:
        gmean = 1.0
        for s in speedups.values():
            gmean *= s
        gmean **= 1.0 / len(speedups)
        print(f"\nraw block-execution speedup (compiled/pure): "
              + ", ".join(f"{k} {v:.0f}x" for k, v in speedups.items())
              + f"  (geometric mean {gmean:.0f}x)")

    print("\nend-to-end verify sessions (active kernel:", engine.active_kernel() + ")")
    print(f"{'workload':<10} {'strobe':>6} {'MIPS':>10}")
    import tempfile

    with tempfile.TemporaryDirectory() as tmp:
        for name in images:
            for strobe in (1, 10, 100):
                cfg = RunConfig(workload=f"builtin:{name}", strobe_counter=strobe,
                                out=tmp)
                _status, report = run_verify(cfg, quiet=True)
                print(f"{name:<10} {strobe:>6} {report.throughput_ips / 1e6:>10.3f}")
    print("\nrun with FERIVER_PURE=1 to measure the sessions on the fallback kernel")


if __name__ == "__main__":
    main()
