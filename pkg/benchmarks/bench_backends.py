#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Times the three hot kernels (total_loss, grad_pair, hessian) on synthetic
heavy-tailed samples and prints per-call timings plus the numba speedup.
The numpy path is what you get with AUTOHUBER_BACKEND=numpy; numba is the
default whenever it imports.

Usage:
    python benchmarks/bench_backends.py
    python benchmarks/bench_backends.py --sizes 1000,100000 --repeat 7
"""

import argparse
import timeit

import numpy as np

from autohuber import kernels

KERNEL_NAMES = ("total_loss", "grad_pair", "hessian")


def _fmt_seconds(t: float) -> str:
    if t < 1e-6:
        return f"{t * 1e9:8.1f} ns"
    if t < 1e-3:
        return f"{t * 1e6:8.1f} us"
    if t < 1.0:
        return f"{t * 1e3:8.1f} ms"
    return f"{t:8.2f} s "


def _per_call(fn, args, repeat: int) -> float:
    """Best per-call time over `repeat` autoranged runs."""
    timer = timeit.Timer(lambda: fn(*args))
    number, _ = timer.autorange()
    return min(timer.repeat(repeat=repeat, number=number)) / number


def run(sizes, repeat: int, z: float, seed: int) -> None:
    backends = kernels.available_backends()
    tables = {name: kernels.get_kernels(name) for name in backends}
    if "numba" in backends:
        kernels.warm_up()  # pay the JIT cost before timing
    else:
        print("numba not importable; timing the numpy fallback only\n")

    rng = np.random.default_rng(seed)
    header = f"{'kernel':<12} {'n':>9}" + "".join(f" {b:>12}" for b in backends)
    if len(backends) == 2:
        header += f" {'speedup':>9}"
    print(header)
    print("-" * len(header))
    for n in sizes:
        y = rng.standard_t(df=3, size=n)
        args = (y, 0.1, 1.5, z)
        for kname in KERNEL_NAMES:
            times = {b: _per_call(tables[b][kname], args, repeat) for b in backends}
            line = f"{kname:<12} {n:>9}"
            for b in backends:
                line += f" {_fmt_seconds(times[b])}"
            if len(backends) == 2:
                line += f" {times['numpy'] / times['numba']:>8.1f}x"
            print(line)
        print()


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "--sizes",
        default="1000,10000,100000,1000000",
        help="comma-separated sample sizes",
    )
    parser.add_argument("--repeat", type=int, default=5, help="timing repeats")
    parser.add_argument("--z", type=float, default=2.0, help="adjustment factor")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    run(sizes, args.repeat, args.z, args.seed)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
