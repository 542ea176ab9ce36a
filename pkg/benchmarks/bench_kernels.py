"""Compare the compiled kernels with the numpy fallback.

    python benchmarks/bench_kernels.py [--sizes 100 10000 100000] [--repeat 5]

Prints the best-of-``repeat`` wall time per call for batched projection
(with and without the Jacobian) and for DH forward kinematics, plus the
speedup of the compiled backend and the largest difference between the two
backends' outputs.
"""

import argparse
import timeit

import numpy as np

from posechain import kernels
from posechain.synth import DEFAULT_INTRINSICS, load_chain


def best_time(fn, repeat: int) -> float:
    number = 1
    while timeit.timeit(fn, number=number) < 0.05:
        number *= 2
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def cases(n: int, rng: np.random.Generator):
    pts = np.c_[rng.uniform(-0.5, 0.5, (n, 2)), rng.uniform(0.5, 3.0, n)]
    intr = DEFAULT_INTRINSICS.as_vector()
    dh = load_chain().params
    q = rng.uniform(-np.pi, np.pi, (n, dh.shape[0]))
    return {
        "project": lambda impl: kernels.project_points(pts, intr, impl=impl)[0],
        "project+jacobian": lambda impl: kernels.project_points(pts, intr, jacobian=True, impl=impl)[1],
        "dh_chain": lambda impl: kernels.dh_chain(dh, q, impl=impl),
    }


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[100, 10_000, 100_000])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    backends = kernels.available_backends()
    print(f"backends: {', '.join(backends)} (default: {kernels.BACKEND})")
    if "compiled" not in backends:
        print("compiled extension not built; only the numpy fallback is timed")
    rng = np.random.default_rng(0)
    header = f"{'kernel':<18}{'n':>9}" + "".join(f"{b + ' [ms]':>16}" for b in backends)
    if len(backends) > 1:
        header += f"{'speedup':>10}{'max diff':>11}"
    print(header)
    for n in args.sizes:
        for name, fn in cases(n, rng).items():
            times = {b: best_time(lambda b=b: fn(b), args.repeat) for b in backends}
            row = f"{name:<18}{n:>9}" + "".join(f"{1e3 * times[b]:>16.3f}" for b in backends)
            if len(backends) > 1:
                diff = float(np.max(np.abs(fn("compiled") - fn("python"))))
                row += f"{times['python'] / times['compiled']:>9.1f}x{diff:>11.1e}"
            print(row)


if __name__ == "__main__":
    main()
