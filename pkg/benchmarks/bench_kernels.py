"""Compare the compiled and pure-Python SGD kernels on the same stream.

    python benchmarks/bench_kernels.py [--T 20000] [--d 5] [--repeat 5]
"""
import argparse
import math
import timeit

import numpy as np

from robustreg import backend
from robustreg.data_gen import (CorruptionModel, PointMass, ProblemSpec, UniformNoise, UnitBoxNegative,
                                sample_stream, uniform_in_ball)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--T", type=int, default=20_000)
    ap.add_argument("--d", type=int, default=5)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    spec = ProblemSpec(uniform_in_ball(args.d, 1.0, 0), 1.0, UnitBoxNegative(args.d), UniformNoise(0.1),
                       CorruptionModel(0.3, PointMass(1e5)), rho=1 / (12 * args.d))
    X, y = sample_stream(spec, 1, args.T).view()
    center = spec.feature.mean()
    call = (X, y, center, True, 6.1, 1.0, 1 / (0.7 * spec.rho), True, args.T // 2 + 1, 100)

    if "cython" not in backend.BACKENDS:
        print("compiled extension not built; only the Python kernel is available")
    results, timings = {}, {}
    for name, fn in sorted(backend.BACKENDS.items()):
        results[name] = fn(*call)
        number = 20 if name == "cython" else 1
        best = min(timeit.repeat(lambda: fn(*call), number=number, repeat=args.repeat)) / number
        timings[name] = best
        print(f"{name:>7}: {best * 1e3:9.3f} ms per run  ({args.T / best / 1e6:7.2f} M steps/s)")

    if len(results) == 2:
        py, cy = results["python"], results["cython"]
        same = (np.array_equal(py[0], cy[0]) and np.array_equal(py[1], cy[1]) and py[2] == cy[2])
        print(f"speedup: {timings['python'] / timings['cython']:.0f}x; outputs bit-identical: {same}")
        return 0 if same and math.isfinite(timings["cython"]) else 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
