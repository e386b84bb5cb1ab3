"""Benchmark the compiled kernels against the pure numpy fallback.

Times the two hot primitives (branch-pair Gram matrix, mixture inverse-CDF
sampling) on representative shapes, plus an end-to-end trajectory sample
through each backend.  Run as:

    python benchmarks/bench_kernels.py
"""

from __future__ import annotations

import time

import numpy as np


def _load_backends():
    from nmtraj.kernels import _pure

    backends = [("py", _pure)]
    try:
        from nmtraj import _fastkern

        backends.append(("c", _fastkern))
    except ImportError:
        print("compiled backend not available; benchmarking pure numpy only")
    return backends


def _time(fn, repeats=2000) -> float:
    fn()  # warm up
    start = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - start) / repeats


def bench_primitives():
    rng = np.random.default_rng(0)
    rows = []
    for nb, m, k in [(4, 2, 0), (16, 2, 2), (64, 3, 3)]:
        disp = rng.standard_normal((nb, m))
        pins = np.repeat(rng.standard_normal((nb // 2 + 1, k)), 2, axis=0)[:nb]
        mat = rng.standard_normal((m, m))
        form = mat @ mat.T + m * np.eye(m)
        for name, impl in _load_backends():
            dt = _time(lambda: impl.gram_matrix(disp, pins, form, 1e-9))
            rows.append((f"gram B={nb} m={m} k={k}", name, dt))
    for p in (1, 16, 64):
        coef = rng.random(p)
        mu = rng.standard_normal(p)
        for name, impl in _load_backends():
            dt = _time(
                lambda: impl.sample_mixture(
                    coef, mu, 1.3, mu.min() - 8, mu.max() + 8, 4096, 0.37
                ),
                repeats=500,
            )
            rows.append((f"sample P={p} G=4096", name, dt))
    return rows


def bench_trajectory():
    import os
    import subprocess
    import sys

    code = r"""
import time
import numpy as np
from nmtraj import kernels
from nmtraj.measure import Strategy, StrategyRunner
from nmtraj.presets import example_chain, example_kernel, example_system

runner = StrategyRunner(example_system(), example_kernel(0.5), example_chain(),
                        Strategy("monitoring"))
runner.run(rng=np.random.default_rng(0))
n = 2000
start = time.perf_counter()
for t in range(n):
    runner.run(rng=np.random.default_rng((1, t)), purities="final")
dt = (time.perf_counter() - start) / n
print(f"trajectory backend={kernels.BACKEND}: {dt * 1e6:9.1f} us")
"""
    for backend in ("py", "c"):
        env = dict(os.environ, NMTRAJ_KERNELS=backend)
        try:
            out = subprocess.run(
                [sys.executable, "-c", code], env=env, capture_output=True,
                text=True, check=True,
            )
            print(out.stdout, end="")
        except subprocess.CalledProcessError as err:
            print(f"trajectory backend={backend}: unavailable "
                  f"({err.stderr.strip().splitlines()[-1]})")


def main():
    print(f"{'primitive':28s} {'backend':8s} {'per call':>12s}")
    rows = bench_primitives()
    base = {}
    for label, name, dt in rows:
        base.setdefault(label, {})[name] = dt
    for label, per in base.items():
        for name, dt in per.items():
            speedup = ""
            if name == "c" and "py" in per:
                speedup = f"  ({per['py'] / dt:4.1f}x vs py)"
            print(f"{label:28s} {name:8s} {dt * 1e6:10.2f} us{speedup}")
    print()
    bench_trajectory()


if __name__ == "__main__":
    main()
