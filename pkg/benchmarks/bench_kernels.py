"""Time the numba kernels against their numpy/pure-Python fallbacks.

    python benchmarks/bench_kernels.py [--rows 20000] [--bytes 1000000]

Both paths are checked for identical results before timing.
"""

import argparse
import timeit

import numpy as np

from capsule import _kernels as k


def random_models(rng, rows):
    m = np.zeros((rows, k.N_MODEL_COLUMNS))
    m[:, k.CPU_SHARED] = rng.integers(0, 1_000_000, rows)
    m[:, k.CPU_PER] = rng.integers(1, 50_000, rows)
    m[:, k.GPU_SHARED] = rng.integers(0, 500_000, rows)
    m[:, k.GPU_PER] = rng.integers(1, 200_000, rows)
    m[:, k.VRAM_SHARED] = rng.integers(0, 1 << 32, rows)
    m[:, k.VRAM_PER] = rng.integers(1, 1 << 29, rows)
    m[:, k.CPU_CAP] = rng.integers(1_000_000, 4_000_000, rows)
    m[:, k.CPU_CORES] = rng.integers(1, 33, rows)
    m[:, k.GPU_CAP] = rng.integers(500_000, 4_000_000, rows)
    m[:, k.VRAM_CAP] = rng.integers(1 << 30, 1 << 35, rows)
    m[:, k.SPILL] = 8
    return m


def best(fn, repeat=5):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--rows", type=int, default=20_000)
    ap.add_argument("--n-max", type=int, default=256)
    ap.add_argument("--bytes", type=int, default=1_000_000)
    args = ap.parse_args()
    rng = np.random.default_rng(0)

    models = random_models(rng, args.rows)
    a = k.sweep_capacities_numba(models, args.n_max)
    b = k.sweep_capacities_numpy(models, args.n_max)
    assert all(np.array_equal(x, y) for x, y in zip(a, b)), "sweep kernels disagree"
    t_nb = best(lambda: k.sweep_capacities_numba(models, args.n_max))
    t_np = best(lambda: k.sweep_capacities_numpy(models, args.n_max))
    print(f"sweep_capacities {args.rows} models x {args.n_max}: numba {t_nb * 1e3:.2f} ms, "
          f"numpy {t_np * 1e3:.2f} ms, speedup {t_np / t_nb:.1f}x")

    data = rng.bytes(args.bytes)
    assert k.fnv1a64_numba(data) == k.fnv1a64_python(data), "fnv kernels disagree"
    t_nb = best(lambda: k.fnv1a64_numba(data))
    t_py = best(lambda: k.fnv1a64_python(data), repeat=2)
    print(f"fnv1a64 {args.bytes} bytes: numba {t_nb * 1e3:.2f} ms, python {t_py * 1e3:.2f} ms, "
          f"speedup {t_py / t_nb:.1f}x")


if __name__ == "__main__":
    main()
