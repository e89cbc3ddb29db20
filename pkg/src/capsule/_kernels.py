"""Hot numeric kernels.

Each kernel has a numba-compiled implementation and a numpy/pure-Python
fallback with identical results. ``CAPSULE_NUMBA=0`` (or a missing numba)
selects the fallback at import time; both paths stay importable so tests and
``benchmarks/bench_kernels.py`` can compare them directly.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1

NUMBA_ENABLED = numba is not None and os.environ.get("CAPSULE_NUMBA", "1").strip().lower() not in (
    "0",
    "false",
    "no",
    "off",
)

# Column layout of the closed-form model matrix consumed by sweep_capacities.
CPU_SHARED, CPU_PER, GPU_SHARED, GPU_PER, VRAM_SHARED, VRAM_PER = range(6)
CPU_CAP, CPU_CORES, GPU_CAP, VRAM_CAP, SPILL = range(6, 11)
N_MODEL_COLUMNS = 11


# --------------------------------------------------------------------------
# FNV-1a 64
# --------------------------------------------------------------------------


def fnv1a64_python(data, state: int = FNV_OFFSET) -> int:
    h = int(state)
    for b in bytes(data):
        h = ((h ^ b) * FNV_PRIME) & _MASK64
    return h


if numba is not None:

    @numba.njit(cache=True)
    def _fnv1a64_nb(data, state):
        h = state
        prime = np.uint64(FNV_PRIME)
        for i in range(data.shape[0]):
            h = (h ^ np.uint64(data[i])) * prime
        return h

    def fnv1a64_numba(data, state: int = FNV_OFFSET) -> int:
        buf = np.frombuffer(data, dtype=np.uint8) if not isinstance(data, np.ndarray) else data
        return int(_fnv1a64_nb(buf, np.uint64(state)))

else:  # pragma: no cover
    fnv1a64_numba = fnv1a64_python


fnv1a64 = fnv1a64_numba if NUMBA_ENABLED else fnv1a64_python


# --------------------------------------------------------------------------
# Closed-form capacity sweep
# --------------------------------------------------------------------------
#
# Capsule with n players:  cpu = a_c + n b_c on one main thread,
#                          gpu = a_g + n b_g, vram = a_v + n b_v.
# Baseline with n players: n copies of (a+b) per resource; every instance has
#                          its own main thread, the GPU and VRAM are pooled.
# A configuration fits when max(load) * spill <= 1, spill applying only when
# pooled VRAM exceeds capacity. Comparisons are done on products so integer
# inputs below 2**53 are decided exactly.


def sweep_capacities_numpy(models: np.ndarray, n_max: int) -> tuple[np.ndarray, np.ndarray]:
    m = np.asarray(models, dtype=np.float64)
    n = np.arange(1, n_max + 1, dtype=np.float64)[None, :]
    col = lambda k: m[:, k : k + 1]  # noqa: E731

    cpu_cap, cores, gpu_cap, vram_cap, spill = (col(k) for k in (CPU_CAP, CPU_CORES, GPU_CAP, VRAM_CAP, SPILL))

    mult = np.where(col(VRAM_SHARED) + n * col(VRAM_PER) > vram_cap, spill, 1.0)
    caps_ok = ((col(CPU_SHARED) + n * col(CPU_PER)) * mult <= cpu_cap) & (
        (col(GPU_SHARED) + n * col(GPU_PER)) * mult <= gpu_cap
    )

    inst_cpu = col(CPU_SHARED) + col(CPU_PER)
    inst_gpu = col(GPU_SHARED) + col(GPU_PER)
    inst_vram = col(VRAM_SHARED) + col(VRAM_PER)
    bmult = np.where(n * inst_vram > vram_cap, spill, 1.0)
    base_ok = (
        (inst_cpu * bmult <= cpu_cap)
        & (n * inst_cpu * bmult <= cores * cpu_cap)
        & (n * inst_gpu * bmult <= gpu_cap)
    )

    def first_fail(ok):
        return np.where(ok.all(axis=1), n_max, np.argmin(ok, axis=1)).astype(np.int64)

    return first_fail(caps_ok), first_fail(base_ok)


if numba is not None:

    @numba.njit(cache=True)
    def _sweep_nb(m, n_max):
        rows = m.shape[0]
        caps = np.zeros(rows, dtype=np.int64)
        base = np.zeros(rows, dtype=np.int64)
        for r in range(rows):
            a_c = m[r, CPU_SHARED]
            b_c = m[r, CPU_PER]
            a_g = m[r, GPU_SHARED]
            b_g = m[r, GPU_PER]
            a_v = m[r, VRAM_SHARED]
            b_v = m[r, VRAM_PER]
            cpu_cap = m[r, CPU_CAP]
            cores = m[r, CPU_CORES]
            gpu_cap = m[r, GPU_CAP]
            vram_cap = m[r, VRAM_CAP]
            spill = m[r, SPILL]

            count = 0
            for n in range(1, n_max + 1):
                mult = spill if a_v + n * b_v > vram_cap else 1.0
                if (a_c + n * b_c) * mult > cpu_cap or (a_g + n * b_g) * mult > gpu_cap:
                    break
                count = n
            caps[r] = count

            i_c = a_c + b_c
            i_g = a_g + b_g
            i_v = a_v + b_v
            count = 0
            for n in range(1, n_max + 1):
                mult = spill if n * i_v > vram_cap else 1.0
                if i_c * mult > cpu_cap or n * i_c * mult > cores * cpu_cap or n * i_g * mult > gpu_cap:
                    break
                count = n
            base[r] = count
        return caps, base

    def sweep_capacities_numba(models: np.ndarray, n_max: int) -> tuple[np.ndarray, np.ndarray]:
        return _sweep_nb(np.ascontiguousarray(models, dtype=np.float64), int(n_max))

else:  # pragma: no cover
    sweep_capacities_numba = sweep_capacities_numpy


sweep_capacities = sweep_capacities_numba if NUMBA_ENABLED else sweep_capacities_numpy


def peak_ratios(shared: np.ndarray, per_player: np.ndarray, players: int) -> np.ndarray:
    """Baseline/capsule totals at ``players`` for every (shared, per-player) split."""
    shared = np.asarray(shared, dtype=np.float64)
    per_player = np.asarray(per_player, dtype=np.float64)
    return players * (shared + per_player) / (shared + players * per_player)
