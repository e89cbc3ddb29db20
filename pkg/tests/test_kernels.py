import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from capsule import _kernels as k


@given(st.binary(max_size=512), st.integers(0, 2**64 - 1))
def test_fnv_paths_agree(data, state):
    assert k.fnv1a64_numba(data, state) == k.fnv1a64_python(data, state)


def test_fnv_known_vectors():
    assert k.fnv1a64_python(b"") == 0xCBF29CE484222325
    assert k.fnv1a64_python(b"a") == 0xAF63DC4C8601EC8C
    assert k.fnv1a64_python(b"foobar") == 0x85944171F73967E8


def random_models(seed, rows):
    rng = np.random.default_rng(seed)
    m = np.zeros((rows, k.N_MODEL_COLUMNS))
    m[:, k.CPU_SHARED] = rng.integers(0, 10**6, rows)
    m[:, k.CPU_PER] = rng.integers(1, 10**5, rows)
    m[:, k.GPU_SHARED] = rng.integers(0, 10**6, rows)
    m[:, k.GPU_PER] = rng.integers(1, 10**5, rows)
    m[:, k.VRAM_SHARED] = rng.integers(0, 1 << 32, rows)
    m[:, k.VRAM_PER] = rng.integers(1, 1 << 30, rows)
    m[:, k.CPU_CAP] = rng.integers(10**5, 4 * 10**6, rows)
    m[:, k.CPU_CORES] = rng.integers(1, 16, rows)
    m[:, k.GPU_CAP] = rng.integers(10**5, 4 * 10**6, rows)
    m[:, k.VRAM_CAP] = rng.integers(1 << 28, 1 << 35, rows)
    m[:, k.SPILL] = rng.integers(1, 10, rows)
    return m


@given(st.integers(0, 2**32 - 1))
def test_sweep_paths_agree(seed):
    m = random_models(seed, 64)
    a = k.sweep_capacities_numba(m, 128)
    b = k.sweep_capacities_numpy(m, 128)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_sweep_matches_direct_loop():
    m = random_models(1, 200)
    caps, base = k.sweep_capacities_numpy(m, 64)
    for row, c, b in zip(m, caps, base):
        def fits_capsule(n):
            mult = row[k.SPILL] if row[k.VRAM_SHARED] + n * row[k.VRAM_PER] > row[k.VRAM_CAP] else 1
            return ((row[k.CPU_SHARED] + n * row[k.CPU_PER]) * mult <= row[k.CPU_CAP]
                    and (row[k.GPU_SHARED] + n * row[k.GPU_PER]) * mult <= row[k.GPU_CAP])

        expected = 0
        while expected < 64 and fits_capsule(expected + 1):
            expected += 1
        assert c == expected
        assert 0 <= b <= 64


@given(st.integers(0, 2**32 - 1))
def test_doubling_gpu_capacity_never_reduces_capacity(seed):
    m = random_models(seed, 32)
    m2 = m.copy()
    m2[:, k.GPU_CAP] *= 2
    c1, b1 = k.sweep_capacities(m, 128)
    c2, b2 = k.sweep_capacities(m2, 128)
    assert (c2 >= c1).all() and (b2 >= b1).all()


def test_peak_ratio_formula():
    assert k.peak_ratios(np.array([0.0]), np.array([1.0]), 4)[0] == 1.0
    assert k.peak_ratios(np.array([3.0]), np.array([1.0]), 4)[0] == 16 / 7


def test_env_flag_selects_fallback(monkeypatch):
    import importlib

    monkeypatch.setenv("CAPSULE_NUMBA", "0")
    mod = importlib.reload(k)
    try:
        assert not mod.NUMBA_ENABLED
        assert mod.fnv1a64 is mod.fnv1a64_python
        assert mod.sweep_capacities is mod.sweep_capacities_numpy
    finally:
        monkeypatch.delenv("CAPSULE_NUMBA")
        importlib.reload(k)
