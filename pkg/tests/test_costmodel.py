import pytest
from hypothesis import given
from hypothesis import strategies as st

from capsule.costmodel import CostModel, Load, ResourceSample, budget_from_fps


def test_budget_from_fps():
    assert budget_from_fps(30) == pytest.approx(33.333333333)
    with pytest.raises(ValueError):
        budget_from_fps(0)


def test_validation():
    with pytest.raises(ValueError):
        CostModel(cpu_capacity=0)
    with pytest.raises(ValueError):
        CostModel(shared_cpu=-1)
    with pytest.raises(TypeError):
        CostModel(shared_cpu=1.5)
    with pytest.raises(ValueError):
        CostModel.from_dict({"warp_drive": 1})


def test_roundtrip():
    cm = CostModel(shared_gpu=5)
    assert CostModel.from_dict(cm.to_dict()) == cm
    assert cm.replace(shared_gpu=6).shared_gpu == 6


def test_gpu_work_zero_without_players():
    cm = CostModel(shared_gpu=10, per_view_gpu=3)
    assert cm.gpu_work(0) == 0
    assert cm.gpu_work(4) == 22


def test_vram_spill_multiplies_load():
    cm = CostModel(cpu_capacity=100, gpu_capacity=100, vram_capacity=10, vram_spill_penalty=8)
    assert cm.capsule_fits(50, 50, 10)
    assert not cm.capsule_fits(50, 50, 11)
    assert cm.capsule_load(50, 20, 11) == pytest.approx(4.0)


def test_baseline_fits_pools_gpu_and_cores():
    cm = CostModel(cpu_capacity=100, cpu_cores=2, gpu_capacity=100, vram_capacity=100)
    inst = Load(70, 30, 20)
    assert cm.baseline_fits([inst, inst])
    assert not cm.baseline_fits([inst] * 3)  # 210 cpu on 2 cores of 100
    assert not cm.baseline_fits([Load(101, 0, 0)])
    assert cm.baseline_fits([])
    assert cm.baseline_load([]) == 0.0


def test_sample_validation():
    with pytest.raises(ValueError):
        ResourceSample(0, 0, -1, 0, 0, 0, 0.0)
    s = ResourceSample(0, 1, 2, 3, 4, 5, 1.0)
    assert [s.resource(r) for r in ("cpu", "ram", "gpu", "vram")] == [2, 3, 4, 5]


@given(st.integers(1, 10**6), st.integers(1, 10**6), st.integers(0, 10**9))
def test_doubling_gpu_capacity_never_hurts(cpu, gpu, vram):
    cm = CostModel(cpu_capacity=10**6, gpu_capacity=5 * 10**5, vram_capacity=10**8)
    if cm.capsule_fits(cpu, gpu, vram):
        assert cm.replace(gpu_capacity=2 * cm.gpu_capacity).capsule_fits(cpu, gpu, vram)
