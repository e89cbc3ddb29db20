"""Deterministic resource cost model.

All work and byte quantities are integers so that accounting identities
(baseline linearity, conservation) hold exactly. Only utilisation and
modelled tick time are floats, and admission decisions never depend on them.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from typing import Iterable, NamedTuple

MiB = 1 << 20


def budget_from_fps(fps: float) -> float:
    if fps <= 0:
        raise ValueError("target fps must be positive")
    return 1000.0 / fps


@dataclass(frozen=True)
class CostModel:
    engine_fixed_cpu: int = 800_000
    per_player_cpu: int = 100  # per visible entity per tick
    shared_cpu: int = 50  # per global entity per tick, paid once
    shared_gpu: int = 60_000
    per_view_gpu: int = 100_000
    engine_fixed_ram: int = 512 * 1024
    local_storage_ram: int = 4096  # empty local storage overhead
    framebuffer: int = 32 * MiB
    cpu_capacity: int = 1_200_000  # work units per tick on one core
    cpu_cores: int = 8
    gpu_capacity: int = 1_000_000
    vram_capacity: int = 24 * 1024 * MiB
    vram_spill_penalty: int = 8

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not isinstance(value, int) or isinstance(value, bool):
                raise TypeError(f"{f.name} must be an int, got {value!r}")
            if value < 0:
                raise ValueError(f"{f.name} must be >= 0")
        for name in ("cpu_capacity", "cpu_cores", "gpu_capacity", "vram_capacity", "vram_spill_penalty"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")

    def replace(self, **changes) -> "CostModel":
        return CostModel(**{**asdict(self), **changes})

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "CostModel":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown cost model fields: {sorted(unknown)}")
        return cls(**{k: int(v) for k, v in data.items()})

    # -- work ---------------------------------------------------------------

    def cpu_work(self, n_global: int, visible_counts: Iterable[int], extra: int = 0) -> int:
        """Serial main-thread work: fixed + global systems + sum of per-player work."""
        return (
            self.engine_fixed_cpu
            + self.shared_cpu * n_global
            + self.per_player_cpu * sum(visible_counts)
            + extra
        )

    def gpu_work(self, n_players: int) -> int:
        if n_players == 0:
            return 0
        return self.shared_gpu + self.per_view_gpu * n_players

    # -- capsule (one engine, one main thread) -------------------------------

    def _spill(self, vram: int) -> int:
        return self.vram_spill_penalty if vram > self.vram_capacity else 1

    def capsule_fits(self, cpu: int, gpu: int, vram: int) -> bool:
        mult = self._spill(vram)
        return cpu * mult <= self.cpu_capacity and gpu * mult <= self.gpu_capacity

    def capsule_load(self, cpu: int, gpu: int, vram: int) -> float:
        return max(cpu / self.cpu_capacity, gpu / self.gpu_capacity) * self._spill(vram)

    # -- baseline (one engine process per player) ---------------------------

    def baseline_fits(self, instances: list["Load"]) -> bool:
        if not instances:
            return True
        total_cpu = sum(i.cpu for i in instances)
        total_gpu = sum(i.gpu for i in instances)
        mult = self._spill(sum(i.vram for i in instances))
        if total_cpu * mult > self.cpu_capacity * self.cpu_cores or total_gpu * mult > self.gpu_capacity:
            return False
        return all(i.cpu * mult <= self.cpu_capacity for i in instances)

    def baseline_load(self, instances: list["Load"]) -> float:
        """Worst instance frame load; each instance owns a core but shares GPU and VRAM."""
        if not instances:
            return 0.0
        total_cpu = sum(i.cpu for i in instances)
        machine = max(
            total_cpu / (self.cpu_capacity * self.cpu_cores),
            sum(i.gpu for i in instances) / self.gpu_capacity,
        )
        worst = max(max(i.cpu / self.cpu_capacity for i in instances), machine)
        return worst * self._spill(sum(i.vram for i in instances))

    # -- utilisation ----------------------------------------------------------

    def cpu_util(self, cpu_work: int) -> float:
        """Machine-wide CPU utilisation over all cores."""
        return cpu_work / (self.cpu_capacity * self.cpu_cores)

    def gpu_util(self, gpu_work: int) -> float:
        return gpu_work / self.gpu_capacity


class Load(NamedTuple):
    """Per-tick work of one engine instance."""

    cpu: int
    gpu: int
    vram: int
    ram: int = 0

    def __add__(self, other):  # type: ignore[override]
        return Load(self.cpu + other.cpu, self.gpu + other.gpu, self.vram + other.vram, self.ram + other.ram)


@dataclass(frozen=True)
class ResourceSample:
    tick: int
    players: int
    cpu_work: int
    ram_bytes: int
    gpu_work: int
    vram_bytes: int
    tick_model_ms: float

    def __post_init__(self):
        for name in ("tick", "players", "cpu_work", "ram_bytes", "gpu_work", "vram_bytes"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.tick_model_ms < 0:
            raise ValueError("tick_model_ms must be >= 0")

    def resource(self, name: str) -> int:
        return {"cpu": self.cpu_work, "ram": self.ram_bytes, "gpu": self.gpu_work, "vram": self.vram_bytes}[name]


RESOURCES = ("cpu", "ram", "gpu", "vram")
