"""Built-in application profiles and the no-changes compatibility check.

Each profile is a template workload plus calibration targets. Only the
low-tier targets come from published measurements (capacities 9 vs 4 and the
resource ratios at four players); the high and medium tier targets are chosen
to land the capacities described for those application classes.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from enum import Enum

from .calibrate import REFERENCE_TARGETS, CalibrationTargets, calibrate_scenario
from .costmodel import MiB, CostModel
from .errors import IncompatibleScenario
from .harness import BASELINE, CAPSULE, run
from .scenario import (
    SCENARIO_FIELDS,
    AssetSpec,
    ComponentSpec,
    EntityGroup,
    GlobalEventSpec,
    InputSpec,
    Scenario,
    ScheduleEntry,
    loads,
)


class GraphicsTier(Enum):
    HIGH = "high"
    MEDIUM = "medium"
    LOW = "low"


@dataclass(frozen=True)
class AppProfile:
    name: str
    scenario: Scenario
    tier: GraphicsTier
    targets: CalibrationTargets


_BASE_COST = CostModel(
    engine_fixed_cpu=0,
    per_player_cpu=100,
    shared_cpu=50,
    engine_fixed_ram=0,
    local_storage_ram=4096,
    framebuffer=0,
    cpu_capacity=1,
    cpu_cores=8,
    gpu_capacity=1,
    vram_capacity=1,
    vram_spill_penalty=8,
)


def _schedule(*ticks):
    return tuple(ScheduleEntry(t, "join") for t in ticks)


def templates() -> list[tuple[str, GraphicsTier, Scenario, CalibrationTargets]]:
    exhibition = Scenario(
        name="exhibition",
        seed=7,
        duration_ticks=12,
        global_entities=EntityGroup(240, (ComponentSpec("transform", 64), ComponentSpec("mesh", 192))),
        per_player_entities=EntityGroup(11, (ComponentSpec("transform", 64), ComponentSpec("mesh", 192))),
        assets=tuple(AssetSpec(f"gallery_{i:02d}", 32 * MiB) for i in range(12))
        + (AssetSpec("visitor_skin", 8 * MiB, shared=False),),
        join_schedule=_schedule(0, 2, 4),
        global_events=(GlobalEventSpec(3, "doors_open", 16), GlobalEventSpec(8, "lights_dim", 8)),
        inputs=(InputSpec(1, 0, "walk", "north"), InputSpec(5, 1, "look", "left"), InputSpec(6, 2, "jump")),
        per_view_gpu=100_000,
        cost_model=_BASE_COST,
    )
    shooter = Scenario(
        name="shooter",
        seed=11,
        duration_ticks=12,
        global_entities=EntityGroup(120, (ComponentSpec("transform", 64), ComponentSpec("mesh", 128))),
        per_player_entities=EntityGroup(24, (ComponentSpec("transform", 64), ComponentSpec("weapon", 64))),
        assets=tuple(AssetSpec(f"arena_{i}", 24 * MiB) for i in range(6))
        + (AssetSpec("soldier_rig", 16 * MiB, shared=False),),
        join_schedule=_schedule(0, 2, 4),
        global_events=(GlobalEventSpec(4, "explode", 32),),
        inputs=(InputSpec(1, 0, "run", "fwd"), InputSpec(3, 1, "fire", "x"), InputSpec(7, 2, "jump")),
        per_view_gpu=180_000,
        cost_model=_BASE_COST.replace(per_player_cpu=400),
    )
    opera = Scenario(
        name="opera_house",
        seed=13,
        duration_ticks=10,
        global_entities=EntityGroup(400, (ComponentSpec("transform", 64), ComponentSpec("mesh", 256))),
        per_player_entities=EntityGroup(30, (ComponentSpec("transform", 64), ComponentSpec("mesh", 256))),
        assets=tuple(AssetSpec(f"auditorium_{i}", 64 * MiB) for i in range(4))
        + (AssetSpec("guide_voice", 24 * MiB, shared=False),),
        join_schedule=_schedule(0, 3),
        global_events=(GlobalEventSpec(5, "curtain_up", 8),),
        inputs=(InputSpec(2, 0, "walk", "stage"), InputSpec(6, 1, "look", "ceiling")),
        per_view_gpu=300_000,
        cost_model=_BASE_COST.replace(per_player_cpu=600),
    )
    return [
        ("opera_house", GraphicsTier.HIGH, opera,
         CalibrationTargets({"cpu": 1.6, "ram": 1.85, "gpu": 1.15, "vram": 1.6}, 2, 2, "gpu", "cpu")),
        ("shooter", GraphicsTier.MEDIUM, shooter,
         CalibrationTargets({"cpu": 2.4, "ram": 2.7, "gpu": 1.3, "vram": 2.2}, 3, 4, "vram", "cpu")),
        ("exhibition", GraphicsTier.LOW, exhibition, REFERENCE_TARGETS),
    ]


@functools.lru_cache(maxsize=1)
def builtin_profiles() -> tuple[AppProfile, ...]:
    return tuple(
        AppProfile(name, calibrate_scenario(template, targets), tier, targets)
        for name, tier, template, targets in templates()
    )


def builtin_profile(name: str) -> AppProfile:
    for profile in builtin_profiles():
        if profile.name == name:
            return profile
    raise KeyError(name)


# fields that would tell a runner how to host the scenario
MODE_SPECIFIC_FIELDS = frozenset({"mode", "isolation", "process_per_player", "capsule", "baseline", "shared_engine"})


@dataclass(frozen=True)
class CompatibilityReport:
    name: str
    mode_specific_fields: tuple[str, ...]
    single_player_matches_baseline: bool
    multi_player_matches_baseline: bool
    players_compared: int

    @property
    def passed(self) -> bool:
        return (
            not self.mode_specific_fields
            and self.single_player_matches_baseline
            and self.multi_player_matches_baseline
        )


def compatibility_check(profile: AppProfile | Scenario | str) -> CompatibilityReport:
    """Run one unmodified scenario solo, shared and as one process per player.

    ``profile`` may be an :class:`AppProfile`, a :class:`Scenario` or scenario
    text; text is parsed against the schema first, so any extra field or a
    local-scope reference to a player the schedule never admits raises
    :class:`IncompatibleScenario`.
    """
    if isinstance(profile, str):
        scenario = loads(profile)
    elif isinstance(profile, AppProfile):
        scenario = profile.scenario
    else:
        scenario = profile
    doc_fields = set(scenario.to_dict())
    extra = doc_fields - SCENARIO_FIELDS
    mode_fields = tuple(sorted((doc_fields | SCENARIO_FIELDS) & MODE_SPECIFIC_FIELDS))
    if extra:
        raise IncompatibleScenario(f"fields outside the scenario schema: {sorted(extra)}")
    if scenario.slots == 0:
        raise IncompatibleScenario("scenario never admits a player")

    solo_doc = scenario.with_players(1)
    solo_capsule = run(solo_doc, CAPSULE)
    solo_baseline = run(solo_doc, BASELINE)
    single_ok = bool(solo_capsule.digests) and solo_capsule.digests == solo_baseline.digests

    multi = run(scenario, CAPSULE)
    baseline = run(scenario, BASELINE)
    common = sorted(set(multi.digests) & set(baseline.digests))
    multi_ok = bool(common) and all(multi.digests[s] == baseline.digests[s] for s in common)
    return CompatibilityReport(scenario.name, mode_fields, single_ok, multi_ok, len(common))
