"""Declarative workloads consumed identically by the capsule and baseline runners.

Scenario files are YAML documents (``.scn``) whose top-level keys are exactly
the fields of :class:`Scenario`. Nothing in the schema says how the scenario
is hosted; the runner decides that.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .costmodel import CostModel, budget_from_fps
from .ecs import AssetRef, Component
from .errors import IncompatibleScenario, InvalidScenario
from .session import EntitySpec, PlayerProfile

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ComponentSpec:
    kind: str
    size: int


@dataclass(frozen=True)
class EntityGroup:
    count: int = 0
    components: tuple[ComponentSpec, ...] = ()

    @property
    def bytes_per_entity(self) -> int:
        return sum(c.size for c in self.components)


@dataclass(frozen=True)
class AssetSpec:
    id: str
    size: int
    shared: bool = True


@dataclass(frozen=True)
class ScheduleEntry:
    tick: int
    action: str  # "join" | "leave"
    player: int | None = None  # slot, required for leave


@dataclass(frozen=True)
class GlobalEventSpec:
    tick: int
    name: str
    payload_size: int = 0


@dataclass(frozen=True)
class InputSpec:
    tick: int
    player: int  # slot, the n-th join in the schedule
    name: str
    payload: str = ""


@dataclass(frozen=True)
class Scenario:
    name: str = "scenario"
    seed: int = 0
    target_fps: float = 30.0
    duration_ticks: int = 10
    global_entities: EntityGroup = EntityGroup()
    per_player_entities: EntityGroup = EntityGroup()
    assets: tuple[AssetSpec, ...] = ()
    join_schedule: tuple[ScheduleEntry, ...] = ()
    global_events: tuple[GlobalEventSpec, ...] = ()
    inputs: tuple[InputSpec, ...] = ()
    shared_gpu: int = 0
    per_view_gpu: int = 0
    cost_model: CostModel = field(default_factory=CostModel)
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if (self.cost_model.shared_gpu, self.cost_model.per_view_gpu) != (self.shared_gpu, self.per_view_gpu):
            cm = self.cost_model.replace(shared_gpu=self.shared_gpu, per_view_gpu=self.per_view_gpu)
            object.__setattr__(self, "cost_model", cm)
        self.validate()

    # -- validation ---------------------------------------------------------

    def validate(self) -> None:
        if self.schema_version != SCHEMA_VERSION:
            raise InvalidScenario(f"unsupported schema_version {self.schema_version}")
        if self.target_fps <= 0:
            raise InvalidScenario("target_fps must be > 0")
        if self.duration_ticks < 0:
            raise InvalidScenario("duration_ticks must be >= 0")
        for group in (self.global_entities, self.per_player_entities):
            if group.count < 0 or any(c.size < 0 for c in group.components):
                raise InvalidScenario("entity counts and component sizes must be >= 0")
            kinds = [c.kind for c in group.components]
            if len(set(kinds)) != len(kinds):
                raise InvalidScenario("duplicate component kind in entity group")
        if self.shared_gpu < 0 or self.per_view_gpu < 0:
            raise InvalidScenario("gpu work must be >= 0")
        ids = [a.id for a in self.assets]
        if len(set(ids)) != len(ids):
            raise InvalidScenario("duplicate asset id")
        if any(a.size <= 0 for a in self.assets):
            raise InvalidScenario("asset sizes must be > 0")
        if any(a.shared for a in self.assets) and self.global_entities.count == 0:
            raise InvalidScenario("shared assets need at least one global entity to hold them")
        if any(not a.shared for a in self.assets) and self.per_player_entities.count == 0:
            raise InvalidScenario("per-player assets need at least one per-player entity")

        ticks = [e.tick for e in self.join_schedule]
        if any(b <= a for a, b in zip(ticks, ticks[1:])):
            raise InvalidScenario("join_schedule ticks must be strictly increasing")
        if ticks and (ticks[0] < 0 or self.duration_ticks < ticks[-1]):
            raise InvalidScenario("duration_ticks must cover the last schedule tick")
        slots = 0
        left: set[int] = set()
        for entry in self.join_schedule:
            if entry.action == "join":
                slots += 1
            elif entry.action == "leave":
                if entry.player is None or not 0 <= entry.player < slots or entry.player in left:
                    raise InvalidScenario(f"leave at tick {entry.tick} names no active slot")
                left.add(entry.player)
            else:
                raise InvalidScenario(f"unknown schedule action {entry.action!r}")
        for inp in self.inputs:
            if not 0 <= inp.player < slots:
                raise IncompatibleScenario(
                    f"input at tick {inp.tick} targets local scope of slot {inp.player}, "
                    f"but the schedule only admits {slots} players"
                )

    # -- derived views ------------------------------------------------------

    @property
    def budget_ms(self) -> float:
        return budget_from_fps(self.target_fps)

    @property
    def slots(self) -> int:
        return sum(1 for e in self.join_schedule if e.action == "join")

    def full_cost_model(self) -> CostModel:
        return self.cost_model

    def has_shared_content(self) -> bool:
        return self.global_entities.count > 0 and any(a.shared for a in self.assets) and self.shared_gpu > 0

    def scene(self) -> tuple[EntitySpec, ...]:
        """Global entities with deterministic payloads; shared assets held round-robin."""
        rng = np.random.default_rng([self.seed, 0])
        shared = [a for a in self.assets if a.shared]
        specs = []
        for i in range(self.global_entities.count):
            comps = tuple(Component(c.kind, rng.bytes(c.size)) for c in self.global_entities.components)
            held = tuple(
                AssetRef(a.id, a.size) for j, a in enumerate(shared) if j % self.global_entities.count == i
            )
            specs.append(EntitySpec(comps, held))
        return tuple(specs)

    def player_profile(self, slot: int) -> PlayerProfile:
        """Local content of the ``slot``-th joining player; independent of who else is present."""
        rng = np.random.default_rng([self.seed, 1, slot])
        own = [a for a in self.assets if not a.shared]
        group = self.per_player_entities
        specs = []
        for i in range(group.count):
            comps = tuple(Component(c.kind, rng.bytes(c.size)) for c in group.components)
            held = tuple(AssetRef(f"{a.id}#{slot}", a.size) for j, a in enumerate(own) if j % group.count == i)
            specs.append(EntitySpec(comps, held))
        return PlayerProfile(tuple(specs))

    def global_event_payload(self, spec: GlobalEventSpec) -> bytes:
        return np.random.default_rng([self.seed, 2, spec.tick]).bytes(spec.payload_size)

    # -- edits --------------------------------------------------------------

    def replace(self, **changes) -> "Scenario":
        return dataclasses.replace(self, **changes)

    def with_players(self, n: int, start: int = 0, spacing: int = 1, settle: int = 1) -> "Scenario":
        """Same content, schedule replaced by ``n`` joins; inputs for dropped slots removed."""
        schedule = tuple(ScheduleEntry(start + i * spacing, "join") for i in range(n))
        last = schedule[-1].tick if schedule else 0
        duration = max(self.duration_ticks, last + settle)
        inputs = tuple(i for i in self.inputs if i.player < n)
        return self.replace(join_schedule=schedule, duration_ticks=duration, inputs=inputs)

    # -- serialisation ------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        def group(g: EntityGroup):
            return {"count": g.count, "components": [{"kind": c.kind, "size": c.size} for c in g.components]}

        cm = self.cost_model.to_dict()
        cm.pop("shared_gpu")
        cm.pop("per_view_gpu")
        return {
            "schema_version": self.schema_version,
            "name": self.name,
            "seed": self.seed,
            "target_fps": self.target_fps,
            "duration_ticks": self.duration_ticks,
            "global_entities": group(self.global_entities),
            "per_player_entities": group(self.per_player_entities),
            "assets": [{"id": a.id, "size": a.size, "shared": a.shared} for a in self.assets],
            "join_schedule": [
                {"tick": e.tick, "action": e.action, **({} if e.player is None else {"player": e.player})}
                for e in self.join_schedule
            ],
            "global_events": [dataclasses.asdict(e) for e in self.global_events],
            "inputs": [dataclasses.asdict(i) for i in self.inputs],
            "shared_gpu": self.shared_gpu,
            "per_view_gpu": self.per_view_gpu,
            "cost_model": cm,
        }

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "Scenario":
        if not isinstance(doc, dict):
            raise InvalidScenario("scenario document must be a mapping")
        unknown = set(doc) - SCENARIO_FIELDS
        if unknown:
            raise IncompatibleScenario(f"fields outside the scenario schema: {sorted(unknown)}")
        if "shared_gpu" in (doc.get("cost_model") or {}) or "per_view_gpu" in (doc.get("cost_model") or {}):
            raise InvalidScenario("shared_gpu/per_view_gpu are top-level scenario fields")
        try:
            def group(d):
                d = d or {}
                return EntityGroup(
                    int(d.get("count", 0)),
                    tuple(ComponentSpec(str(c["kind"]), int(c["size"])) for c in d.get("components", ())),
                )

            cm = dict(doc.get("cost_model") or {})
            return cls(
                schema_version=int(doc.get("schema_version", SCHEMA_VERSION)),
                name=str(doc.get("name", "scenario")),
                seed=int(doc.get("seed", 0)),
                target_fps=float(doc.get("target_fps", 30.0)),
                duration_ticks=int(doc.get("duration_ticks", 10)),
                global_entities=group(doc.get("global_entities")),
                per_player_entities=group(doc.get("per_player_entities")),
                assets=tuple(
                    AssetSpec(str(a["id"]), int(a["size"]), bool(a.get("shared", True))) for a in doc.get("assets") or ()
                ),
                join_schedule=tuple(
                    ScheduleEntry(int(e["tick"]), str(e["action"]), None if e.get("player") is None else int(e["player"]))
                    for e in doc.get("join_schedule") or ()
                ),
                global_events=tuple(
                    GlobalEventSpec(int(e["tick"]), str(e["name"]), int(e.get("payload_size", 0)))
                    for e in doc.get("global_events") or ()
                ),
                inputs=tuple(
                    InputSpec(int(i["tick"]), int(i["player"]), str(i["name"]), str(i.get("payload", "")))
                    for i in doc.get("inputs") or ()
                ),
                shared_gpu=int(doc.get("shared_gpu", 0)),
                per_view_gpu=int(doc.get("per_view_gpu", 0)),
                cost_model=CostModel.from_dict(cm),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, InvalidScenario):
                raise
            raise InvalidScenario(f"malformed scenario: {exc}") from exc

    def dumps(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=None, width=100)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps())


SCENARIO_FIELDS = frozenset(f.name for f in dataclasses.fields(Scenario))


def loads(text: str) -> Scenario:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise InvalidScenario(f"unparseable scenario: {exc}") from exc
    return Scenario.from_dict(doc)


def load(path: str | Path) -> Scenario:
    return loads(Path(path).read_text())
