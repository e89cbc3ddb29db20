"""Minimal deterministic ECS world with capsule-routed storage."""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Callable, Iterable, NamedTuple, Sequence

from . import _kernels
from .costmodel import CostModel, Load, ResourceSample
from .errors import ComponentSizeError, ScopeViolation, StaleEntity, UnknownPlayer
from .events import EventBus
from .render import AssetCache, FrameDigest, FrameWork, render_tick
from .storage import CapsuleStorage, Local, PlayerId, ReclaimReport, Scope

AVATAR = "avatar"
AVATAR_SIZE = 8


class EntityId(NamedTuple):
    index: int
    generation: int


@dataclass(frozen=True)
class Component:
    kind: str
    payload: bytes


@dataclass(frozen=True)
class AssetRef:
    asset_id: str
    size: int


class Stage(IntEnum):
    INPUT = 0
    LOGIC = 1
    RENDER = 2
    METRICS = 3


class ScopeFilter(Enum):
    GLOBAL = "global"
    PER_PLAYER = "per_player"
    BOTH = "both"


SystemFn = Callable[["World", "PlayerId | None"], None]


@dataclass(frozen=True)
class SystemDescriptor:
    name: str
    scope_filter: ScopeFilter
    stage: Stage
    run: SystemFn
    cpu_cost: int = 0  # modelled work per invocation


@dataclass
class EntityRecord:
    id: EntityId
    scope: Scope
    ordinal: int
    components: dict[str, bytearray]
    assets: list[str] = field(default_factory=list)
    refs: tuple[EntityId, ...] = ()

    @property
    def nbytes(self) -> int:
        return sum(len(p) for p in self.components.values())


class InputEvent(NamedTuple):
    name: str
    payload: bytes = b""
    client_seq: int = 0


@dataclass(frozen=True)
class TickReport:
    tick: int
    players: tuple[PlayerId, ...]
    digests: dict[PlayerId, FrameDigest]
    frame_work: tuple[FrameWork, ...]
    sample: ResourceSample
    wall_ms: float


class World:
    def __init__(self, seed: int = 0, budget_ms: float = 1000.0 / 30, cost_model: CostModel | None = None, start_tick: int = 0):
        if not budget_ms > 0:
            raise ValueError("budget_ms must be > 0")
        self.seed = seed
        self.budget_ms = float(budget_ms)
        self.cost_model = cost_model or CostModel()
        self.tick_counter = start_tick
        self.storage = CapsuleStorage(local_overhead=self.cost_model.local_storage_ram)
        self.assets = AssetCache(framebuffer=self.cost_model.framebuffer)
        self.events = EventBus(self.storage)
        self.systems: list[SystemDescriptor] = []
        self.component_sizes: dict[str, int] = {AVATAR: AVATAR_SIZE}
        self.delivered: dict[PlayerId, int] = {}
        self._records: list[EntityRecord | None] = []
        self._generations: list[int] = []
        self._free: deque[int] = deque()
        self._inputs: dict = {}
        self._frame: list[tuple[FrameDigest, FrameWork]] = []
        self._extra_cpu = 0
        self._sample: ResourceSample | None = None
        self._install_builtin_systems()

    # -- components ---------------------------------------------------------

    def declare_component(self, kind: str, size: int) -> None:
        known = self.component_sizes.get(kind)
        if known is not None and known != size:
            raise ComponentSizeError(f"component {kind!r} already declared with size {known}")
        if size < 0:
            raise ComponentSizeError("component size must be >= 0")
        self.component_sizes[kind] = size

    def _check_components(self, components: Sequence[Component]) -> dict[str, bytearray]:
        out: dict[str, bytearray] = {}
        for comp in components:
            if comp.kind in out:
                raise ComponentSizeError(f"duplicate component kind {comp.kind!r}")
            size = self.component_sizes.get(comp.kind)
            if size is None:
                size = len(comp.payload)
            elif len(comp.payload) != size:
                raise ComponentSizeError(f"{comp.kind!r} payload is {len(comp.payload)} bytes, declared {size}")
            out[comp.kind] = bytearray(comp.payload)
        for kind, comp in out.items():
            self.component_sizes.setdefault(kind, len(comp))
        return out

    # -- entities -----------------------------------------------------------

    def is_live(self, eid: EntityId) -> bool:
        return (
            0 <= eid.index < len(self._records)
            and self._generations[eid.index] == eid.generation
            and self._records[eid.index] is not None
        )

    def record(self, eid: EntityId) -> EntityRecord:
        if not self.is_live(eid):
            raise StaleEntity(eid)
        return self._records[eid.index]

    def spawn_entity(
        self,
        scope: Scope,
        components: Sequence[Component] = (),
        assets: Sequence[AssetRef] = (),
        refs: Iterable[EntityId] = (),
    ) -> EntityId:
        store = self.storage.route_entity(scope)
        refs = tuple(refs)
        for ref in refs:
            target = self.record(ref).scope
            if not (target.is_global or target == scope):
                raise ScopeViolation(f"{scope!r} entity may not reference {target!r} entity {ref}")
        comps = self._check_components(components)
        for a in assets:
            self.assets.check(a.asset_id, a.size)

        if self._free:
            index = self._free.popleft()
            generation = self._generations[index]
        else:
            index = len(self._records)
            generation = 0
            self._records.append(None)
            self._generations.append(0)
        eid = EntityId(index, generation)
        rec = EntityRecord(eid, scope, store.next_ordinal(), comps, refs=refs)
        self._records[index] = rec
        store.entities.add(eid)
        store.bytes += rec.nbytes
        for a in assets:
            self.assets.load_asset(a.asset_id, a.size, eid)
            rec.assets.append(a.asset_id)
        return eid

    def despawn_entity(self, eid: EntityId) -> int:
        """Remove an entity, release its assets; returns the RAM bytes freed."""
        rec = self.record(eid)
        for asset_id in rec.assets:
            self.assets.release_asset(asset_id, eid)
        store = self.storage.route_entity(rec.scope)
        store.entities.discard(eid)
        store.bytes -= rec.nbytes
        self._records[eid.index] = None
        self._generations[eid.index] += 1
        self._free.append(eid.index)
        return rec.nbytes

    def get_component(self, eid: EntityId, kind: str) -> bytes:
        return bytes(self.record(eid).components[kind])

    def set_component(self, eid: EntityId, kind: str, payload: bytes) -> None:
        comps = self.record(eid).components
        if kind not in comps:
            raise KeyError(kind)
        if len(payload) != len(comps[kind]):
            raise ComponentSizeError(f"{kind!r} payload must stay {len(comps[kind])} bytes")
        comps[kind][:] = payload

    def live_entities(self) -> list[EntityId]:
        return [r.id for r in self._records if r is not None]

    def visible_set(self, player) -> list[EntityId]:
        return self.storage.visible_set(player)

    # -- players ------------------------------------------------------------

    def create_local(self, player: PlayerId) -> None:
        self.storage.create_local(player)
        self.events.register_player(player)
        self.assets.attach_view()
        self.delivered[player] = 0

    def destroy_local(self, player: PlayerId) -> ReclaimReport:
        store = self.storage.local(player)
        ram_before = store.bytes
        vram_before = self.assets.total_vram
        entities = sorted(store.entities)
        for eid in entities:
            self.despawn_entity(eid)
        dropped = self.events.unregister_player(player)
        self.storage.drop_local(player)
        self.assets.detach_view()
        self.delivered.pop(player, None)
        return ReclaimReport(player, len(entities), ram_before, vram_before - self.assets.total_vram, dropped)

    # -- systems & tick -----------------------------------------------------

    def register_system(self, system: SystemDescriptor) -> None:
        self.systems.append(system)

    def _install_builtin_systems(self) -> None:
        self.register_system(SystemDescriptor("input", ScopeFilter.PER_PLAYER, Stage.INPUT, _input_system))
        self.register_system(SystemDescriptor("gameplay", ScopeFilter.PER_PLAYER, Stage.LOGIC, _gameplay_system))
        self.register_system(SystemDescriptor("render", ScopeFilter.GLOBAL, Stage.RENDER, _render_system))
        self.register_system(SystemDescriptor("metrics", ScopeFilter.GLOBAL, Stage.METRICS, _metrics_system))

    def current_load(self) -> Load:
        cm = self.cost_model
        players = self.storage.players()
        n_global = len(self.storage.global_store)
        visible = [n_global + len(self.storage.locals[p]) for p in players]
        return Load(
            cm.cpu_work(n_global, visible),
            cm.gpu_work(len(players)),
            self.assets.total_vram,
            cm.engine_fixed_ram + self.storage.ram_bytes,
        )

    def tick(self, inputs: dict | None = None) -> TickReport:
        start = time.perf_counter()
        self._inputs = inputs or {}
        for player in self._inputs:
            if player not in self.storage.locals:
                raise UnknownPlayer(player)
        self._frame = []
        self._extra_cpu = 0
        players = self.storage.players()
        for stage in Stage:
            for system in self.systems:
                if system.stage != stage:
                    continue
                if system.scope_filter in (ScopeFilter.GLOBAL, ScopeFilter.BOTH):
                    system.run(self, None)
                    self._extra_cpu += system.cpu_cost
                if system.scope_filter in (ScopeFilter.PER_PLAYER, ScopeFilter.BOTH):
                    for player in players:
                        system.run(self, player)
                        self._extra_cpu += system.cpu_cost
        report = TickReport(
            tick=self.tick_counter,
            players=tuple(players),
            digests={d.player: d for d, _ in self._frame},
            frame_work=tuple(w for _, w in self._frame),
            sample=self._sample,
            wall_ms=(time.perf_counter() - start) * 1000.0,
        )
        self._inputs = {}
        self.tick_counter += 1
        return report

    def digest(self) -> int:
        """Hash of the whole world state (all stores, counters)."""
        from .render import encode_store

        h = _kernels.FNV_OFFSET
        for store in self.storage.stores():
            h = _kernels.fnv1a64(encode_store(self, store), h)
        return _kernels.fnv1a64(self.tick_counter.to_bytes(8, "big"), h)


def create_world(seed: int = 0, budget_ms: float = 1000.0 / 30, cost_model: CostModel | None = None) -> World:
    return World(seed, budget_ms, cost_model)


def spawn_entity(world: World, scope: Scope, components: Sequence[Component] = (), **kw) -> EntityId:
    return world.spawn_entity(scope, components, **kw)


def despawn_entity(world: World, eid: EntityId) -> int:
    return world.despawn_entity(eid)


def tick(world: World, inputs: dict | None = None) -> TickReport:
    return world.tick(inputs)


# -- built-in systems -------------------------------------------------------


def _input_system(world: World, player: PlayerId) -> None:
    for ev in world._inputs.get(player, ()):
        world.events.emit(Local(player), ev.name, ev.payload, world.tick_counter, origin=player)


def _gameplay_system(world: World, player: PlayerId) -> None:
    """Fold every delivered event into the player's avatar state.

    Only (name, payload, tick issued) enter the fold; ``seq`` depends on
    other players' traffic and must not leak into the frame.
    """
    events = world.events.drain_for(player, world.tick_counter)
    if not events:
        return
    world.delivered[player] += len(events)
    avatar = None
    for eid in world.storage.locals[player].entities:
        rec = world._records[eid.index]
        if AVATAR in rec.components and (avatar is None or rec.ordinal < avatar.ordinal):
            avatar = rec
    if avatar is None:
        return
    state = int.from_bytes(avatar.components[AVATAR], "big")
    for e in events:
        blob = b"".join((e.name.encode(), b"\0", e.payload, e.tick_issued.to_bytes(8, "big")))
        state = _kernels.fnv1a64(blob, state or _kernels.FNV_OFFSET)
    avatar.components[AVATAR][:] = state.to_bytes(AVATAR_SIZE, "big")


def _render_system(world: World, _player) -> None:
    world._frame = render_tick(world, world.storage.players())


def _metrics_system(world: World, _player) -> None:
    load = world.current_load()
    cpu = load.cpu + world._extra_cpu
    gpu = sum(w.total for _, w in world._frame)
    cm = world.cost_model
    world._sample = ResourceSample(
        tick=world.tick_counter,
        players=len(world.storage.locals),
        cpu_work=cpu,
        ram_bytes=load.ram,
        gpu_work=gpu,
        vram_bytes=load.vram,
        tick_model_ms=world.budget_ms * cm.capsule_load(cpu, gpu, load.vram),
    )
