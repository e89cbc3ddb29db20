"""Player lifecycle on one shared engine: admission against the tick budget,
leave with reclamation, and engine-wide fate-sharing."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

from .costmodel import CostModel, Load
from .ecs import AVATAR, AVATAR_SIZE, AssetRef, Component, TickReport, World
from .errors import CapacityExceeded, EngineDown, UnknownPlayer
from .storage import GLOBAL, Local, PlayerId, ReclaimReport

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EntitySpec:
    components: tuple[Component, ...]
    assets: tuple[AssetRef, ...] = ()

    @property
    def nbytes(self) -> int:
        return sum(len(c.payload) for c in self.components)


@dataclass(frozen=True)
class PlayerProfile:
    """What a joining player brings into its local storage."""

    entities: tuple[EntitySpec, ...] = ()
    with_avatar: bool = True

    def specs(self) -> tuple[EntitySpec, ...]:
        if not self.with_avatar:
            return self.entities
        return (EntitySpec((Component(AVATAR, bytes(AVATAR_SIZE)),)),) + self.entities


class EndReason(Enum):
    LEFT = "left"
    ENGINE_FAILURE = "engine_failure"


@dataclass
class Session:
    player: PlayerId
    joined_at_tick: int
    state: str = "active"
    reason: EndReason | None = None

    @property
    def active(self) -> bool:
        return self.state == "active"

    def end(self, reason: EndReason) -> None:
        if not self.active:
            raise ValueError(f"session {self.player} already ended")
        self.state = "ended"
        self.reason = reason


@dataclass(frozen=True)
class AdmissionPolicy:
    budget_ms: float
    cost_model: CostModel

    def __post_init__(self):
        if not self.budget_ms > 0:
            raise ValueError("budget_ms must be > 0")

    def admits(self, load: Load) -> bool:
        return self.cost_model.capsule_fits(load.cpu, load.gpu, load.vram)

    def predicted_ms(self, load: Load) -> float:
        return self.budget_ms * self.cost_model.capsule_load(load.cpu, load.gpu, load.vram)


class Engine:
    """One shared engine hosting many players.

    ``scene`` is the global content. It is instantiated when the first
    player is admitted and torn down when the last one leaves, so an idle
    engine costs only its fixed overhead.
    """

    def __init__(self, world: World, scene: Sequence[EntitySpec] = (), admission: bool = True):
        self.world = world
        self.scene = tuple(scene)
        self.policy = AdmissionPolicy(world.budget_ms, world.cost_model)
        self.admission = admission
        self.sessions: dict[PlayerId, Session] = {}
        self.running = True
        self._next_player = 1
        self._scene_ids: list = []
        self._listeners: list[Callable[[list[Session]], None]] = []

    # -- queries ------------------------------------------------------------

    @property
    def active_players(self) -> list[PlayerId]:
        return sorted(p for p, s in self.sessions.items() if s.active)

    @property
    def scene_loaded(self) -> bool:
        return bool(self._scene_ids)

    def on_terminate(self, callback: Callable[[list[Session]], None]) -> None:
        self._listeners.append(callback)

    # -- admission ----------------------------------------------------------

    def predict_join(self, profile: PlayerProfile) -> Load:
        """Load of the engine after admitting ``profile``, from the cost model alone."""
        cm = self.world.cost_model
        cache = self.world.assets
        current = self.world.current_load()
        n_global = len(self.world.storage.global_store)
        cpu = current.cpu
        ram = current.ram + cm.local_storage_ram
        new_assets: dict[str, int] = {}

        def add_assets(specs):
            for spec in specs:
                for a in spec.assets:
                    if a.asset_id not in cache and a.asset_id not in new_assets:
                        new_assets[a.asset_id] = a.size

        if self.scene and not self.scene_loaded:
            n_scene = len(self.scene)
            cpu += cm.shared_cpu * n_scene
            # existing players (none when the scene is unloaded) would see it too
            cpu += cm.per_player_cpu * n_scene * len(self.world.storage.locals)
            ram += sum(s.nbytes for s in self.scene)
            n_global += n_scene
            add_assets(self.scene)
        specs = profile.specs()
        cpu += cm.per_player_cpu * (n_global + len(specs))
        ram += sum(s.nbytes for s in specs)
        add_assets(specs)
        n_players = len(self.world.storage.locals) + 1
        gpu = cm.gpu_work(n_players)
        vram = current.vram + cm.framebuffer + sum(new_assets.values())
        return Load(cpu, gpu, vram, ram)

    def join(self, profile: PlayerProfile | None = None) -> Session:
        if not self.running:
            raise EngineDown("engine terminated")
        profile = profile or PlayerProfile()
        predicted = self.predict_join(profile)
        if self.admission and not self.policy.admits(predicted):
            raise CapacityExceeded(self.policy.predicted_ms(predicted), self.policy.budget_ms)

        player = PlayerId(self._next_player)
        self._next_player += 1
        world = self.world
        world.create_local(player)
        if self.scene and not self.scene_loaded:
            self._load_scene()
        for spec in profile.specs():
            world.spawn_entity(Local(player), spec.components, spec.assets)
        session = Session(player, world.tick_counter)
        self.sessions[player] = session
        log.debug("player %s joined at tick %s", player, world.tick_counter)
        return session

    def _load_scene(self) -> None:
        self._scene_ids = [self.world.spawn_entity(GLOBAL, s.components, s.assets) for s in self.scene]

    def _unload_scene(self) -> None:
        for eid in self._scene_ids:
            if self.world.is_live(eid):
                self.world.despawn_entity(eid)
        self._scene_ids = []

    def leave(self, player: PlayerId) -> ReclaimReport:
        session = self.sessions.get(player)
        if session is None or not session.active:
            raise UnknownPlayer(player)
        report = self.world.destroy_local(player)
        session.end(EndReason.LEFT)
        if not self.world.storage.locals and self.scene_loaded:
            self._unload_scene()
        log.debug("player %s left, reclaimed %s", player, report)
        return report

    def terminate_engine(self, reason: str = "engine failure") -> list[Session]:
        ended = []
        for player in self.active_players:
            self.sessions[player].end(EndReason.ENGINE_FAILURE)
            ended.append(self.sessions[player])
        self.running = False
        log.warning("engine terminated (%s); %d sessions ended", reason, len(ended))
        for callback in self._listeners:
            callback(ended)
        return ended

    # -- ticking ------------------------------------------------------------

    def step(self, inputs: dict | None = None) -> TickReport:
        if not self.running:
            raise EngineDown("engine terminated")
        return self.world.tick(inputs)


def join(engine: Engine, profile: PlayerProfile | None = None) -> Session:
    return engine.join(profile)


def leave(engine: Engine, player: PlayerId) -> ReclaimReport:
    return engine.leave(player)


def terminate_engine(engine: Engine, reason: str = "engine failure") -> list[Session]:
    return engine.terminate_engine(reason)
