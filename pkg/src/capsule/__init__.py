"""Shared-engine multiplayer hosting: scoped ECS storage, cost model and benchmarks."""

from .costmodel import CostModel, Load, ResourceSample
from .ecs import (
    AssetRef,
    Component,
    EntityId,
    InputEvent,
    ScopeFilter,
    Stage,
    SystemDescriptor,
    TickReport,
    World,
    create_world,
    despawn_entity,
    spawn_entity,
    tick,
)
from .errors import *  # noqa: F401,F403
from .events import EventBus, GameplayEvent
from .harness import BASELINE, CAPSULE, RunResult, capacity_search, compare_runs, run
from .render import AssetCache, FrameDigest
from .scenario import Scenario, load, loads
from .session import Engine, EntitySpec, PlayerProfile, Session, join, leave, terminate_engine
from .storage import GLOBAL, CapsuleStorage, Local, PlayerId, Scope

__version__ = "0.1.0"
