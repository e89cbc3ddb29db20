import pytest

from capsule.costmodel import CostModel
from capsule.ecs import (
    AVATAR,
    AssetRef,
    Component,
    EntityId,
    InputEvent,
    ScopeFilter,
    Stage,
    SystemDescriptor,
    World,
    create_world,
    despawn_entity,
    spawn_entity,
    tick,
)
from capsule.errors import ComponentSizeError, ScopeViolation, StaleEntity, UnknownPlayer
from capsule.session import Engine, PlayerProfile
from capsule.storage import GLOBAL, Local


def pos(x=0):
    return Component("pos", x.to_bytes(8, "big"))


def test_spawn_routes_by_scope():
    w = create_world()
    w.create_local(1)
    g = spawn_entity(w, GLOBAL, [pos()])
    l = spawn_entity(w, Local(1), [pos()])
    assert g in w.storage.global_store.entities
    assert l in w.storage.local(1).entities
    assert w.visible_set(1) == sorted([g, l])


def test_spawn_into_missing_local_fails():
    w = create_world()
    with pytest.raises(UnknownPlayer):
        w.spawn_entity(Local(7), [pos()])


def test_slot_reuse_bumps_generation():
    w = create_world()
    a = w.spawn_entity(GLOBAL, [pos()])
    despawn_entity(w, a)
    b = w.spawn_entity(GLOBAL, [pos()])
    assert b.index == a.index and b.generation == a.generation + 1
    with pytest.raises(StaleEntity):
        w.get_component(a, "pos")
    with pytest.raises(StaleEntity):
        w.despawn_entity(a)
    assert w.get_component(b, "pos") == bytes(8)


def test_component_size_is_fixed_per_kind():
    w = create_world()
    w.spawn_entity(GLOBAL, [pos()])
    with pytest.raises(ComponentSizeError):
        w.spawn_entity(GLOBAL, [Component("pos", b"xx")])
    w.declare_component("hp", 2)
    with pytest.raises(ComponentSizeError):
        w.declare_component("hp", 4)
    with pytest.raises(ComponentSizeError):
        w.spawn_entity(GLOBAL, [Component("hp", b"abc")])
    with pytest.raises(ComponentSizeError):
        w.spawn_entity(GLOBAL, [pos(), pos(1)])


def test_set_component_keeps_size():
    w = create_world()
    e = w.spawn_entity(GLOBAL, [pos()])
    w.set_component(e, "pos", pos(5).payload)
    assert w.get_component(e, "pos") == pos(5).payload
    with pytest.raises(ComponentSizeError):
        w.set_component(e, "pos", b"1")


def test_local_entity_cannot_reference_other_local():
    w = create_world()
    w.create_local(1)
    w.create_local(2)
    g = w.spawn_entity(GLOBAL, [pos()])
    mine = w.spawn_entity(Local(1), [pos()])
    w.spawn_entity(Local(1), [pos()], refs=[g, mine])
    with pytest.raises(ScopeViolation):
        w.spawn_entity(Local(2), [pos()], refs=[mine])
    with pytest.raises(ScopeViolation):
        w.spawn_entity(GLOBAL, [pos()], refs=[mine])


def test_rejected_spawn_has_no_side_effects():
    w = create_world()
    w.create_local(1)
    w.create_local(2)
    mine = w.spawn_entity(Local(1), [pos()])
    before = (w.live_entities(), w.storage.ram_bytes, w.assets.total_vram)
    with pytest.raises(ScopeViolation):
        w.spawn_entity(Local(2), [pos()], assets=[AssetRef("tex", 10)], refs=[mine])
    assert (w.live_entities(), w.storage.ram_bytes, w.assets.total_vram) == before


def test_destroy_local_reclaims_everything():
    cm = CostModel(framebuffer=100, local_storage_ram=50)
    w = World(cost_model=cm)
    w.create_local(1)
    w.spawn_entity(Local(1), [pos()], assets=[AssetRef("own", 1000)])
    w.events.emit(Local(1), "ping", b"abc")
    rep = w.destroy_local(1)
    assert rep.entities == 1 and rep.ram_bytes == 50 + 8 + 3 and rep.vram_bytes == 1100
    assert rep.events_dropped == 1
    assert w.storage.ram_bytes == 0 and w.assets.total_vram == 0


def test_systems_run_in_stage_order_and_scope():
    w = create_world()
    calls = []
    w.systems.clear()
    w.register_system(SystemDescriptor("m", ScopeFilter.GLOBAL, Stage.METRICS, lambda w, p: calls.append(("m", p))))
    w.register_system(SystemDescriptor("i", ScopeFilter.PER_PLAYER, Stage.INPUT, lambda w, p: calls.append(("i", p))))
    w.register_system(SystemDescriptor("b", ScopeFilter.BOTH, Stage.LOGIC, lambda w, p: calls.append(("b", p))))
    w.create_local(3)
    w.create_local(1)
    w._sample = None
    w.tick()
    assert calls == [("i", 1), ("i", 3), ("b", None), ("b", 1), ("b", 3), ("m", None)]


def test_tick_reports_digest_per_player():
    w = create_world()
    w.create_local(1)
    w.create_local(2)
    r = tick(w)
    assert set(r.digests) == {1, 2}
    assert r.sample.players == 2 and r.tick == 0
    assert tick(w).tick == 1


def test_input_for_unknown_player_rejected():
    w = create_world()
    with pytest.raises(UnknownPlayer):
        w.tick({4: [InputEvent("jump")]})


def test_inputs_change_only_own_avatar():
    eng = Engine(create_world())
    p1 = eng.join(PlayerProfile()).player
    p2 = eng.join(PlayerProfile()).player
    a1, a2 = (next(iter(eng.world.storage.local(p).entities)) for p in (p1, p2))
    r0 = eng.step()
    r1 = eng.step({p1: [InputEvent("jump", b"hi")]})
    assert eng.world.get_component(a1, AVATAR) != bytes(8)
    assert eng.world.get_component(a2, AVATAR) == bytes(8)
    assert r1.digests[p1].hash != r0.digests[p1].hash


def test_world_digest_changes_with_state():
    w = create_world()
    d0 = w.digest()
    w.spawn_entity(GLOBAL, [pos()])
    assert w.digest() != d0


def test_entity_id_is_value():
    assert EntityId(1, 2) == EntityId(1, 2)
    assert EntityId(1, 2) < EntityId(1, 3)


def test_budget_must_be_positive():
    with pytest.raises(ValueError):
        World(budget_ms=0)
