import pytest

from capsule.errors import DuplicatePlayer, UnknownPlayer
from capsule.storage import GLOBAL, CapsuleStorage, GlobalStorage, Local, Scope


def test_global_storage_cannot_be_built_directly():
    with pytest.raises(TypeError):
        GlobalStorage()


def test_one_global_store_per_capsule():
    s = CapsuleStorage()
    assert s.global_store is s.global_store
    assert s.route_entity(GLOBAL) is s.global_store


def test_routing_to_local():
    s = CapsuleStorage(local_overhead=64)
    store = s.create_local(1)
    assert s.route_entity(Local(1)) is store
    assert s.route_event(Local(1)) is store
    assert store.bytes == 64
    with pytest.raises(UnknownPlayer):
        s.route_entity(Local(2))


def test_duplicate_player():
    s = CapsuleStorage()
    s.create_local(3)
    with pytest.raises(DuplicatePlayer):
        s.create_local(3)


def test_unknown_player_is_key_error():
    with pytest.raises(KeyError):
        CapsuleStorage().local(9)


def test_stores_order_and_players():
    s = CapsuleStorage()
    for p in (5, 2, 9):
        s.create_local(p)
    assert s.players() == [2, 5, 9]
    assert [st.scope for st in s.stores()] == [GLOBAL, Local(2), Local(5), Local(9)]
    s.drop_local(5)
    assert s.players() == [2, 9]


def test_scope_repr_and_order():
    assert repr(GLOBAL) == "Global"
    assert repr(Local(4)) == "Local(4)"
    assert Local(4) == Scope(4)
    assert GLOBAL.is_global and not Local(1).is_global
