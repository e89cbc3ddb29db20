"""Capsule storage: one global store shared by every player plus one local
store per player, with routing by :class:`Scope`."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterator, NewType

from .errors import DuplicatePlayer, UnknownPlayer

PlayerId = NewType("PlayerId", int)


@dataclass(frozen=True, order=True)
class Scope:
    """Ownership tag. ``owner is None`` means global."""

    owner: PlayerId | None = None

    @property
    def is_global(self) -> bool:
        return self.owner is None

    def __repr__(self) -> str:
        return "Global" if self.owner is None else f"Local({self.owner})"


GLOBAL = Scope()


def Local(player: int) -> Scope:  # noqa: N802 - reads like the variant it builds
    return Scope(PlayerId(int(player)))


class _Store:
    def __init__(self, scope: Scope):
        self.scope = scope
        self.entities: set = set()
        self.events: deque = deque()
        self.bytes = 0
        self._next_ordinal = 0

    def next_ordinal(self) -> int:
        ordinal = self._next_ordinal
        self._next_ordinal += 1
        return ordinal

    def __len__(self) -> int:
        return len(self.entities)


_OWNER_TOKEN = object()


class GlobalStorage(_Store):
    """The single shared store. Only :class:`CapsuleStorage` may build one."""

    def __init__(self, _token=None):
        if _token is not _OWNER_TOKEN:
            raise TypeError("GlobalStorage is owned by CapsuleStorage and cannot be constructed directly")
        super().__init__(GLOBAL)


class LocalStorage(_Store):
    def __init__(self, owner: PlayerId, overhead: int = 0):
        super().__init__(Local(owner))
        self.owner = owner
        self.overhead = overhead
        self.bytes = overhead


@dataclass(frozen=True)
class ReclaimReport:
    player: PlayerId
    entities: int
    ram_bytes: int
    vram_bytes: int
    events_dropped: int = 0


class CapsuleStorage:
    def __init__(self, local_overhead: int = 0):
        self.local_overhead = local_overhead
        self._global = GlobalStorage(_OWNER_TOKEN)
        self.locals: dict[PlayerId, LocalStorage] = {}

    @property
    def global_store(self) -> GlobalStorage:
        return self._global

    def create_local(self, player: PlayerId) -> LocalStorage:
        if player in self.locals:
            raise DuplicatePlayer(player)
        store = LocalStorage(player, self.local_overhead)
        self.locals[player] = store
        return store

    def local(self, player) -> LocalStorage:
        try:
            return self.locals[player]
        except KeyError:
            raise UnknownPlayer(player) from None

    def drop_local(self, player) -> LocalStorage:
        """Unregister an (already emptied) local store. World.destroy_local does the despawns."""
        store = self.local(player)
        del self.locals[player]
        return store

    def route_entity(self, scope: Scope) -> _Store:
        if scope.is_global:
            return self._global
        return self.local(scope.owner)

    route_event = route_entity

    def visible_set(self, player) -> list:
        store = self.local(player)
        return sorted(self._global.entities | store.entities)

    def players(self) -> list[PlayerId]:
        return sorted(self.locals)

    def stores(self) -> Iterator[_Store]:
        yield self._global
        for p in sorted(self.locals):
            yield self.locals[p]

    @property
    def ram_bytes(self) -> int:
        return sum(s.bytes for s in self.stores())

    def entity_count(self) -> int:
        return sum(len(s) for s in self.stores())
