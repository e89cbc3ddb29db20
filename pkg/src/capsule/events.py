"""Scoped gameplay events, the second layer of capsule storage."""

from __future__ import annotations

import threading
from dataclasses import dataclass

from .storage import CapsuleStorage, PlayerId, Scope


@dataclass(frozen=True)
class GameplayEvent:
    seq: int
    name: str
    scope: Scope
    payload: bytes
    tick_issued: int
    origin: PlayerId | None = None  # None: emitted by the environment


class EventBus:
    """Engine-wide event routing.

    One ``seq`` counter orders events across all scopes. Local events sit in
    their owner's queue until drained. Global events sit in the global queue
    until every player that was active when they were issued has drained
    them; players joining later never see them.
    """

    def __init__(self, storage: CapsuleStorage):
        self.storage = storage
        self._seq = 0
        self._cursor: dict[PlayerId, int] = {}
        self._lock = threading.Lock()

    @property
    def last_seq(self) -> int:
        return self._seq

    def register_player(self, player: PlayerId) -> None:
        self._cursor[player] = self._seq

    def unregister_player(self, player: PlayerId) -> int:
        """Forget ``player``; returns the number of local events discarded."""
        self._cursor.pop(player, None)
        store = self.storage.locals.get(player)
        dropped = 0
        if store is not None:
            dropped = len(store.events)
            store.bytes -= sum(len(e.payload) for e in store.events)
            store.events.clear()
        self._collect_global()
        return dropped

    def emit(
        self,
        scope: Scope,
        name: str,
        payload: bytes = b"",
        tick: int = 0,
        origin: PlayerId | None = None,
    ) -> GameplayEvent:
        payload = bytes(payload)
        with self._lock:
            store = self.storage.route_event(scope)
            self._seq += 1
            event = GameplayEvent(self._seq, name, scope, payload, tick, origin)
            if scope.is_global and not self._cursor:
                return event  # nobody active to deliver to
            store.events.append(event)
            store.bytes += len(payload)
            return event

    def drain_for(self, player: PlayerId, up_to_tick: int | None = None) -> list[GameplayEvent]:
        """Global events not yet seen by ``player`` merged with its local events, by seq.

        Delivery stops at the first event issued after ``up_to_tick`` so a
        later drain picks up exactly where this one ended.
        """
        with self._lock:
            local = self.storage.local(player)
            cursor = self._cursor[player]
            out = []
            for e in self.storage.global_store.events:
                if e.seq <= cursor:
                    continue
                if up_to_tick is not None and e.tick_issued > up_to_tick:
                    break
                out.append(e)
            if out:
                self._cursor[player] = out[-1].seq
            taken = 0
            while local.events and (up_to_tick is None or local.events[0].tick_issued <= up_to_tick):
                event = local.events.popleft()
                local.bytes -= len(event.payload)
                out.append(event)
                taken += 1
            if taken and len(out) > taken:
                out.sort(key=lambda e: e.seq)
            self._collect_global()
            return out

    def _collect_global(self) -> None:
        queue = self.storage.global_store.events
        floor = min(self._cursor.values()) if self._cursor else None
        while queue and (floor is None or queue[0].seq <= floor):
            self.storage.global_store.bytes -= len(queue.popleft().payload)

    def pending(self, player: PlayerId) -> int:
        cursor = self._cursor[player]
        return sum(1 for e in self.storage.global_store.events if e.seq > cursor) + len(
            self.storage.local(player).events
        )
