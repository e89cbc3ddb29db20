"""Abstract GPU: a deduplicated asset cache standing in for VRAM, plus per-tick
frame work split into shared and per-view parts, with frame digests."""

from __future__ import annotations

import struct
from collections import Counter
from dataclasses import dataclass
from typing import TYPE_CHECKING, Hashable

from . import _kernels
from .errors import NotHeld, SizeMismatch

if TYPE_CHECKING:
    from .ecs import World
    from .storage import PlayerId


@dataclass(frozen=True)
class AssetHandle:
    asset_id: str
    holder: Hashable


class AssetCache:
    """Refcounted content-addressed store.

    ``total_vram`` counts each distinct held asset once, plus one framebuffer
    per attached view.
    """

    def __init__(self, framebuffer: int = 0):
        self.framebuffer = framebuffer
        self._size: dict[str, int] = {}
        self._refs: dict[str, Counter] = {}
        self.asset_bytes = 0
        self.views = 0

    @property
    def total_vram(self) -> int:
        return self.asset_bytes + self.framebuffer * self.views

    def attach_view(self) -> None:
        self.views += 1

    def detach_view(self) -> None:
        if self.views == 0:
            raise ValueError("no view attached")
        self.views -= 1

    def check(self, asset_id: str, size: int) -> None:
        if size <= 0:
            raise ValueError(f"asset {asset_id!r} size must be > 0")
        known = self._size.get(asset_id)
        if known is not None and known != size:
            raise SizeMismatch(f"asset {asset_id!r} is cached with size {known}, not {size}")

    def load_asset(self, asset_id: str, size: int, holder: Hashable) -> AssetHandle:
        self.check(asset_id, size)
        refs = self._refs.get(asset_id)
        if refs is None:
            self._size[asset_id] = size
            self._refs[asset_id] = refs = Counter()
            self.asset_bytes += size
        refs[holder] += 1
        return AssetHandle(asset_id, holder)

    def release_asset(self, asset_id: str, holder: Hashable) -> None:
        refs = self._refs.get(asset_id)
        if refs is None or refs[holder] <= 0:
            raise NotHeld(f"{holder!r} holds no handle on {asset_id!r}")
        refs[holder] -= 1
        if refs[holder] == 0:
            del refs[holder]
        if not refs:
            del self._refs[asset_id]
            self.asset_bytes -= self._size.pop(asset_id)

    def refcount(self, asset_id: str) -> int:
        refs = self._refs.get(asset_id)
        return sum(refs.values()) if refs else 0

    def size_of(self, asset_id: str) -> int | None:
        return self._size.get(asset_id)

    def __contains__(self, asset_id: str) -> bool:
        return asset_id in self._refs

    def __len__(self) -> int:
        return len(self._refs)


@dataclass(frozen=True)
class FrameWork:
    shared_units: int
    per_view_units: int

    @property
    def total(self) -> int:
        return self.shared_units + self.per_view_units


@dataclass(frozen=True)
class FrameDigest:
    player: "PlayerId"
    tick: int
    hash: int


_ENTITY = struct.Struct(">BQH")
_KIND = struct.Struct(">H")
_LEN = struct.Struct(">I")
_TICK = struct.Struct(">Q")


def encode_store(world: "World", store) -> bytes:
    """Canonical bytes of one store: entities by per-store ordinal, components by kind.

    Ordinals are assigned per store, so a player's local encoding does not
    depend on how many other players share the engine.
    """
    tag = 0 if store.scope.is_global else 1
    records = sorted((world.record(eid) for eid in store.entities), key=lambda r: r.ordinal)
    parts = []
    for rec in records:
        parts.append(_ENTITY.pack(tag, rec.ordinal, len(rec.components)))
        for kind in sorted(rec.components):
            raw = kind.encode()
            payload = rec.components[kind]
            parts.append(_KIND.pack(len(raw)))
            parts.append(raw)
            parts.append(_LEN.pack(len(payload)))
            parts.append(bytes(payload))
    return b"".join(parts)


def frame_hash(global_state: int, local_bytes: bytes, tick: int) -> int:
    h = _kernels.fnv1a64(local_bytes, global_state) if local_bytes else global_state
    return _kernels.fnv1a64(_TICK.pack(tick), h)


def render_tick(world: "World", players) -> list[tuple[FrameDigest, FrameWork]]:
    """Digest every player's view and account GPU work for this tick.

    The global contribution (encoding and hash prefix) and the shared GPU
    work are computed once and reused for every view.
    """
    players = sorted(players)
    if not players:
        return []
    cm = world.cost_model
    tick = world.tick_counter
    global_state = _kernels.fnv1a64(encode_store(world, world.storage.global_store))
    out = []
    for i, player in enumerate(players):
        local = encode_store(world, world.storage.local(player))
        digest = FrameDigest(player, tick, frame_hash(global_state, local, tick))
        work = FrameWork(cm.shared_gpu if i == 0 else 0, cm.per_view_gpu)
        out.append((digest, work))
    return out
