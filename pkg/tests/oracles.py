"""Brute-force reference models the engine is checked against."""

from __future__ import annotations

from collections import Counter

from capsule.storage import GLOBAL, Local


class BroadcastOracle:
    """Every event goes to every player ever seen; each player filters by scope and join time."""

    def __init__(self):
        self.log = []  # (seq, scope, name, payload)
        self.joined_at = {}  # player -> last seq before join
        self.delivered = {}  # player -> set of seqs
        self.active = set()
        self.entities = {}  # eid -> scope

    def join(self, player, seq_now):
        self.joined_at[player] = seq_now
        self.delivered[player] = set()
        self.active.add(player)

    def leave(self, player):
        self.active.discard(player)
        for eid, scope in list(self.entities.items()):
            if scope == Local(player):
                del self.entities[eid]

    def emit(self, event):
        self.log.append(event)

    def expected_drain(self, player):
        cut = self.joined_at[player]
        out = []
        for e in self.log:
            if e.seq <= cut or e.seq in self.delivered[player]:
                continue
            if e.scope == GLOBAL or e.scope == Local(player):
                out.append(e.seq)
        return out

    def mark(self, player, seqs):
        self.delivered[player].update(seqs)

    def expected_visible(self, player):
        return sorted(eid for eid, scope in self.entities.items() if scope in (GLOBAL, Local(player)))


class DedupOracle:
    """VRAM = sizes of distinct held asset ids + one framebuffer per view."""

    def __init__(self, framebuffer):
        self.framebuffer = framebuffer
        self.holds = Counter()  # (asset, holder) -> count
        self.sizes = {}
        self.views = 0

    def load(self, asset, size, holder):
        self.sizes[asset] = size
        self.holds[(asset, holder)] += 1

    def release(self, asset, holder):
        self.holds[(asset, holder)] -= 1
        if self.holds[(asset, holder)] == 0:
            del self.holds[(asset, holder)]

    def total(self):
        held = {a for (a, _), c in self.holds.items() if c > 0}
        return sum(self.sizes[a] for a in held) + self.framebuffer * self.views
