"""TCP front-end: bot clients join, send inputs and receive frame notifications.

Connection handlers only parse and enqueue. Joins, leaves and inputs are
applied by the tick loop at the next tick boundary, so the engine is only
ever touched from one place.
"""

from __future__ import annotations

import asyncio
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

from . import wire
from .ecs import InputEvent, TickReport, World
from .errors import BindFailure, CapacityExceeded, EngineDown, NotJoined, ProtocolError
from .session import Engine, PlayerProfile, Session
from .wire import MsgType, RejectReason

log = logging.getLogger(__name__)

_CLOSE = None
_DISCONNECT = "disconnect"


@dataclass(frozen=True)
class GatewayConfig:
    host: str = "127.0.0.1"
    port: int = 0
    max_connections: int = 64
    input_queue_depth: int = 1024


class QueueOverflow(ProtocolError):
    pass


class Connection:
    def __init__(self, cid: int, writer: asyncio.StreamWriter | None = None):
        self.id = cid
        self.writer = writer
        self.player: int | None = None
        self.last_seq: int | None = None
        self.inputs: list[InputEvent] = []
        self.outbound: asyncio.Queue = asyncio.Queue()
        self.closed = False
        self.writer_task: asyncio.Task | None = None

    def send(self, data: bytes) -> None:
        if not self.closed:
            self.outbound.put_nowait(data)

    def close(self) -> None:
        if not self.closed:
            self.closed = True
            self.outbound.put_nowait(_CLOSE)


@dataclass
class GatewayStats:
    ticks: int = 0
    frames_sent: int = 0
    inputs_applied: int = 0
    joins: int = 0
    rejects: int = 0
    leaves: int = 0
    engine_down_sent: int = 0


class Gateway:
    def __init__(
        self,
        engine: Engine,
        profiles: Callable[[int], PlayerProfile] = lambda slot: PlayerProfile(),
        config: GatewayConfig = GatewayConfig(),
    ):
        self.engine = engine
        self.profiles = profiles
        self.config = config
        self.connections: dict[int, Connection] = {}
        self.stats = GatewayStats()
        self._control: deque = deque()
        self._server: asyncio.AbstractServer | None = None
        self._next_conn = 0
        self._next_slot = 0

    @classmethod
    def from_scenario(cls, scenario, config: GatewayConfig = GatewayConfig()) -> "Gateway":
        world = World(scenario.seed, scenario.budget_ms, scenario.full_cost_model())
        return cls(Engine(world, scenario.scene()), scenario.player_profile, config)

    # -- lifecycle ----------------------------------------------------------

    async def start(self) -> tuple[str, int]:
        try:
            self._server = await asyncio.start_server(self._handle, self.config.host, self.config.port)
        except OSError as exc:
            raise BindFailure(f"cannot listen on {self.config.host}:{self.config.port}: {exc}") from exc
        return self.address

    @property
    def address(self) -> tuple[str, int]:
        if self._server is None:
            raise RuntimeError("gateway not started")
        return self._server.sockets[0].getsockname()[:2]

    async def close(self) -> None:
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()
        for conn in list(self.connections.values()):
            conn.close()
        await self._flush_writers()

    async def _flush_writers(self) -> None:
        tasks = [c.writer_task for c in self.connections.values() if c.writer_task is not None]
        if tasks:
            await asyncio.gather(*tasks, return_exceptions=True)

    # -- connection handling ------------------------------------------------

    async def _handle(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        conn = Connection(self._next_conn, writer)
        self._next_conn += 1
        conn.writer_task = asyncio.create_task(self._writer(conn))
        live = sum(1 for c in self.connections.values() if not c.closed)
        self.connections[conn.id] = conn
        if live >= self.config.max_connections:
            conn.send(wire.reject(RejectReason.MAX_CONNECTIONS))
            conn.close()
            return
        try:
            while not conn.closed:
                msg = await wire.read_message(reader)
                if msg.type == MsgType.JOIN:
                    self._control.append((conn, MsgType.JOIN))
                elif msg.type == MsgType.INPUT:
                    seq, name, payload = wire.parse_input(msg.payload)
                    self.on_input(conn, InputEvent(name, payload, seq))
                elif msg.type == MsgType.LEAVE:
                    self._control.append((conn, MsgType.LEAVE))
                else:
                    raise ProtocolError(f"clients may not send {msg.type.name}")
        except (asyncio.IncompleteReadError, ConnectionError):
            pass
        except NotJoined as exc:
            log.info("connection %s: %s", conn.id, exc)
            conn.send(wire.reject(RejectReason.NOT_JOINED))
        except QueueOverflow as exc:
            log.info("connection %s: %s", conn.id, exc)
            conn.send(wire.reject(RejectReason.QUEUE_OVERFLOW))
        except ProtocolError as exc:
            log.info("connection %s: protocol error: %s", conn.id, exc)
            conn.send(wire.reject(RejectReason.PROTOCOL))
        finally:
            conn.close()
            self._control.append((conn, _DISCONNECT))

    async def _writer(self, conn: Connection) -> None:
        writer = conn.writer
        try:
            while True:
                item = await conn.outbound.get()
                if item is _CLOSE:
                    break
                writer.write(item)
                await writer.drain()
        except (ConnectionError, OSError):
            conn.closed = True
            self._control.append((conn, _DISCONNECT))
        finally:
            try:
                writer.close()
                await writer.wait_closed()
            except (ConnectionError, OSError):
                pass

    def on_input(self, conn: Connection, event: InputEvent) -> None:
        if conn.player is None or not self.engine.running:
            raise NotJoined(f"connection {conn.id} has no active session")
        if conn.last_seq is not None and event.client_seq <= conn.last_seq:
            raise ProtocolError(f"client sequence {event.client_seq} after {conn.last_seq}")
        if len(conn.inputs) >= self.config.input_queue_depth:
            raise QueueOverflow(f"input queue depth {self.config.input_queue_depth} exceeded")
        conn.last_seq = event.client_seq
        conn.inputs.append(event)

    # -- tick boundary ------------------------------------------------------

    def _apply_control(self) -> None:
        while self._control:
            conn, kind = self._control.popleft()
            if kind == MsgType.JOIN:
                self._apply_join(conn)
            elif conn.player is not None:
                player, conn.player = conn.player, None
                conn.inputs.clear()
                if self.engine.running and player in self.engine.active_players:
                    self.engine.leave(player)
                    self.stats.leaves += 1
                if kind == MsgType.LEAVE:
                    conn.close()

    def _apply_join(self, conn: Connection) -> None:
        if conn.closed:
            return
        if conn.player is not None:
            conn.send(wire.reject(RejectReason.PROTOCOL))
            return
        slot = self._next_slot
        try:
            session = self.engine.join(self.profiles(slot))
        except CapacityExceeded as exc:
            self.stats.rejects += 1
            conn.send(wire.reject(RejectReason.CAPACITY, exc.predicted_ms, exc.budget_ms))
            return
        except EngineDown:
            conn.send(wire.reject(RejectReason.ENGINE_DOWN))
            return
        self._next_slot += 1
        conn.player = session.player
        self.stats.joins += 1
        conn.send(wire.join_ack(session.player))

    async def tick_once(self) -> TickReport:
        self._apply_control()
        inputs = {}
        for conn in self.connections.values():
            if conn.player is not None and conn.inputs:
                inputs[conn.player] = conn.inputs
                self.stats.inputs_applied += len(conn.inputs)
                conn.inputs = []
        report = self.engine.step(inputs)
        self.stats.ticks += 1
        self.broadcast_frames(report)
        await asyncio.sleep(0)
        return report

    def broadcast_frames(self, report: TickReport) -> None:
        ms = report.sample.tick_model_ms
        for conn in self.connections.values():
            digest = report.digests.get(conn.player) if conn.player is not None else None
            if digest is not None and not conn.closed:
                conn.send(wire.frame(report.tick, digest.hash, ms))
                self.stats.frames_sent += 1

    async def run(self, ticks: int, interval: float = 0.0) -> None:
        loop = asyncio.get_running_loop()
        for _ in range(ticks):
            started = loop.time()
            await self.tick_once()
            if interval > 0:
                await asyncio.sleep(max(0.0, interval - (loop.time() - started)))

    async def terminate(self, reason: str = "engine failure") -> list[Session]:
        """End every session and tell every connection before closing it."""
        ended = self.engine.terminate_engine(reason)
        for conn in self.connections.values():
            conn.player = None
            conn.inputs.clear()
            if not conn.closed:
                conn.send(wire.engine_down(reason))
                self.stats.engine_down_sent += 1
                conn.close()
        await self._flush_writers()
        return ended


# --------------------------------------------------------------------------
# bot client
# --------------------------------------------------------------------------


@dataclass
class Bot:
    """Scripted client: joins, answers every frame with one input."""

    name: str = "bot"
    player: int | None = None
    frames: list[tuple[int, int, float]] = field(default_factory=list)
    reject: tuple | None = None
    engine_down: str | None = None
    inputs_sent: int = 0
    received: bytearray = field(default_factory=bytearray)
    _reader: asyncio.StreamReader | None = None
    _writer: asyncio.StreamWriter | None = None
    _seq: int = 0

    async def connect(self, host: str, port: int) -> None:
        self._reader, self._writer = await asyncio.open_connection(host, port)

    async def _read(self) -> wire.Message | None:
        try:
            header = await self._reader.readexactly(wire.HEADER.size)
            msg_type, length = wire.decode_header(header)
            payload = await self._reader.readexactly(length) if length else b""
        except (asyncio.IncompleteReadError, ConnectionError):
            return None
        self.received += header + payload
        return wire.Message(msg_type, payload)

    async def send_raw(self, data: bytes) -> None:
        self._writer.write(data)
        await self._writer.drain()

    async def join(self) -> int | None:
        await self.send_raw(wire.encode(MsgType.JOIN))
        msg = await self._read()
        if msg is None:
            return None
        if msg.type == MsgType.JOIN_ACK:
            self.player = wire.parse_join_ack(msg.payload)
        elif msg.type == MsgType.REJECT:
            self.reject = wire.parse_reject(msg.payload)
        elif msg.type == MsgType.ENGINE_DOWN:
            self.engine_down = msg.payload.decode()
        return self.player

    async def send_input(self, name: str, payload: bytes = b"") -> None:
        self._seq += 1
        await self.send_raw(wire.input_msg(self._seq, name, payload))
        self.inputs_sent += 1

    async def play(self, max_inputs: int | None = None, input_name: str = "move", payload: bytes = b"") -> None:
        """Read until the server closes; send one input per frame while budget lasts."""
        while True:
            msg = await self._read()
            if msg is None:
                return
            if msg.type == MsgType.FRAME:
                self.frames.append(wire.parse_frame(msg.payload))
                if max_inputs is None or self.inputs_sent < max_inputs:
                    try:
                        await self.send_input(input_name, payload)
                    except (ConnectionError, OSError):
                        return
            elif msg.type == MsgType.ENGINE_DOWN:
                self.engine_down = msg.payload.decode()
            elif msg.type == MsgType.REJECT:
                self.reject = wire.parse_reject(msg.payload)

    async def leave(self) -> None:
        await self.send_raw(wire.encode(MsgType.LEAVE))

    async def close(self) -> None:
        if self._writer is not None:
            self._writer.close()
            try:
                await self._writer.wait_closed()
            except (ConnectionError, OSError):
                pass


async def run_bots(
    gateway: Gateway,
    bots: int,
    ticks: int,
    inputs_per_bot: int | None = None,
    flush_ticks: int = 3,
) -> list[Bot]:
    """Connect ``bots`` clients, run ``ticks`` ticks, then let trailing inputs land."""
    host, port = gateway.address
    clients = [Bot(f"bot{i}") for i in range(bots)]
    for bot in clients:
        await bot.connect(host, port)
    joins = [asyncio.create_task(bot.join()) for bot in clients]
    while not all(j.done() for j in joins):
        await gateway.tick_once()
    await asyncio.gather(*joins)
    budget = ticks if inputs_per_bot is None else inputs_per_bot
    players = [asyncio.create_task(bot.play(max_inputs=budget)) for bot in clients]
    await gateway.run(ticks)
    # bots stop sending at their budget; a few more ticks drain in-flight inputs
    for _ in range(flush_ticks):
        await asyncio.sleep(0.01)
        await gateway.tick_once()
    for bot in clients:
        await bot.leave()
    await asyncio.sleep(0.01)
    await gateway.tick_once()  # applies the leaves; the server then closes each stream
    await asyncio.wait_for(asyncio.gather(*players, return_exceptions=True), timeout=30)
    for bot in clients:
        await bot.close()
    return clients
