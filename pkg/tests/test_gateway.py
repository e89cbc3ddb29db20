import asyncio
from pathlib import Path

import pytest

from capsule import wire
from capsule.costmodel import CostModel
from capsule.ecs import InputEvent, World
from capsule.errors import BindFailure, NotJoined, ProtocolError
from capsule.gateway import Bot, Gateway, GatewayConfig
from capsule.scenario import load
from capsule.session import Engine, PlayerProfile
from capsule.wire import MsgType, RejectReason

LOBBY = load(Path(__file__).resolve().parent.parent / "scenarios" / "lobby.scn")


async def until(cond, timeout=5.0):
    loop = asyncio.get_running_loop()
    end = loop.time() + timeout
    while not cond():
        if loop.time() > end:
            raise TimeoutError
        await asyncio.sleep(0.002)


async def started(scenario=LOBBY, **config):
    gw = Gateway.from_scenario(scenario, GatewayConfig(**config))
    await gw.start()
    return gw


async def joined_bots(gw, n):
    bots = [Bot(f"b{i}") for i in range(n)]
    for b in bots:
        await b.connect(*gw.address)
    joins = [asyncio.create_task(b.join()) for b in bots]
    await until(lambda: len(gw._control) == n)
    await gw.tick_once()
    await asyncio.gather(*joins)
    return bots


def run(coro):
    return asyncio.run(coro)


def test_join_ack_on_empty_engine():
    async def main():
        gw = await started()
        (bot,) = await joined_bots(gw, 1)
        assert bot.player == gw.engine.active_players[0]
        await bot.close()
        await gw.close()

    run(main())


def test_join_past_capacity_rejected_with_cost():
    async def main():
        tight = LOBBY.replace(cost_model=LOBBY.cost_model.replace(gpu_capacity=70_000))  # 2 players fit
        gw = await started(tight)
        bots = await joined_bots(gw, 3)
        assert [b.player is not None for b in bots] == [True, True, False]
        reason, predicted, budget = bots[2].reject
        assert reason == RejectReason.CAPACITY and predicted > budget == tight.budget_ms
        for b in bots:
            await b.close()
        await gw.close()

    run(main())


def test_frames_carry_own_digest_only():
    async def main():
        gw = await started()
        bots = await joined_bots(gw, 3)
        for b in bots:
            asyncio.ensure_future(b.play(max_inputs=0))
        report = await gw.tick_once()
        await until(lambda: all(len(b.frames) == 2 for b in bots))
        for b in bots:
            tick, digest, ms = b.frames[-1]
            assert (tick, digest) == (report.tick, report.digests[b.player].hash)
            assert ms == report.sample.tick_model_ms
        assert gw.stats.frames_sent == 6
        for b in bots:
            await b.close()
        await gw.close()

    run(main())


def test_wire_isolation_by_taint():
    taint = b"\xde\xad\xbe\xef-TAINT-p1-" * 3

    async def session(send_taint):
        gw = await started()
        bots = await joined_bots(gw, 2)
        readers = [asyncio.ensure_future(b.play(max_inputs=0)) for b in bots]
        p1_digests = []
        for t in range(5):
            if send_taint:
                await bots[0].send_input("secret", taint)
                await until(lambda: gw.stats.inputs_applied + len(gw.connections[0].inputs) > t)
            report = await gw.tick_once()
            p1_digests.append(report.digests[bots[0].player].hash)
        await until(lambda: len(bots[1].frames) == 6)
        for b in bots:
            await b.close()
        await gw.close()
        await asyncio.gather(*readers)
        return bots, p1_digests

    async def main():
        (p1, p2), p1_digests = await session(True)
        (q1, q2), _ = await session(False)
        assert taint not in p2.received
        for d in p1_digests:
            assert d.to_bytes(8, "big") not in p2.received
        assert p2.frames == q2.frames  # p1's inputs leave p2's stream untouched
        assert p1.frames != q1.frames  # the taint did reach p1's own state

    run(main())


def test_input_applies_at_next_tick():
    async def main():
        gw = await started()
        (bot,) = await joined_bots(gw, 1)
        reference = Engine(World(LOBBY.seed, LOBBY.budget_ms, LOBBY.full_cost_model()), LOBBY.scene())
        p = reference.join(LOBBY.player_profile(0)).player
        reference.step()  # the tick that applied the join

        await bot.send_input("jump", b"1")
        await until(lambda: len(gw.connections[0].inputs) == 1)
        got = await gw.tick_once()
        want = reference.step({p: [InputEvent("jump", b"1")]})
        assert got.digests[bot.player].hash == want.digests[p].hash
        await bot.close()
        await gw.close()

    run(main())


def test_disconnect_is_leave_at_next_boundary():
    async def main():
        gw = await started()
        a, b = await joined_bots(gw, 2)
        await a.close()
        await until(lambda: any(kind == "disconnect" for _, kind in gw._control))
        assert len(gw.engine.active_players) == 2
        await gw.tick_once()
        assert gw.engine.active_players == [b.player]
        await b.close()
        await gw.close()

    run(main())


def test_explicit_leave_closes_connection():
    async def main():
        gw = await started()
        (bot,) = await joined_bots(gw, 1)
        reader = asyncio.ensure_future(bot.play(max_inputs=0))
        await bot.leave()
        await until(lambda: len(gw._control) == 1)
        await gw.tick_once()
        await asyncio.wait_for(reader, 5)  # server closed the stream
        assert gw.engine.active_players == []
        await gw.close()

    run(main())


@pytest.mark.parametrize(
    "raw, reason",
    [
        (b"\x01\x04\xff\xff\xff\xff", RejectReason.PROTOCOL),  # malformed length
        (b"\x01\x63\x00\x00\x00\x00", RejectReason.PROTOCOL),  # unknown type
        (wire.encode(MsgType.FRAME), RejectReason.PROTOCOL),  # server-only type
        (wire.input_msg(1, "jump"), RejectReason.NOT_JOINED),
    ],
)
def test_errors_answer_then_close(raw, reason):
    async def main():
        gw = await started()
        bot = Bot()
        await bot.connect(*gw.address)
        await bot.send_raw(raw)
        await asyncio.wait_for(bot.play(max_inputs=0), 5)
        assert bot.reject[0] == reason
        await gw.close()

    run(main())


def test_out_of_order_client_sequence():
    async def main():
        gw = await started()
        (bot,) = await joined_bots(gw, 1)
        await bot.send_raw(wire.input_msg(5, "a"))
        await bot.send_raw(wire.input_msg(5, "b"))
        await asyncio.wait_for(bot.play(max_inputs=0), 5)
        assert bot.reject[0] == RejectReason.PROTOCOL
        await gw.close()

    run(main())


def test_queue_overflow_closes_connection():
    async def main():
        gw = await started(input_queue_depth=4)
        (bot,) = await joined_bots(gw, 1)
        for _ in range(5):
            await bot.send_input("spam")
        await asyncio.wait_for(bot.play(max_inputs=0), 5)
        assert bot.reject[0] == RejectReason.QUEUE_OVERFLOW
        await gw.close()

    run(main())


def test_max_connections():
    async def main():
        gw = await started(max_connections=1)
        (first,) = await joined_bots(gw, 1)
        extra = Bot()
        await extra.connect(*gw.address)
        await asyncio.wait_for(extra.play(max_inputs=0), 5)
        assert extra.reject[0] == RejectReason.MAX_CONNECTIONS
        await first.close()
        await gw.close()

    run(main())


def test_bind_failure():
    async def main():
        gw = await started()
        host, port = gw.address
        other = Gateway.from_scenario(LOBBY, GatewayConfig(host=host, port=port))
        with pytest.raises(BindFailure):
            await other.start()
        await gw.close()

    run(main())


def test_terminate_notifies_everyone_then_inputs_fail():
    async def main():
        gw = await started()
        bots = await joined_bots(gw, 3)
        readers = [asyncio.ensure_future(b.play(max_inputs=0)) for b in bots]
        conn = gw.connections[0]
        ended = await gw.terminate("gpu fault")
        await asyncio.wait_for(asyncio.gather(*readers), 5)
        assert len(ended) == 3 and gw.engine.active_players == []
        assert [b.engine_down for b in bots] == ["gpu fault"] * 3
        with pytest.raises(NotJoined):
            gw.on_input(conn, InputEvent("jump", b"", 99))
        await gw.close()

    run(main())


def test_on_input_sequence_rule():
    eng = Engine(World(cost_model=CostModel()))
    gw = Gateway(eng, lambda slot: PlayerProfile())
    from capsule.gateway import Connection

    conn = Connection(0)
    with pytest.raises(NotJoined):
        gw.on_input(conn, InputEvent("x", b"", 1))
    conn.player = eng.join().player
    gw.on_input(conn, InputEvent("x", b"", 1))
    with pytest.raises(ProtocolError):
        gw.on_input(conn, InputEvent("x", b"", 1))
