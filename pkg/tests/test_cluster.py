import asyncio

import pytest

from meshwire.client import SignalingClient, SignalingError, fetch_healthz
from meshwire.cluster import Dispatcher, spawn_cluster
from meshwire.protocol import (
    msg_blob,
    msg_create_room,
    msg_hang_up,
    msg_join_room,
)
from support import run_async


def test_spawn_rejects_empty_cluster():
    async def scenario():
        with pytest.raises(ValueError):
            await spawn_cluster(0)

    run_async(scenario())


def test_dispatcher_round_robins():
    async def scenario():
        cluster = await spawn_cluster(2, seed=60)
        try:
            # consecutive connections land on i0, i1, i0
            owners = []
            for _ in range(3):
                c = SignalingClient(cluster.ws_url)
                await c.connect()
                await c.send(msg_create_room())
                await c.recv_type("room_created")
                owners.append(c)
            a, b = cluster.instances
            assert len(a.rooms) == 2
            assert len(b.rooms) == 1
            assert cluster.live_rooms() == cluster.store.count() == 3
            for c in owners:
                await c.close()
        finally:
            await cluster.stop()

    run_async(scenario())


def test_cross_instance_join_is_proxied():
    async def scenario():
        cluster = await spawn_cluster(2, seed=61)
        try:
            owner = await SignalingClient(cluster.ws_url).connect()  # lands on i0
            await owner.send(msg_create_room())
            room = (await owner.recv_type("room_created"))["room"]

            guest = await SignalingClient(cluster.ws_url).connect()  # lands on i1
            await guest.send(msg_join_room(room))
            assert (await guest.recv_type("peer_joined"))["room"] == room
            assert (await owner.recv_type("peer_joined"))["room"] == room

            # the room lives on i0 only; i1 carries a proxy
            assert len(cluster.instances[0].rooms) == 1
            assert len(cluster.instances[1].rooms) == 0
            assert cluster.instances[1].proxies_out == 1
            assert cluster.instances[0].proxies_in == 1
            assert cluster.proxies_opened() == 1

            # relays traverse the proxy in both directions, verbatim
            offer = msg_blob("offer", b"from-owner")
            await owner.send(offer)
            assert await guest.recv_type("offer") == offer
            answer = msg_blob("answer", b"from-guest")
            await guest.send(answer)
            assert await owner.recv_type("answer") == answer

            await owner.close()
            await guest.close()
        finally:
            await cluster.stop()

    run_async(scenario())


def test_proxied_guest_hang_up_tears_down():
    async def scenario():
        cluster = await spawn_cluster(2, seed=62)
        try:
            owner = await SignalingClient(cluster.ws_url).connect()
            await owner.send(msg_create_room())
            room = (await owner.recv_type("room_created"))["room"]
            guest = await SignalingClient(cluster.ws_url).connect()
            await guest.send(msg_join_room(room))
            await guest.recv_type("peer_joined")
            await owner.recv_type("peer_joined")

            await guest.send(msg_hang_up())
            with pytest.raises(SignalingError) as err:
                await owner.recv_type("never")
            assert err.value.code == 5
            await asyncio.sleep(0.1)
            assert cluster.live_rooms() == 0
            assert cluster.store.count() == 0
            await owner.close()
            await guest.close()
        finally:
            await cluster.stop()

    run_async(scenario())


def test_proxied_owner_hang_up_reaches_guest():
    async def scenario():
        cluster = await spawn_cluster(2, seed=63)
        try:
            owner = await SignalingClient(cluster.ws_url).connect()
            await owner.send(msg_create_room())
            room = (await owner.recv_type("room_created"))["room"]
            guest = await SignalingClient(cluster.ws_url).connect()
            await guest.send(msg_join_room(room))
            await guest.recv_type("peer_joined")
            await owner.recv_type("peer_joined")

            await owner.send(msg_hang_up())
            with pytest.raises(SignalingError) as err:
                await guest.recv_type("never")
            assert err.value.code == 5
            await owner.close()
            await guest.close()
        finally:
            await cluster.stop()

    run_async(scenario())


def test_join_skips_dead_instance():
    async def scenario():
        cluster = await spawn_cluster(2, seed=64)
        try:
            owner = await SignalingClient(cluster.ws_url).connect()  # i0
            await owner.send(msg_create_room())
            room = (await owner.recv_type("room_created"))["room"]

            await cluster.kill_instance(1)
            # the dispatcher's next pick is the dead i1; it must skip it
            guest = await SignalingClient(cluster.ws_url).connect()
            await guest.send(msg_join_room(room))
            assert (await guest.recv_type("peer_joined"))["room"] == room
            assert (await owner.recv_type("peer_joined"))["room"] == room
            await owner.close()
            await guest.close()
        finally:
            await cluster.stop()

    run_async(scenario())


def test_join_after_owner_instance_shutdown():
    async def scenario():
        cluster = await spawn_cluster(2, seed=65)
        try:
            owner = await SignalingClient(cluster.ws_url).connect()  # i0
            await owner.send(msg_create_room())
            room = (await owner.recv_type("room_created"))["room"]

            # graceful stop drops the owner connection, which cleans the
            # directory entry: the room is simply gone afterwards
            await cluster.kill_instance(0)
            guest = await SignalingClient(cluster.ws_url).connect()  # i1
            await guest.send(msg_join_room(room))
            with pytest.raises(SignalingError) as err:
                await guest.recv_type("peer_joined")
            assert err.value.code == 1
            await owner.close()
            await guest.close()
        finally:
            await cluster.stop()

    run_async(scenario())


def test_stale_record_for_unreachable_instance():
    async def scenario():
        from meshwire.directory import fresh_record, register_room

        cluster = await spawn_cluster(1, seed=69)
        try:
            # a crashed instance leaves its record behind; the proxy dial
            # fails and the guest learns the peer is gone
            register_room(cluster.store, fresh_record("31337", "127.0.0.1:1", "owner_waiting"))
            guest = await SignalingClient(cluster.ws_url).connect()
            await guest.send(msg_join_room("31337"))
            with pytest.raises(SignalingError) as err:
                await guest.recv_type("peer_joined")
            assert err.value.code == 5
            await guest.close()
        finally:
            await cluster.stop()

    run_async(scenario())


def test_file_store_cluster(tmp_path):
    async def scenario():
        cluster = await spawn_cluster(2, store_kind="file", store_path=tmp_path / "dir", seed=66)
        try:
            owner = await SignalingClient(cluster.ws_url).connect()
            await owner.send(msg_create_room())
            room = (await owner.recv_type("room_created"))["room"]
            assert (tmp_path / "dir" / f"{room}.json").exists()

            guest = await SignalingClient(cluster.ws_url).connect()
            await guest.send(msg_join_room(room))
            await guest.recv_type("peer_joined")
            await owner.recv_type("peer_joined")
            assert cluster.proxies_opened() == 1
            await owner.close()
            await guest.close()
        finally:
            await cluster.stop()

    run_async(scenario())


def test_healthz_through_each_instance():
    async def scenario():
        cluster = await spawn_cluster(3, seed=67)
        try:
            docs = []
            for inst in cluster.instances:
                docs.append(await fetch_healthz(f"http://{inst.host}:{inst.port}/healthz"))
            assert [d["instance"] for d in docs] == ["i0", "i1", "i2"]
            assert all(d["rooms"] == 0 for d in docs)
        finally:
            await cluster.stop()

    run_async(scenario())


def test_dispatcher_with_no_live_backend():
    async def scenario():
        dispatcher = await Dispatcher([("127.0.0.1", 1)]).start()
        try:
            reader, writer = await asyncio.open_connection("127.0.0.1", dispatcher.port)
            # the dispatcher closes the client when every backend is dead
            assert await reader.read(1) == b""
            writer.close()
        finally:
            await dispatcher.stop()

    run_async(scenario())


def test_seeded_clusters_are_reproducible():
    async def scenario():
        rooms = []
        for _ in range(2):
            cluster = await spawn_cluster(2, seed=68)
            try:
                owner = await SignalingClient(cluster.ws_url).connect()
                await owner.send(msg_create_room())
                rooms.append((await owner.recv_type("room_created"))["room"])
                await owner.close()
            finally:
                await cluster.stop()
        assert rooms[0] == rooms[1]

    run_async(scenario())
