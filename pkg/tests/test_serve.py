import asyncio
import base64
import hashlib
import json
import math
import os
import struct

import pytest

from abi import serve
from abi.gaitsim import GaitParams, ShiftPlan, gen_walk_trace
from abi.walkline import SelectorConfig, build_lanes, score_trial


class LineClient:
    def __init__(self, reader, writer):
        self.reader = reader
        self.writer = writer

    @classmethod
    async def connect(cls, port):
        reader, writer = await asyncio.open_connection("127.0.0.1", port)
        return cls(reader, writer)

    async def send(self, message: dict):
        self.writer.write(json.dumps(message).encode() + b"\n")
        await self.writer.drain()

    async def recv(self, timeout=5.0) -> dict:
        line = await asyncio.wait_for(self.reader.readline(), timeout)
        assert line, "connection closed unexpectedly"
        return json.loads(line)

    async def request(self, message: dict) -> dict:
        await self.send(message)
        return await self.recv()

    async def close(self):
        self.writer.close()
        try:
            await self.writer.wait_closed()
        except ConnectionError:
            pass


def run(coro):
    return asyncio.run(coro)


async def _playground_port():
    server = await serve.start_playground_server(port=0)
    return server, server.sockets[0].getsockname()[1]


class TestPlaygroundWalkline:
    def test_live_selection_matches_offline_scoring(self):
        async def scenario():
            server, port = await _playground_port()
            try:
                client = await LineClient.connect(port)
                reply = await client.request(
                    {
                        "type": "configure",
                        "technique": "walkline",
                        "params": {"n_lanes": 8, "selection_time": 2 / 3, "target": 2},
                    }
                )
                assert reply["type"] == "state"

                layout = build_lanes(8)
                trace = gen_walk_trace(
                    GaitParams(lateral_noise_sd=0.0, oscillation_amp=0.0),
                    ShiftPlan(
                        target_x=layout.lane_center(2),
                        aim_error_sd=0.0,
                        overshoot_sd=0.0,
                        overshoot_fraction=0.0,
                        hold_drift_rate=0.0,
                    ),
                    6.0,
                    seed=1,
                )
                selected_message = None
                dwell = 0.0
                for sample in trace:
                    await client.send(
                        {"type": "input", "t": sample.t, "x": sample.x, "y": sample.y}
                    )
                    message = await client.recv()
                    assert message["type"] == "state"
                    assert message["dwell_fraction"] >= 0.0
                    dwell = message["dwell_fraction"]
                    if any(e.get("kind") == "selected" for e in message["events"]):
                        selected_message = await client.recv()
                        break
                assert selected_message is not None
                assert selected_message["type"] == "selected"
                assert selected_message["target"] == 2
                assert dwell == pytest.approx(1.0)

                offline = score_trial(trace, 2, SelectorConfig(2 / 3), layout)
                metrics = selected_message["metrics"]
                assert metrics["success"] is True
                assert metrics["tct"] == pytest.approx(offline.tct)
                assert metrics["walked_distance"] == pytest.approx(offline.walked_distance)
                assert metrics["stabilizing_error"] == offline.stabilizing_error
                await client.close()
            finally:
                server.close()
                await server.wait_closed()

        run(scenario())

    def test_bad_configure_is_reported(self):
        async def scenario():
            server, port = await _playground_port()
            try:
                client = await LineClient.connect(port)
                reply = await client.request(
                    {"type": "configure", "technique": "walkline", "params": {"n_lanes": 7}}
                )
                assert reply["type"] == "error"
                reply = await client.request({"type": "input", "t": 0, "x": 0, "y": 0})
                assert reply["type"] == "error"
                await client.close()
            finally:
                server.close()
                await server.wait_closed()

        run(scenario())


class TestPlaygroundOtherTechniques:
    def test_foottap_session(self):
        async def scenario():
            server, port = await _playground_port()
            try:
                client = await LineClient.connect(port)
                await client.request(
                    {"type": "configure", "technique": "foottap", "params": {"rows": 3, "cols": 6}}
                )
                reply = await client.request({"type": "tap", "x": 0.0, "y": 0.25})
                assert reply["active"] == "r2c3"
                reply = await client.request({"type": "tap", "x": 0.0, "y": -0.2})
                assert reply["active"] is None
                await client.close()
            finally:
                server.close()
                await server.wait_closed()

        run(scenario())

    def test_proximity_session(self):
        async def scenario():
            server, port = await _playground_port()
            try:
                client = await LineClient.connect(port)
                await client.request(
                    {
                        "type": "configure",
                        "technique": "proximity",
                        "params": {"min_distance": 0.125, "max_distance": 0.625, "n_layers": 5},
                    }
                )
                reply = await client.request({"type": "distance", "t": 0.0, "d": 0.125})
                assert reply["active"] == 0
                reply = await client.request({"type": "distance", "t": 0.1, "d": 0.30})
                assert reply["active"] == 1
                kinds = [e["kind"] for e in reply["events"]]
                assert kinds == ["left", "entered"]
                await client.close()
            finally:
                server.close()
                await server.wait_closed()

        run(scenario())


class TestDropSpaceServer:
    def test_snapshots_and_privacy_over_the_wire(self):
        async def scenario():
            feed = [
                serve.FeedItem(t=0.0, content="shared-note", visibility="public"),
                serve.FeedItem(t=0.0, content="secret-note", owner="alice", visibility="private"),
            ]
            server = serve.DropSpaceServer(rate=50.0, feed=feed)
            await server.start(port=0)
            port = server._server.sockets[0].getsockname()[1]
            try:
                alice = await LineClient.connect(port)
                bob = await LineClient.connect(port)
                hello_a = await alice.request(
                    {"type": "hello", "user": "alice", "head": [-1, 0, 1.7], "gaze": [1, 0, 0]}
                )
                assert hello_a["type"] == "snapshot"
                hello_b = await bob.request(
                    {"type": "hello", "user": "bob", "head": [1, 0, 1.7], "gaze": [-1, 0, 0]}
                )
                assert hello_b["type"] == "snapshot"

                async def wait_snapshot(client, predicate, tries=200):
                    for _ in range(tries):
                        message = await client.recv()
                        if message["type"] == "snapshot" and predicate(message):
                            return message
                    raise AssertionError("snapshot predicate never satisfied")

                snap_a = await wait_snapshot(alice, lambda m: len(m["drops"]) == 2)
                contents = sorted(d["content"] for d in snap_a["drops"])
                assert contents == ["secret-note", "shared-note"]

                snap_b = await wait_snapshot(bob, lambda m: len(m["drops"]) == 1)
                assert snap_b["drops"][0]["content"] == "shared-note"
                assert snap_b["drops"][0]["vis"] == "public"

                secret_id = next(
                    d["id"] for d in snap_a["drops"] if d["content"] == "secret-note"
                )
                await alice.send(
                    {"type": "gesture", "kind": "share", "drop": secret_id, "to": "bob"}
                )
                snap_b = await wait_snapshot(bob, lambda m: len(m["drops"]) == 2)
                assert sorted(d["content"] for d in snap_b["drops"]) == [
                    "secret-note",
                    "shared-note",
                ]
                await alice.close()
                await bob.close()
            finally:
                await server.stop()

        run(scenario())

    def test_gesture_before_hello_rejected(self):
        async def scenario():
            server = serve.DropSpaceServer(rate=50.0)
            await server.start(port=0)
            port = server._server.sockets[0].getsockname()[1]
            try:
                client = await LineClient.connect(port)
                reply = await client.request(
                    {"type": "gesture", "kind": "grab", "drop": "d0"}
                )
                assert reply["type"] == "error"
                await client.close()
            finally:
                await server.stop()

        run(scenario())

    def test_websocket_bridge_speaks_the_session_protocol(self):
        def client_frame(payload: bytes) -> bytes:
            mask = os.urandom(4)
            masked = bytes(b ^ mask[i % 4] for i, b in enumerate(payload))
            header = bytes([0x81])
            n = len(payload)
            if n < 126:
                header += bytes([0x80 | n])
            else:
                header += bytes([0x80 | 126]) + struct.pack(">H", n)
            return header + mask + masked

        async def read_frame(reader):
            header = await reader.readexactly(2)
            length = header[1] & 0x7F
            if length == 126:
                (length,) = struct.unpack(">H", await reader.readexactly(2))
            return json.loads(await reader.readexactly(length))

        async def scenario():
            bridge = await serve.start_http_bridge(port=0)
            port = bridge.sockets[0].getsockname()[1]
            try:
                reader, writer = await asyncio.open_connection("127.0.0.1", port)
                key = base64.b64encode(os.urandom(16)).decode()
                writer.write(
                    (
                        "GET /ws HTTP/1.1\r\nHost: t\r\nUpgrade: websocket\r\n"
                        f"Connection: Upgrade\r\nSec-WebSocket-Key: {key}\r\n"
                        "Sec-WebSocket-Version: 13\r\n\r\n"
                    ).encode()
                )
                status = await reader.readline()
                assert b"101" in status
                expected = base64.b64encode(
                    hashlib.sha1((key + serve._WS_GUID).encode()).digest()
                ).decode()
                accept_seen = None
                while True:
                    line = await reader.readline()
                    if line in (b"\r\n", b""):
                        break
                    if line.lower().startswith(b"sec-websocket-accept:"):
                        accept_seen = line.split(b":", 1)[1].strip().decode()
                assert accept_seen == expected
                writer.write(
                    client_frame(
                        json.dumps(
                            {
                                "type": "configure",
                                "technique": "walkline",
                                "params": {"n_lanes": 8, "selection_time": 0.5},
                            }
                        ).encode()
                    )
                )
                reply = await asyncio.wait_for(read_frame(reader), 5.0)
                assert reply["type"] == "state"
                writer.write(
                    client_frame(json.dumps({"type": "input", "t": 0.0, "x": 0.2, "y": 0.0}).encode())
                )
                reply = await asyncio.wait_for(read_frame(reader), 5.0)
                assert reply["type"] == "state"
                assert reply["active"] == 2
                writer.close()
            finally:
                bridge.close()
                await bridge.wait_closed()

        run(scenario())

    def test_drops_fall_between_snapshots(self):
        async def scenario():
            feed = [serve.FeedItem(t=0.0, content="falling-item")]
            server = serve.DropSpaceServer(rate=100.0, feed=feed)
            await server.start(port=0)
            port = server._server.sockets[0].getsockname()[1]
            try:
                client = await LineClient.connect(port)
                await client.request({"type": "hello", "user": "alice"})
                heights = []
                for _ in range(300):
                    message = await client.recv()
                    if message["type"] == "snapshot" and message["drops"]:
                        heights.append(message["drops"][0]["pos"][2])
                        if len(heights) >= 5:
                            break
                assert len(heights) >= 5
                assert all(b < a for a, b in zip(heights, heights[1:]))
                await client.close()
            finally:
                await server.stop()

        run(scenario())
