"""Line-delimited JSON protocol servers.

Two asyncio TCP servers: a playground server that runs one engine session
per connection (a human drives a technique live), and a drop-space server
that owns one authoritative shared space and broadcasts per-user snapshots
at a fixed rate.  Every message is one JSON object per line.
"""

from __future__ import annotations

import asyncio
import base64
import hashlib
import json
import logging
import struct
from dataclasses import dataclass
from pathlib import Path

from . import foottap, infospace, proximity, walkline

log = logging.getLogger("abi.serve")

BROADCAST_RATE = 20.0  # Hz; clients see fresh state well under 0.2 s


def _event_dict(event: walkline.SelectorEvent) -> dict:
    out = {"kind": event.kind, "t": event.t}
    if event.lane is not None:
        out["lane"] = event.lane
    return out


class PlaygroundSession:
    """One engine session: configure once, then feed inputs, read states.

    The client never decides selections; it renders the state messages and
    the engine's selected/metrics payloads.
    """

    def __init__(self, technique: str | None = None):
        self.technique = technique
        self.layout: walkline.LaneLayout | None = None
        self.selector: walkline.SelectorConfig | None = None
        self.state: walkline.SelectorState | None = None
        self.samples: list[walkline.WalkSample] = []
        self.target: int | None = None
        self.grid: foottap.FootGrid | None = None
        self.layers: proximity.LayerSet | None = None
        self.active_layer: int | None = None

    def handle(self, message: dict) -> list[dict]:
        kind = message.get("type")
        try:
            if kind == "configure":
                return self._configure(message)
            if kind == "input":
                return self._walk_input(message)
            if kind == "tap":
                return self._tap(message)
            if kind == "distance":
                return self._distance(message)
        except (ValueError, walkline.InvalidState) as exc:
            return [{"type": "error", "message": str(exc)}]
        return [{"type": "error", "message": f"unknown message type {kind!r}"}]

    def _configure(self, message: dict) -> list[dict]:
        technique = message.get("technique", self.technique)
        params = message.get("params", {})
        if technique == "walkline":
            self.layout = walkline.build_lanes(
                int(params.get("n_lanes", 8)),
                float(params.get("total_width", walkline.DEFAULT_TOTAL_WIDTH)),
                float(params.get("length", walkline.DEFAULT_TRACK_LENGTH)),
            )
            self.selector = walkline.SelectorConfig(
                float(params.get("selection_time", 2.0 / 3.0))
            )
            self.target = params.get("target")
            self.state = None
            self.samples = []
        elif technique == "foottap":
            self.grid = foottap.build_grid(
                int(params.get("rows", 3)), int(params.get("cols", 6))
            )
        elif technique == "proximity":
            bounds = proximity.InteractionBounds(
                float(params.get("min_distance", proximity.DEFAULT_MIN_DISTANCE)),
                float(params.get("max_distance", 0.625)),
            )
            if params.get("guideline"):
                self.layers = proximity.partition_guideline(bounds)
            else:
                self.layers = proximity.partition_uniform(
                    bounds, int(params.get("n_layers", 5))
                )
            self.active_layer = None
        else:
            return [{"type": "error", "message": f"unknown technique {technique!r}"}]
        self.technique = technique
        return [
            {
                "type": "state",
                "active": None,
                "dwell_fraction": 0.0,
                "events": [{"kind": "configured", "technique": technique}],
            }
        ]

    def _walk_input(self, message: dict) -> list[dict]:
        if self.layout is None or self.selector is None:
            return [{"type": "error", "message": "configure a walkline session first"}]
        sample = walkline.WalkSample(
            float(message["t"]), float(message["x"]), float(message.get("y", 0.0))
        )
        self.samples.append(sample)
        if self.state is None:
            self.state = walkline.initial_selector_state(self.layout, sample.x)
            return [
                {
                    "type": "state",
                    "active": self.state.current_lane,
                    "dwell_fraction": 0.0,
                    "events": [],
                }
            ]
        if self.state.result is not None:
            return [{"type": "error", "message": "session finished; reconfigure to restart"}]
        prev_t = self.samples[-2].t
        self.state, events = walkline.selector_step(
            self.state, self.selector, self.layout, sample, prev_t
        )
        replies = [
            {
                "type": "state",
                "active": self.state.current_lane,
                "dwell_fraction": self.state.opacity_fraction,
                "events": [_event_dict(e) for e in events],
            }
        ]
        if isinstance(self.state.result, walkline.Selected):
            target = self.target if self.target is not None else self.state.result.lane
            metrics = walkline.score_trial(
                self.samples, int(target), self.selector, self.layout,
                task_shown_at=self.samples[0].t,
            )
            replies.append(
                {
                    "type": "selected",
                    "target": self.state.result.lane,
                    "metrics": {
                        "success": metrics.success,
                        "tct": metrics.tct,
                        "walked_distance": metrics.walked_distance,
                        "stabilizing_error": metrics.stabilizing_error,
                        "error_kind": metrics.error_kind,
                    },
                }
            )
        return replies

    def _tap(self, message: dict) -> list[dict]:
        if self.grid is None:
            return [{"type": "error", "message": "configure a foottap session first"}]
        cell = foottap.hit_test(self.grid, (float(message["x"]), float(message["y"])))
        active = f"r{cell.row}c{cell.col}" if cell is not None else None
        return [
            {
                "type": "state",
                "active": active,
                "dwell_fraction": 0.0,
                "events": [{"kind": "tap_hit" if cell else "tap_miss"}],
            }
        ]

    def _distance(self, message: dict) -> list[dict]:
        if self.layers is None:
            return [{"type": "error", "message": "configure a proximity session first"}]
        layer = proximity.locate(self.layers, float(message["d"]))
        events = []
        if layer != self.active_layer:
            if self.active_layer is not None:
                events.append({"kind": "left", "layer": self.active_layer})
            if layer is not None:
                events.append({"kind": "entered", "layer": layer})
            self.active_layer = layer
        return [
            {
                "type": "state",
                "active": layer,
                "dwell_fraction": 0.0,
                "events": events,
            }
        ]


async def _serve_lines(reader, writer, handle) -> None:
    peer = writer.get_extra_info("peername")
    try:
        while True:
            line = await reader.readline()
            if not line:
                break
            try:
                message = json.loads(line)
            except json.JSONDecodeError as exc:
                replies = [{"type": "error", "message": f"bad json: {exc}"}]
            else:
                replies = handle(message)
            for reply in replies:
                writer.write(json.dumps(reply).encode() + b"\n")
            await writer.drain()
    except (ConnectionResetError, asyncio.IncompleteReadError):
        pass
    finally:
        log.debug("connection from %s closed", peer)
        writer.close()


async def start_playground_server(
    host: str = "127.0.0.1", port: int = 0, technique: str | None = None
):
    """One independent engine session per connection."""

    async def on_connect(reader, writer):
        session = PlaygroundSession(technique)
        await _serve_lines(reader, writer, session.handle)

    server = await asyncio.start_server(on_connect, host, port)
    log.info("playground server on %s", server.sockets[0].getsockname())
    return server


@dataclass
class FeedItem:
    t: float
    content: str
    owner: str | None = None
    visibility: str = infospace.PUBLIC


def load_feed(path) -> list[FeedItem]:
    with open(path) as fh:
        items = json.load(fh)
    return [
        FeedItem(
            t=float(i["t"]),
            content=str(i["content"]),
            owner=i.get("owner"),
            visibility=i.get("visibility", infospace.PUBLIC),
        )
        for i in items
    ]


class DropSpaceServer:
    """Authoritative shared-space session over the wire protocol.

    Clients say hello with a user id, then send gestures and poses; the
    server applies every mutation on the event loop (one serialized command
    stream), advances falling drops, and broadcasts per-user snapshots at
    the configured rate.  A scripted feed stands in for live content
    retrieval.
    """

    def __init__(
        self,
        space: infospace.Space | None = None,
        rate: float = BROADCAST_RATE,
        feed: list[FeedItem] | None = None,
        spawn_seed: int = 0,
    ):
        self.space = space if space is not None else infospace.Space()
        self.rate = rate
        self.feed = sorted(feed or [], key=lambda i: i.t)
        self.spawn_seed = spawn_seed
        self.writers: dict[str, asyncio.StreamWriter] = {}
        self.pending_events: list[dict] = []
        self._server: asyncio.AbstractServer | None = None
        self._broadcaster: asyncio.Task | None = None
        self._spawned = 0

    async def start(self, host: str = "127.0.0.1", port: int = 0):
        self._server = await asyncio.start_server(self._on_connect, host, port)
        self._broadcaster = asyncio.create_task(self._broadcast_loop())
        log.info("drop-space server on %s", self._server.sockets[0].getsockname())
        return self._server

    async def stop(self):
        if self._broadcaster:
            self._broadcaster.cancel()
            try:
                await self._broadcaster
            except asyncio.CancelledError:
                pass
        if self._server:
            self._server.close()
            await self._server.wait_closed()

    def _drop_visible(self, user: str, drop_id: str) -> bool:
        drop = self.space.drops.get(drop_id)
        return drop is not None and self.space.visible_to(user, drop)

    async def _on_connect(self, reader, writer):
        user: str | None = None
        try:
            while True:
                line = await reader.readline()
                if not line:
                    break
                try:
                    message = json.loads(line)
                except json.JSONDecodeError as exc:
                    writer.write(
                        json.dumps({"type": "error", "message": f"bad json: {exc}"}).encode()
                        + b"\n"
                    )
                    await writer.drain()
                    continue
                kind = message.get("type")
                if kind == "hello":
                    user = str(message["user"])
                    self.space.register_user(
                        user,
                        tuple(message.get("head", (0.0, 0.0, 1.7))),
                        tuple(message.get("gaze", (0.0, 1.0, 0.0))),
                    )
                    self.writers[user] = writer
                    writer.write(
                        json.dumps(
                            {"type": "snapshot", "drops": self.space.snapshot_for(user)}
                        ).encode()
                        + b"\n"
                    )
                    await writer.drain()
                elif user is None:
                    writer.write(
                        json.dumps({"type": "error", "message": "say hello first"}).encode()
                        + b"\n"
                    )
                    await writer.drain()
                elif kind == "pose":
                    self.space.update_pose(
                        user, tuple(message["head"]), tuple(message["gaze"])
                    )
                elif kind == "gesture":
                    try:
                        gesture = infospace.Gesture(
                            kind=message["kind"],
                            drop_id=message["drop"],
                            position=tuple(message["pos"]) if "pos" in message else None,
                            to=message.get("to"),
                        )
                        self.pending_events.extend(
                            self.space.apply_gesture(user, gesture)
                        )
                    except (infospace.SpaceError, ValueError, KeyError) as exc:
                        writer.write(
                            json.dumps({"type": "error", "message": str(exc)}).encode()
                            + b"\n"
                        )
                        await writer.drain()
                else:
                    writer.write(
                        json.dumps(
                            {"type": "error", "message": f"unknown message type {kind!r}"}
                        ).encode()
                        + b"\n"
                    )
                    await writer.drain()
        except (ConnectionResetError, asyncio.IncompleteReadError):
            pass
        finally:
            if user is not None:
                self.writers.pop(user, None)
            writer.close()

    def _spawn_due(self):
        while self._spawned < len(self.feed) and self.feed[self._spawned].t <= self.space.clock:
            item = self.feed[self._spawned]
            try:
                _, events = self.space.spawn(
                    item.content,
                    item.owner,
                    item.visibility,
                    seed=self.spawn_seed + self._spawned,
                )
                self.pending_events.extend(events)
            except infospace.SpaceError as exc:
                log.warning("feed spawn failed: %s", exc)
            self._spawned += 1

    async def _broadcast_loop(self):
        dt = 1.0 / self.rate
        while True:
            await asyncio.sleep(dt)
            if self.space.users:
                self.pending_events.extend(self.space.tick(dt))
                self._spawn_due()
            events, self.pending_events = self.pending_events, []
            for user, writer in list(self.writers.items()):
                try:
                    for event in events:
                        drop_id = event.get("id")
                        if drop_id is not None and not self._drop_visible(user, drop_id):
                            # Never leak private-drop activity to non-owners;
                            # expired/discarded drops stay visible in their
                            # last audience's event stream only if still known.
                            drop = self.space.drops.get(drop_id)
                            if drop is None or not self.space.visible_to(user, drop):
                                continue
                        writer.write(
                            json.dumps({"type": "event", "event": event}).encode() + b"\n"
                        )
                    writer.write(
                        json.dumps(
                            {"type": "snapshot", "drops": self.space.snapshot_for(user)}
                        ).encode()
                        + b"\n"
                    )
                    await writer.drain()
                except (ConnectionResetError, RuntimeError):
                    self.writers.pop(user, None)


# -- browser bridge: static files plus the same session protocol over
# -- WebSocket (browsers cannot open raw TCP sockets) -------------------------

_WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"

_CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".mjs": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".json": "application/json",
    ".map": "application/json",
    ".svg": "image/svg+xml",
    ".ico": "image/x-icon",
}


async def _ws_read_message(reader) -> str | None:
    """One text message, reassembling fragments; None once the peer closes."""
    parts: list[bytes] = []
    while True:
        header = await reader.readexactly(2)
        fin = header[0] & 0x80
        opcode = header[0] & 0x0F
        masked = header[1] & 0x80
        length = header[1] & 0x7F
        if length == 126:
            (length,) = struct.unpack(">H", await reader.readexactly(2))
        elif length == 127:
            (length,) = struct.unpack(">Q", await reader.readexactly(8))
        mask = await reader.readexactly(4) if masked else b"\x00" * 4
        payload = await reader.readexactly(length)
        if masked:
            payload = bytes(b ^ mask[i % 4] for i, b in enumerate(payload))
        if opcode == 0x8:  # close
            return None
        if opcode == 0x9:  # ping; the caller replies with a pong
            raise _WsPing(payload)
        if opcode in (0x1, 0x2, 0x0):
            parts.append(payload)
            if fin:
                return b"".join(parts).decode()


class _WsPing(Exception):
    def __init__(self, payload: bytes):
        self.payload = payload


def _ws_frame(payload: bytes, opcode: int = 0x1) -> bytes:
    header = bytes([0x80 | opcode])
    n = len(payload)
    if n < 126:
        header += bytes([n])
    elif n < 1 << 16:
        header += bytes([126]) + struct.pack(">H", n)
    else:
        header += bytes([127]) + struct.pack(">Q", n)
    return header + payload


async def _serve_websocket(reader, writer, technique: str | None) -> None:
    session = PlaygroundSession(technique)
    try:
        while True:
            try:
                message = await _ws_read_message(reader)
            except _WsPing as ping:
                writer.write(_ws_frame(ping.payload, opcode=0xA))
                await writer.drain()
                continue
            if message is None:
                break
            try:
                parsed = json.loads(message)
            except json.JSONDecodeError as exc:
                replies = [{"type": "error", "message": f"bad json: {exc}"}]
            else:
                replies = session.handle(parsed)
            for reply in replies:
                writer.write(_ws_frame(json.dumps(reply).encode()))
            await writer.drain()
    except (asyncio.IncompleteReadError, ConnectionResetError):
        pass


def _http_response(status: str, body: bytes, content_type: str) -> bytes:
    return (
        f"HTTP/1.1 {status}\r\nContent-Type: {content_type}\r\n"
        f"Content-Length: {len(body)}\r\nConnection: close\r\n\r\n"
    ).encode() + body


async def start_http_bridge(
    host: str = "127.0.0.1",
    port: int = 0,
    static_dir: str | Path | None = None,
    technique: str | None = None,
):
    """Serve the playground assets and bridge /ws to engine sessions."""
    root = Path(static_dir).resolve() if static_dir else None

    async def on_connect(reader, writer):
        try:
            request = await reader.readline()
            if not request:
                writer.close()
                return
            method, target, _ = request.decode().split(" ", 2)
            headers = {}
            while True:
                line = await reader.readline()
                if line in (b"\r\n", b"\n", b""):
                    break
                name, _, value = line.decode().partition(":")
                headers[name.strip().lower()] = value.strip()
            if target.split("?", 1)[0] == "/ws":
                key = headers.get("sec-websocket-key", "")
                accept = base64.b64encode(
                    hashlib.sha1((key + _WS_GUID).encode()).digest()
                ).decode()
                writer.write(
                    (
                        "HTTP/1.1 101 Switching Protocols\r\nUpgrade: websocket\r\n"
                        f"Connection: Upgrade\r\nSec-WebSocket-Accept: {accept}\r\n\r\n"
                    ).encode()
                )
                await writer.drain()
                await _serve_websocket(reader, writer, technique)
            elif method == "GET" and root is not None:
                relative = target.split("?", 1)[0].lstrip("/") or "index.html"
                path = (root / relative).resolve()
                if root in path.parents or path == root:
                    if path.is_dir():
                        path = path / "index.html"
                    if path.is_file():
                        body = path.read_bytes()
                        ctype = _CONTENT_TYPES.get(path.suffix, "application/octet-stream")
                        writer.write(_http_response("200 OK", body, ctype))
                    else:
                        writer.write(_http_response("404 Not Found", b"not found", "text/plain"))
                else:
                    writer.write(_http_response("403 Forbidden", b"forbidden", "text/plain"))
                await writer.drain()
            else:
                writer.write(_http_response("404 Not Found", b"not found", "text/plain"))
                await writer.drain()
        except (ConnectionResetError, asyncio.IncompleteReadError, ValueError):
            pass
        finally:
            writer.close()

    server = await asyncio.start_server(on_connect, host, port)
    log.info("http bridge on %s", server.sockets[0].getsockname())
    return server


async def run_playground(
    host: str,
    port: int,
    technique: str | None = None,
    http_port: int | None = None,
    static_dir: str | Path | None = None,
):
    server = await start_playground_server(host, port, technique)
    bridge = None
    if http_port is not None:
        bridge = await start_http_bridge(host, http_port, static_dir, technique)
    async with server:
        if bridge is not None:
            async with bridge:
                await server.serve_forever()
        else:
            await server.serve_forever()


async def run_dropspace(
    host: str, port: int, rate: float = BROADCAST_RATE, feed: list[FeedItem] | None = None
):
    server = DropSpaceServer(rate=rate, feed=feed)
    await server.start(host, port)
    try:
        await asyncio.Event().wait()
    finally:
        await server.stop()
