"""Play service: one port speaking line-delimited JSON, WebSocket, and HTTP.

The first bytes of each connection decide its protocol.  An HTTP request
line routes to either a WebSocket upgrade (the browser client's transport,
carrying one JSON message per text frame) or static file serving for the
client bundle; anything else is treated as raw line-delimited JSON.  All
three feed the same transport-free :class:`PlaySession`, so behavior is
identical down to the byte across transports.

The WebSocket side implements the server half of RFC 6455 directly: the
accept-key handshake, masked client frames, text/ping/close opcodes.  No
fragmentation support; play messages are far below frame-size limits.
"""

from __future__ import annotations

import asyncio
import base64
import hashlib
import json
import struct
import threading
from pathlib import Path

from .protocol import PlaySession

_WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"

_CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".mjs": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".json": "application/json",
    ".map": "application/json",
    ".ico": "image/x-icon",
    ".svg": "image/svg+xml",
    ".png": "image/png",
}

_HTTP_METHODS = (b"GET ", b"POST ", b"HEAD ", b"PUT ", b"DELET", b"OPTIO", b"PATCH")


class PlayServer:
    """Serves play sessions; ``port=0`` picks a free port, exposed as ``.port``."""

    def __init__(
        self,
        host: str = "127.0.0.1",
        port: int = 0,
        log_path: str | None = None,
        static_dir: str | None = None,
    ):
        self.host = host
        self.port = port
        self.log_path = log_path
        self.static_dir = Path(static_dir).resolve() if static_dir else None
        self._server: asyncio.base_events.Server | None = None

    async def start(self) -> None:
        self._server = await asyncio.start_server(self._on_connection, self.host, self.port)
        self.port = self._server.sockets[0].getsockname()[1]

    async def serve_forever(self) -> None:
        if self._server is None:
            await self.start()
        print(json.dumps({"type": "listening", "port": self.port}), flush=True)
        async with self._server:
            await self._server.serve_forever()

    async def _on_connection(
        self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter
    ) -> None:
        try:
            head = await reader.read(5)
            if not head:
                return
            if any(head == m[: len(head)] or head.startswith(m) for m in _HTTP_METHODS):
                await self._serve_http(head, reader, writer)
            else:
                await self._serve_ldjson(head, reader, writer)
        except (ConnectionError, asyncio.IncompleteReadError):
            pass
        finally:
            try:
                writer.close()
                await writer.wait_closed()
            except (ConnectionError, OSError):
                pass

    # ---------------- raw line-delimited JSON ----------------

    async def _serve_ldjson(
        self, head: bytes, reader: asyncio.StreamReader, writer: asyncio.StreamWriter
    ) -> None:
        session = PlaySession(log_path=self.log_path)
        buffer = head
        try:
            while True:
                chunk = await reader.read(4096)
                closed = not chunk
                buffer += chunk
                while b"\n" in buffer:
                    line, buffer = buffer.split(b"\n", 1)
                    if not line.strip():
                        continue
                    for reply in _feed(session, line):
                        writer.write((json.dumps(reply, sort_keys=True) + "\n").encode())
                    await writer.drain()
                    if session.phase == "done":
                        return
                if closed:
                    return
        finally:
            session.on_disconnect()

    # ---------------- HTTP: websocket upgrade or static files ----------------

    async def _serve_http(
        self, head: bytes, reader: asyncio.StreamReader, writer: asyncio.StreamWriter
    ) -> None:
        raw = head + await reader.readuntil(b"\r\n\r\n")
        request_line, _, header_block = raw.partition(b"\r\n")
        parts = request_line.decode("latin-1").split()
        if len(parts) < 2:
            await self._send_http(writer, 400, b"bad request")
            return
        method, path = parts[0], parts[1]
        headers = {}
        for line in header_block.decode("latin-1").split("\r\n"):
            name, sep, value = line.partition(":")
            if sep:
                headers[name.strip().lower()] = value.strip()

        if headers.get("upgrade", "").lower() == "websocket":
            await self._serve_websocket(headers, reader, writer)
            return
        if method != "GET":
            await self._send_http(writer, 405, b"method not allowed")
            return
        await self._serve_static(path, writer)

    async def _send_http(
        self,
        writer: asyncio.StreamWriter,
        status: int,
        body: bytes,
        content_type: str = "text/plain; charset=utf-8",
    ) -> None:
        reason = {200: "OK", 400: "Bad Request", 404: "Not Found", 405: "Method Not Allowed"}
        head = (
            f"HTTP/1.1 {status} {reason.get(status, 'Error')}\r\n"
            f"Content-Type: {content_type}\r\n"
            f"Content-Length: {len(body)}\r\n"
            "Connection: close\r\n\r\n"
        )
        writer.write(head.encode() + body)
        await writer.drain()

    async def _serve_static(self, path: str, writer: asyncio.StreamWriter) -> None:
        if self.static_dir is None:
            await self._send_http(writer, 404, b"no static directory configured")
            return
        name = path.split("?", 1)[0]
        if name.endswith("/"):
            name += "index.html"
        target = (self.static_dir / name.lstrip("/")).resolve()
        if not str(target).startswith(str(self.static_dir)) or not target.is_file():
            await self._send_http(writer, 404, b"not found")
            return
        ctype = _CONTENT_TYPES.get(target.suffix, "application/octet-stream")
        await self._send_http(writer, 200, target.read_bytes(), content_type=ctype)

    async def _serve_websocket(
        self, headers: dict, reader: asyncio.StreamReader, writer: asyncio.StreamWriter
    ) -> None:
        key = headers.get("sec-websocket-key")
        if not key:
            await self._send_http(writer, 400, b"missing websocket key")
            return
        accept = base64.b64encode(hashlib.sha1((key + _WS_GUID).encode()).digest()).decode()
        writer.write(
            (
                "HTTP/1.1 101 Switching Protocols\r\n"
                "Upgrade: websocket\r\n"
                "Connection: Upgrade\r\n"
                f"Sec-WebSocket-Accept: {accept}\r\n\r\n"
            ).encode()
        )
        await writer.drain()

        session = PlaySession(log_path=self.log_path)
        try:
            while True:
                frame = await _read_ws_frame(reader)
                if frame is None:
                    return
                opcode, payload = frame
                if opcode == 8:  # close
                    writer.write(_ws_frame(8, b""))
                    await writer.drain()
                    return
                if opcode == 9:  # ping -> pong
                    writer.write(_ws_frame(10, payload))
                    await writer.drain()
                    continue
                if opcode != 1:
                    continue
                for reply in _feed(session, payload):
                    writer.write(_ws_frame(1, json.dumps(reply, sort_keys=True).encode()))
                await writer.drain()
        except (ConnectionError, asyncio.IncompleteReadError):
            pass
        finally:
            session.on_disconnect()


def _feed(session: PlaySession, raw: bytes) -> list[dict]:
    try:
        msg = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        return [{"type": "error", "message": "message is not valid JSON"}]
    return session.handle(msg)


async def _read_ws_frame(reader: asyncio.StreamReader) -> tuple[int, bytes] | None:
    try:
        first = await reader.readexactly(2)
    except asyncio.IncompleteReadError:
        return None
    opcode = first[0] & 0x0F
    masked = bool(first[1] & 0x80)
    length = first[1] & 0x7F
    if length == 126:
        length = struct.unpack(">H", await reader.readexactly(2))[0]
    elif length == 127:
        length = struct.unpack(">Q", await reader.readexactly(8))[0]
    mask = await reader.readexactly(4) if masked else b"\x00" * 4
    payload = await reader.readexactly(length)
    if masked:
        payload = bytes(b ^ mask[i % 4] for i, b in enumerate(payload))
    return opcode, payload


def _ws_frame(opcode: int, payload: bytes) -> bytes:
    head = bytes([0x80 | opcode])
    n = len(payload)
    if n < 126:
        head += bytes([n])
    elif n < 1 << 16:
        head += bytes([126]) + struct.pack(">H", n)
    else:
        head += bytes([127]) + struct.pack(">Q", n)
    return head + payload


def serve_play(
    host: str = "127.0.0.1",
    port: int = 0,
    log_path: str | None = None,
    static_dir: str | None = None,
) -> None:
    """Run the play service until interrupted (blocking)."""
    server = PlayServer(host=host, port=port, log_path=log_path, static_dir=static_dir)
    try:
        asyncio.run(server.serve_forever())
    except KeyboardInterrupt:
        pass


class ServerThread:
    """Run a PlayServer on a background thread; for tests and tooling."""

    def __init__(self, **kwargs):
        self.server = PlayServer(**kwargs)
        self._loop: asyncio.AbstractEventLoop | None = None
        self._thread: threading.Thread | None = None
        self._started = threading.Event()

    def __enter__(self) -> "ServerThread":
        self._thread = threading.Thread(target=self._run, daemon=True)
        self._thread.start()
        if not self._started.wait(timeout=10):
            raise RuntimeError("server did not start")
        return self

    def _run(self) -> None:
        self._loop = asyncio.new_event_loop()
        asyncio.set_event_loop(self._loop)

        async def main():
            await self.server.start()
            self._started.set()
            async with self.server._server:
                await self.server._server.serve_forever()

        try:
            self._loop.run_until_complete(main())
        except asyncio.CancelledError:
            pass
        finally:
            self._loop.close()

    @property
    def port(self) -> int:
        return self.server.port

    def __exit__(self, *exc) -> None:
        if self._loop is not None:
            self._loop.call_soon_threadsafe(
                lambda: [t.cancel() for t in asyncio.all_tasks(self._loop)]
            )
        if self._thread is not None:
            self._thread.join(timeout=10)
