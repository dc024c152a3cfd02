"""A local scripted chat-completion endpoint for tests and offline demos."""

from __future__ import annotations

import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable

# responder(request_body) -> (status, content); content None sends an empty 200 body
Responder = Callable[[dict], "tuple[int, str | None]"]


class ScriptedChatServer:
    """Serve ``POST /chat/completions`` from a responder callable.

    Tracks the number of requests in flight so tests can check concurrency
    limits (``max_concurrent``). Use as a context manager; ``url`` is the base
    endpoint to hand to the client.
    """

    def __init__(self, responder: Responder, delay: float = 0.0):
        self.responder = responder
        self.delay = delay
        self.requests: list[dict] = []
        self.inflight = 0
        self.max_concurrent = 0
        self._lock = threading.Lock()
        server = self

        class Handler(BaseHTTPRequestHandler):
            protocol_version = "HTTP/1.1"
            disable_nagle_algorithm = True

            def log_message(self, *args):
                pass

            def do_POST(self):
                length = int(self.headers.get("Content-Length") or 0)
                raw = self.rfile.read(length)
                with server._lock:
                    server.inflight += 1
                    server.max_concurrent = max(server.max_concurrent, server.inflight)
                try:
                    if not self.path.rstrip("/").endswith("/chat/completions"):
                        self._send(404, b"{}")
                        return
                    body = json.loads(raw or b"{}")
                    with server._lock:
                        server.requests.append(body)
                    if server.delay:
                        time.sleep(server.delay)
                    status, content = server.responder(body)
                    if status != 200:
                        self._send(status, json.dumps({"error": "scripted failure"}).encode())
                        return
                    payload = {"choices": [{"index": 0, "message": {
                        "role": "assistant", "content": content}}]}
                    self._send(200, json.dumps(payload).encode())
                finally:
                    with server._lock:
                        server.inflight -= 1

            def _send(self, status: int, data: bytes):
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

        self._httpd = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._httpd.daemon_threads = True
        self._thread = threading.Thread(target=self._httpd.serve_forever, args=(0.02,),
                                        daemon=True)

    @property
    def url(self) -> str:
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}/v1"

    def start(self) -> "ScriptedChatServer":
        self._thread.start()
        return self

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()


def sequence_responder(script: list[tuple[int, str | None]]) -> Responder:
    """Replay ``script`` in order, one entry per request; the last entry repeats."""
    lock = threading.Lock()
    state = {"i": 0}

    def respond(_body):
        with lock:
            i = min(state["i"], len(script) - 1)
            state["i"] += 1
        return script[i]

    return respond
