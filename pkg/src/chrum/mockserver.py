"""In-process stand-in for the Oozie jobs endpoint.

It accepts ``POST /oozie/v1/jobs?action=start`` with an XML configuration
body, records every request, and answers ``201 {"id": "0000001-W"}``::

    with MockOozieServer() as server:
        ...  # point the client at server.host / server.port
        assert len(server.requests) == 6
"""

from __future__ import annotations

import json
import threading
import xml.etree.ElementTree as ET
from collections.abc import Callable
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlsplit

from .submit import APPLICATION_PATH, JOBS_ENDPOINT


@dataclass
class CapturedRequest:
    method: str
    path: str
    query: dict[str, list[str]]
    headers: dict[str, str]
    body: bytes
    properties: dict[str, str] = field(default_factory=dict)

    @property
    def application_path(self) -> str | None:
        return self.properties.get(APPLICATION_PATH)


def parse_configuration(body: bytes) -> dict[str, str]:
    root = ET.fromstring(body)
    props = {}
    for prop in root.iter("property"):
        props[prop.findtext("name", "")] = prop.findtext("value", "")
    return props


# Decides the response for a well-formed submission: (status, json body).
Responder = Callable[[CapturedRequest, int], "tuple[int, dict]"]


def accept_all(request: CapturedRequest, sequence: int) -> tuple[int, dict]:
    return 201, {"id": f"{sequence:07d}-W"}


class MockOozieServer:
    def __init__(self, host: str = "127.0.0.1", port: int = 0, responder: Responder = accept_all):
        self.requests: list[CapturedRequest] = []
        self.responder = responder
        self._lock = threading.Lock()
        self._httpd = ThreadingHTTPServer((host, port), self._handler_class())
        self._thread: threading.Thread | None = None

    @property
    def host(self) -> str:
        return self._httpd.server_address[0]

    @property
    def port(self) -> int:
        return self._httpd.server_address[1]

    def _handler_class(self):
        server = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, format, *args):
                pass

            def _reply(self, status: int, payload: dict) -> None:
                data = json.dumps(payload).encode()
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def do_POST(self):
                url = urlsplit(self.path)
                body = self.rfile.read(int(self.headers.get("Content-Length") or 0))
                captured = CapturedRequest(
                    "POST", url.path, parse_qs(url.query), dict(self.headers.items()), body
                )
                if url.path != JOBS_ENDPOINT:
                    return self._reply(404, {"error": "not found"})
                try:
                    captured.properties = parse_configuration(body)
                except ET.ParseError as exc:
                    return self._reply(400, {"error": f"bad configuration: {exc}"})
                with server._lock:
                    server.requests.append(captured)
                    sequence = len(server.requests)
                status, payload = server.responder(captured, sequence)
                self._reply(status, payload)

        return Handler

    def start(self) -> MockOozieServer:
        self._thread = threading.Thread(
            target=self._httpd.serve_forever, kwargs={"poll_interval": 0.05}, daemon=True
        )
        self._thread.start()
        return self

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread is not None:
            self._thread.join()

    def serve_forever(self) -> None:
        self._httpd.serve_forever()

    def __enter__(self) -> MockOozieServer:
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()
