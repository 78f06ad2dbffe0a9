from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None)
settings.load_profile("default")


class FakeServer:
    """Local HTTP endpoint replying from a queue of (status, body) pairs.

    The last reply repeats once the queue is drained. Requests are recorded
    as (path, headers, json body).
    """

    def __init__(self, replies):
        self.replies = list(replies)
        self.requests: list[tuple[str, dict, object]] = []
        server = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                raw = self.rfile.read(length)
                server.requests.append((self.path, dict(self.headers), json.loads(raw or b"null")))
                status, body = server.replies.pop(0) if len(server.replies) > 1 else server.replies[0]
                payload = body if isinstance(body, str) else json.dumps(body)
                data = payload.encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args):
                pass

        self.httpd = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self.thread.start()

    @property
    def url(self) -> str:
        host, port = self.httpd.server_address
        return f"http://{host}:{port}"

    def close(self) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()


@pytest.fixture
def fake_server():
    servers = []

    def start(replies):
        s = FakeServer(replies)
        servers.append(s)
        return s

    yield start
    for s in servers:
        s.close()


# -- acceptance criterion reporting -----------------------------------------------------

_RANK = {"PASS": 0, "SKIP": 1, "FAIL": 2}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): numbered acceptance criterion")
    config._criteria = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or (report.when != "call" and report.passed):
        return
    status = "SKIP" if report.skipped else "FAIL" if report.failed else "PASS"
    number, title = marker.args
    seen = item.config._criteria.get(number)
    if seen is None or _RANK[status] > _RANK[seen[1]]:
        item.config._criteria[number] = (title, status)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = getattr(config, "_criteria", {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        title, status = results[number]
        terminalreporter.write_line(f"criterion {number}: {status}  {title}")
