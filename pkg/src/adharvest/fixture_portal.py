"""Deterministic stand-in for the classified-ads portal.

Serves templated category index pages and ad detail pages from a JSON
spec, with per-url flaky behavior (scripted failures, delays) for
exercising the fetch combinators. Ad post dates written as "{today}" in
the spec resolve to the date the server was started with, so golden
pages stay stable under a pinned date.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field
from datetime import date, datetime
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .dates import format_date

__all__ = ["FixturePortal", "FixtureSpec", "PortInUse", "load_spec", "serve_fixture"]

DATE_FORMAT = "dd/MM/yyyy"


class PortInUse(Exception):
    pass


@dataclass
class FixtureSpec:
    categories: dict  # name -> {"layout": "table"|"list", "ads": [...]}
    flaky: dict = field(default_factory=dict)  # path -> behavior overrides

    @classmethod
    def from_dict(cls, data: dict) -> "FixtureSpec":
        return cls(categories=data["categories"], flaky=data.get("flaky", {}))


def load_spec(path: str | Path) -> FixtureSpec:
    return FixtureSpec.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _posted_on(ad: dict, today: date) -> date:
    raw = ad.get("posted", "{today}")
    if raw == "{today}":
        return today
    return datetime.strptime(raw, "%Y-%m-%d").date()


def render_index(spec: FixtureSpec, category: str, today: date) -> str:
    info = spec.categories[category]
    rows = []
    for ad in info["ads"]:
        posted = format_date(_posted_on(ad, today), DATE_FORMAT)
        link = f'<a href="/ads/{ad["id"]}.html">{ad["fields"]["title"]}</a>'
        if info.get("layout") == "list":
            rows.append(f"<li>{link} posted {posted}</li>")
        else:
            rows.append(f"<tr><td>{link}</td><td>{posted}</td></tr>")
    body = "\n".join(rows)
    if info.get("layout") == "list":
        listing = f"<ul>\n{body}\n</ul>"
    else:
        listing = f"<table>\n{body}\n</table>"
    return (
        "<html><head><title>"
        + category
        + "</title></head><body>\n<h1>"
        + category
        + "</h1>\n"
        + listing
        + "\n</body></html>\n"
    )


def render_detail(spec: FixtureSpec, ad_id: str, today: date) -> str | None:
    for category, info in spec.categories.items():
        for ad in info["ads"]:
            if ad["id"] != ad_id:
                continue
            posted = format_date(_posted_on(ad, today), DATE_FORMAT)
            rows = [f"<tr><td>Posted</td><td>{posted}</td></tr>"]
            for name, value in ad["fields"].items():
                if name == "title":
                    continue
                label = name.capitalize()
                rows.append(f"<tr><td>{label}</td><td>{value}</td></tr>")
            table = "\n".join(rows)
            return (
                "<html><head><title>"
                + ad["fields"]["title"]
                + "</title></head><body>\n"
                + '<div class="advert">\n<h1>'
                + ad["fields"]["title"]
                + "</h1>\n<table>\n"
                + table
                + "\n</table>\n</div>\n</body></html>\n"
            )
    return None


class FixturePortal:
    """Running portal handle: base_url, request log, flaky-state."""

    def __init__(self, spec: FixtureSpec, today: date, port: int = 0):
        self.spec = spec
        self.today = today
        self.request_log: list[tuple[str, str]] = []
        self._fail_budget = {
            path: int(rule.get("fail_times", 0)) for path, rule in spec.flaky.items()
        }
        self._lock = threading.Lock()
        portal = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def do_GET(self):
                portal._handle(self)

            def do_POST(self):
                portal._handle(self)

        try:
            self._server = ThreadingHTTPServer(("127.0.0.1", port), Handler)
        except OSError as exc:
            raise PortInUse(f"port {port}: {exc}") from exc
        self.port = self._server.server_address[1]
        self.base_url = f"http://127.0.0.1:{self.port}"
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()

    def close(self) -> None:
        self._server.shutdown()
        self._server.server_close()

    def __enter__(self) -> "FixturePortal":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def url_for(self, category: str) -> str:
        return f"{self.base_url}/{category}.html"

    # -- request handling --------------------------------------------------

    def _handle(self, handler: BaseHTTPRequestHandler) -> None:
        path = handler.path.split("?", 1)[0]
        with self._lock:
            self.request_log.append((handler.command, path))
        rule = self.spec.flaky.get(path)
        if rule:
            delay = float(rule.get("delay_ms", 0))
            if delay > 0:
                time.sleep(delay / 1000.0)
            with self._lock:
                remaining = self._fail_budget.get(path, 0)
                if remaining > 0:
                    self._fail_budget[path] = remaining - 1
                    self._send(handler, int(rule.get("status", 500)), "scripted failure")
                    return
        if path == "/__log":
            with self._lock:
                body = json.dumps(self.request_log)
            self._send(handler, 200, body, content_type="application/json")
            return
        if path == "/echo":
            length = int(handler.headers.get("Content-Length") or 0)
            posted = handler.rfile.read(length).decode("utf-8")
            self._send(handler, 200, f"<html><body><pre>{posted}</pre></body></html>")
            return
        body = self._page_for(path)
        if body is None:
            self._send(handler, 404, "not found")
        else:
            self._send(handler, 200, body)

    def _page_for(self, path: str) -> str | None:
        if path.startswith("/ads/") and path.endswith(".html"):
            return render_detail(self.spec, path[len("/ads/") : -len(".html")], self.today)
        if path.endswith(".html"):
            category = path[1 : -len(".html")]
            if category in self.spec.categories:
                return render_index(self.spec, category, self.today)
        return None

    @staticmethod
    def _send(handler, status: int, body: str, content_type: str = "text/html") -> None:
        payload = body.encode("utf-8")
        handler.send_response(status)
        handler.send_header("Content-Type", f"{content_type}; charset=utf-8")
        handler.send_header("Content-Length", str(len(payload)))
        handler.end_headers()
        handler.wfile.write(payload)


def serve_fixture(spec: FixtureSpec, today: date, port: int = 0) -> FixturePortal:
    """Start the portal on 127.0.0.1; port 0 picks a free one."""
    return FixturePortal(spec, today, port)
