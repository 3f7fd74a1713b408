"""Advert analysis and SMS dispatch.

analyze_new walks adverts above the high-water cursor, finds matching
preferences, and queues one pending message per subscribed client that
has not been notified of that advert before. dispatch_pending pushes the
queue through a gateway and flips delivered messages to sent.
"""

from __future__ import annotations

import json
import logging
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import httpx

from .clocks import Clock, SystemClock
from .datastore import AdvertRecord, Datastore, Preference

logger = logging.getLogger(__name__)

__all__ = [
    "DispatchReport",
    "HttpGateway",
    "MockFileGateway",
    "SendResult",
    "analyze_new",
    "compose_sms",
    "dispatch_pending",
    "matches",
]

SMS_MAX_CHARS = 160
CONVENTIONAL_FIELDS = ("title", "price", "date", "contacts")
HIGH_WATER_KEY = "analyze_high_water"


def _norm(value: str) -> str:
    return " ".join(value.split()).lower()


def matches(advert: AdvertRecord, pref: Preference) -> bool:
    """True when the categories are equal and every constraint holds;
    comparison is case-insensitive with whitespace collapsed."""
    if advert.category != pref.category:
        return False
    for field_name, mode, wanted in pref.constraints:
        actual = _norm(advert.fields.get(field_name, ""))
        expected = _norm(wanted)
        if mode == "equals":
            if actual != expected:
                return False
        elif mode == "contains":
            if expected not in actual:
                return False
        else:
            return False
    return True


def compose_sms(advert: AdvertRecord) -> str:
    """"[category] title | price | date | contacts", empty fields
    skipped, truncated to the SMS length limit."""
    parts = [advert.fields.get(name, "") for name in CONVENTIONAL_FIELDS]
    body = " | ".join(part for part in parts if part)
    text = f"[{advert.category}] {body}" if body else f"[{advert.category}]"
    return text[:SMS_MAX_CHARS]


def analyze_new(
    store: Datastore, high_water: int | None = None, clock: Clock | None = None
) -> tuple[int, int]:
    """Queue notifications for adverts with id above the cursor.

    Returns (messages queued, new high water). With high_water=None the
    persisted cursor is used and advanced."""
    clock = clock or SystemClock()
    use_store_cursor = high_water is None
    if use_store_cursor:
        high_water = store.get_cursor(HIGH_WATER_KEY, 0)
    created = 0
    max_seen = high_water
    preferences = store.list_preferences()
    for advert in store.list_adverts(since_id=high_water):
        max_seen = max(max_seen, advert.id)
        for pref in preferences:
            if not matches(advert, pref):
                continue
            for client in store.subscribers_of(pref.id):
                if store.already_notified(client.id, advert.id):
                    continue
                text = compose_sms(advert)
                result = store.enqueue_sms(client.id, advert.id, text, clock.now())
                if result.inserted:
                    created += 1
    if use_store_cursor and max_seen > high_water:
        store.set_cursor(HIGH_WATER_KEY, max_seen)
    return created, max_seen


@dataclass
class SendResult:
    delivered: bool
    reason: str = ""


class MockFileGateway:
    """Appends one "<timestamp> <mobile> <text>" line per delivery."""

    def __init__(self, sink_path: str | Path):
        self.sink_path = Path(sink_path)
        self._lock = threading.Lock()

    def send(self, mobile: str, text: str) -> SendResult:
        line = f"{datetime.now(timezone.utc).isoformat()} {mobile} {text}\n"
        with self._lock:
            with self.sink_path.open("a", encoding="utf-8") as sink:
                sink.write(line)
        return SendResult(True)

    def sent_lines(self) -> list[str]:
        if not self.sink_path.exists():
            return []
        return self.sink_path.read_text(encoding="utf-8").splitlines()


class HttpGateway:
    """POSTs {"to", "body"} to <base_url>/send; 200 with an id is
    delivered, anything else is a failure."""

    def __init__(self, base_url: str, timeout_s: float = 10.0):
        self.base_url = base_url.rstrip("/")
        self.timeout_s = timeout_s

    def send(self, mobile: str, text: str) -> SendResult:
        try:
            response = httpx.post(
                self.base_url + "/send",
                json={"to": mobile, "body": text},
                timeout=self.timeout_s,
            )
        except Exception as exc:
            return SendResult(False, f"network: {exc}")
        if response.status_code != 200:
            return SendResult(False, f"http-status {response.status_code}")
        try:
            provider_id = response.json().get("id")
        except json.JSONDecodeError:
            provider_id = None
        if not provider_id:
            return SendResult(False, "malformed gateway response")
        return SendResult(True)


@dataclass
class DispatchReport:
    attempted: int = 0
    delivered: int = 0
    failed: list[tuple[int, str]] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "attempted": self.attempted,
            "delivered": self.delivered,
            "failed": [{"sms_id": i, "reason": r} for i, r in self.failed],
        }


def dispatch_pending(store: Datastore, gateway, clock: Clock | None = None) -> DispatchReport:
    """Send every pending message in id order; delivered ones flip to
    sent, failures stay pending for the next cycle."""
    clock = clock or SystemClock()
    report = DispatchReport()
    for message in store.list_pending():
        client = store.get_client(message.client_id)
        report.attempted += 1
        result = gateway.send(client.mobile, message.text)
        if result.delivered:
            store.mark_sent(message.id, clock.now())
            report.delivered += 1
        else:
            report.failed.append((message.id, result.reason))
            logger.warning("sms %d to %s failed: %s", message.id, client.mobile, result.reason)
    return report
