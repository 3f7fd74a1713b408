"""Durable stores for adverts, clients, preferences, subscriptions and
SMS messages.

Each table is one JSON Lines file under the data directory, rewritten
atomically (write temp, rename) on every mutation, so a returned
mutation is already on disk. In-memory indexes (content-hash set,
client/advert pair set) serve reads; a single lock makes every
operation atomic with respect to concurrent callers.
"""

from __future__ import annotations

import json
import os
import re
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

__all__ = [
    "AdvertRecord",
    "AlreadySent",
    "Client",
    "Datastore",
    "Preference",
    "PutResult",
    "SmsMessage",
    "StorageFailure",
    "UnknownAdvert",
    "UnknownClient",
    "UnknownMessage",
    "UnknownPreference",
    "ValidationError",
    "content_hash",
]

SMS_MAX_CHARS = 160
MOBILE_PATTERN = re.compile(r"^\+?[0-9]+$")
CONSTRAINT_MODES = ("equals", "contains")

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
UNIT_SEP = "\x1f"


class StorageFailure(Exception):
    pass


class ValidationError(Exception):
    pass


class UnknownClient(Exception):
    pass


class UnknownPreference(Exception):
    pass


class UnknownAdvert(Exception):
    pass


class UnknownMessage(Exception):
    pass


class AlreadySent(Exception):
    pass


def fnv1a_64(data: bytes) -> int:
    value = FNV_OFFSET
    for byte in data:
        value ^= byte
        value = (value * FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return value


def content_hash(category: str, fields) -> str:
    """16-hex-char FNV-1a digest over the category and the field pairs,
    case- and surrounding-whitespace-insensitive in the values."""
    pairs = fields.items() if isinstance(fields, dict) else fields
    parts = [category]
    for name, value in pairs:
        parts.append(name.lower())
        parts.append(value.strip().lower())
    return format(fnv1a_64(UNIT_SEP.join(parts).encode("utf-8")), "016x")


@dataclass
class AdvertRecord:
    id: int | None
    category: str
    fields: dict[str, str]
    source_url: str
    content_hash: str
    first_seen: datetime


@dataclass
class Preference:
    id: int | None
    category: str
    constraints: tuple[tuple[str, str, str], ...]  # (field, mode, value)


@dataclass
class Client:
    id: int | None
    name: str
    mobile: str
    subscriptions: set[int] = field(default_factory=set)


@dataclass
class SmsMessage:
    id: int
    client_id: int
    advert_id: int
    text: str
    state: str  # "pending" | "sent"
    created_at: datetime
    sent_at: datetime | None = None


@dataclass(frozen=True)
class PutResult:
    inserted: bool
    id: int


def _to_rfc3339(value: datetime) -> str:
    return value.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%f") + "Z"


def _from_rfc3339(value: str) -> datetime:
    return datetime.strptime(value, "%Y-%m-%dT%H:%M:%S.%fZ").replace(tzinfo=timezone.utc)


def canonical_constraints(constraints) -> tuple[tuple[str, str, str], ...]:
    """Validated, order-independent form used for duplicate detection."""
    if not constraints:
        raise ValidationError("preference needs at least one constraint")
    canon = []
    for name, mode, value in constraints:
        if mode not in CONSTRAINT_MODES:
            raise ValidationError(f"unknown constraint mode {mode!r}")
        canon.append((name.lower(), mode, " ".join(value.split()).lower()))
    return tuple(sorted(canon))


class Datastore:
    TABLES = ("adverts", "clients", "preferences", "subscriptions", "sms", "meta")

    def __init__(self, data_dir: str | Path):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.RLock()
        self.adverts: dict[int, AdvertRecord] = {}
        self.clients: dict[int, Client] = {}
        self.preferences: dict[int, Preference] = {}
        self.sms: dict[int, SmsMessage] = {}
        self.meta: dict[str, int] = {}
        self._hash_index: dict[str, int] = {}
        self._pair_index: set[tuple[int, int]] = set()
        self._load()

    # -- persistence -------------------------------------------------------

    def _path(self, table: str) -> Path:
        return self.data_dir / f"{table}.jsonl"

    def _load(self) -> None:
        for line in self._lines("adverts"):
            record = AdvertRecord(
                id=line["id"],
                category=line["category"],
                fields=dict(line["fields"]),
                source_url=line["source_url"],
                content_hash=line["content_hash"],
                first_seen=_from_rfc3339(line["first_seen"]),
            )
            self.adverts[record.id] = record
            self._hash_index[record.content_hash] = record.id
        for line in self._lines("clients"):
            self.clients[line["id"]] = Client(line["id"], line["name"], line["mobile"])
        for line in self._lines("preferences"):
            constraints = tuple((c["field"], c["mode"], c["value"]) for c in line["constraints"])
            self.preferences[line["id"]] = Preference(line["id"], line["category"], constraints)
        for line in self._lines("subscriptions"):
            client = self.clients.get(line["client_id"])
            if client is not None:
                client.subscriptions.add(line["preference_id"])
        for line in self._lines("sms"):
            message = SmsMessage(
                id=line["id"],
                client_id=line["client_id"],
                advert_id=line["advert_id"],
                text=line["text"],
                state=line["state"],
                created_at=_from_rfc3339(line["created_at"]),
                sent_at=_from_rfc3339(line["sent_at"]) if line["sent_at"] else None,
            )
            self.sms[message.id] = message
            self._pair_index.add((message.client_id, message.advert_id))
        for line in self._lines("meta"):
            self.meta[line["key"]] = line["value"]

    def _lines(self, table: str):
        path = self._path(table)
        if not path.exists():
            return
        with path.open(encoding="utf-8") as handle:
            for raw in handle:
                raw = raw.strip()
                if raw:
                    yield json.loads(raw)

    def _save(self, table: str) -> None:
        rows = {
            "adverts": lambda: [
                {
                    "id": r.id,
                    "category": r.category,
                    "fields": r.fields,
                    "source_url": r.source_url,
                    "content_hash": r.content_hash,
                    "first_seen": _to_rfc3339(r.first_seen),
                }
                for r in self._ordered(self.adverts)
            ],
            "clients": lambda: [
                {"id": c.id, "name": c.name, "mobile": c.mobile}
                for c in self._ordered(self.clients)
            ],
            "preferences": lambda: [
                {
                    "id": p.id,
                    "category": p.category,
                    "constraints": [
                        {"field": f, "mode": m, "value": v} for f, m, v in p.constraints
                    ],
                }
                for p in self._ordered(self.preferences)
            ],
            "subscriptions": lambda: [
                {"client_id": c.id, "preference_id": pref_id}
                for c in self._ordered(self.clients)
                for pref_id in sorted(c.subscriptions)
            ],
            "sms": lambda: [
                {
                    "id": m.id,
                    "client_id": m.client_id,
                    "advert_id": m.advert_id,
                    "text": m.text,
                    "state": m.state,
                    "created_at": _to_rfc3339(m.created_at),
                    "sent_at": _to_rfc3339(m.sent_at) if m.sent_at else None,
                }
                for m in self._ordered(self.sms)
            ],
            "meta": lambda: [
                {"key": k, "value": v} for k, v in sorted(self.meta.items())
            ],
        }[table]()
        payload = "".join(json.dumps(row, ensure_ascii=False) + "\n" for row in rows)
        tmp = self._path(table).with_suffix(".jsonl.tmp")
        try:
            tmp.write_text(payload, encoding="utf-8")
            os.replace(tmp, self._path(table))
        except OSError as exc:
            raise StorageFailure(f"writing {table}: {exc}") from exc

    @staticmethod
    def _ordered(table: dict):
        return [table[key] for key in sorted(table)]

    def _next_id(self, table: dict) -> int:
        return max(table, default=0) + 1

    # -- adverts -------------------------------------------------------------

    def put_advert(self, record: AdvertRecord) -> PutResult:
        if not record.category:
            raise ValidationError("advert category must be non-empty")
        with self._lock:
            existing = self._hash_index.get(record.content_hash)
            if existing is not None:
                return PutResult(False, existing)
            advert_id = self._next_id(self.adverts)
            stored = AdvertRecord(
                id=advert_id,
                category=record.category,
                fields=dict(record.fields),
                source_url=record.source_url,
                content_hash=record.content_hash,
                first_seen=record.first_seen,
            )
            self.adverts[advert_id] = stored
            self._hash_index[record.content_hash] = advert_id
            self._save("adverts")
            return PutResult(True, advert_id)

    def get_advert(self, advert_id: int) -> AdvertRecord:
        with self._lock:
            if advert_id not in self.adverts:
                raise UnknownAdvert(str(advert_id))
            return self.adverts[advert_id]

    def list_adverts(self, category: str | None = None, since_id: int = 0) -> list[AdvertRecord]:
        with self._lock:
            return [
                r
                for r in self._ordered(self.adverts)
                if r.id > since_id and (category is None or r.category == category)
            ]

    # -- clients and preferences ---------------------------------------------

    def put_client(self, name: str, mobile: str) -> PutResult:
        if not name.strip():
            raise ValidationError("client name must be non-empty")
        if not MOBILE_PATTERN.match(mobile):
            raise ValidationError(f"bad mobile number {mobile!r}")
        with self._lock:
            for client in self.clients.values():
                if client.name == name and client.mobile == mobile:
                    return PutResult(False, client.id)
            client_id = self._next_id(self.clients)
            self.clients[client_id] = Client(client_id, name, mobile)
            self._save("clients")
            return PutResult(True, client_id)

    def get_client(self, client_id: int) -> Client:
        with self._lock:
            if client_id not in self.clients:
                raise UnknownClient(str(client_id))
            return self.clients[client_id]

    def list_clients(self) -> list[Client]:
        with self._lock:
            return self._ordered(self.clients)

    def put_preference(self, category: str, constraints) -> PutResult:
        if not category:
            raise ValidationError("preference category must be non-empty")
        canon = canonical_constraints(constraints)
        with self._lock:
            for pref in self.preferences.values():
                if pref.category == category and canonical_constraints(pref.constraints) == canon:
                    return PutResult(False, pref.id)
            pref_id = self._next_id(self.preferences)
            stored = tuple((str(f), str(m), str(v)) for f, m, v in constraints)
            self.preferences[pref_id] = Preference(pref_id, category, stored)
            self._save("preferences")
            return PutResult(True, pref_id)

    def get_preference(self, pref_id: int) -> Preference:
        with self._lock:
            if pref_id not in self.preferences:
                raise UnknownPreference(str(pref_id))
            return self.preferences[pref_id]

    def list_preferences(self) -> list[Preference]:
        with self._lock:
            return self._ordered(self.preferences)

    def subscribe(self, client_id: int, pref_id: int) -> None:
        with self._lock:
            if client_id not in self.clients:
                raise UnknownClient(str(client_id))
            if pref_id not in self.preferences:
                raise UnknownPreference(str(pref_id))
            client = self.clients[client_id]
            if pref_id not in client.subscriptions:
                client.subscriptions.add(pref_id)
                self._save("subscriptions")

    def subscribers_of(self, pref_id: int) -> list[Client]:
        with self._lock:
            return [c for c in self._ordered(self.clients) if pref_id in c.subscriptions]

    # -- sms -------------------------------------------------------------------

    def already_notified(self, client_id: int, advert_id: int) -> bool:
        with self._lock:
            if client_id not in self.clients:
                raise UnknownClient(str(client_id))
            if advert_id not in self.adverts:
                raise UnknownAdvert(str(advert_id))
            return (client_id, advert_id) in self._pair_index

    def enqueue_sms(self, client_id: int, advert_id: int, text: str, created_at: datetime) -> PutResult:
        if len(text) > SMS_MAX_CHARS:
            raise ValidationError(f"sms text is {len(text)} chars, limit {SMS_MAX_CHARS}")
        with self._lock:
            if client_id not in self.clients:
                raise UnknownClient(str(client_id))
            if advert_id not in self.adverts:
                raise UnknownAdvert(str(advert_id))
            if (client_id, advert_id) in self._pair_index:
                existing = next(
                    m.id
                    for m in self.sms.values()
                    if m.client_id == client_id and m.advert_id == advert_id
                )
                return PutResult(False, existing)
            sms_id = self._next_id(self.sms)
            self.sms[sms_id] = SmsMessage(sms_id, client_id, advert_id, text, "pending", created_at)
            self._pair_index.add((client_id, advert_id))
            self._save("sms")
            return PutResult(True, sms_id)

    def mark_sent(self, sms_id: int, sent_at: datetime) -> None:
        with self._lock:
            message = self.sms.get(sms_id)
            if message is None:
                raise UnknownMessage(str(sms_id))
            if message.state == "sent":
                raise AlreadySent(str(sms_id))
            message.state = "sent"
            message.sent_at = sent_at
            self._save("sms")

    def list_pending(self) -> list[SmsMessage]:
        with self._lock:
            return [m for m in self._ordered(self.sms) if m.state == "pending"]

    def list_sent(self) -> list[SmsMessage]:
        with self._lock:
            return [m for m in self._ordered(self.sms) if m.state == "sent"]

    # -- status ------------------------------------------------------------------

    def counts(self) -> dict[str, int]:
        with self._lock:
            return {
                "adverts": len(self.adverts),
                "clients": len(self.clients),
                "preferences": len(self.preferences),
                "subscriptions": sum(len(c.subscriptions) for c in self.clients.values()),
                "pending_sms": sum(1 for m in self.sms.values() if m.state == "pending"),
                "sent_sms": sum(1 for m in self.sms.values() if m.state == "sent"),
            }

    def get_cursor(self, key: str, default: int = 0) -> int:
        with self._lock:
            return self.meta.get(key, default)

    def set_cursor(self, key: str, value: int) -> None:
        with self._lock:
            self.meta[key] = value
            self._save("meta")
