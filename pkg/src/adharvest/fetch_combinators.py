"""Fault-tolerant page retrieval: plain fetches composed with fallback,
race, timeout, retry and stall combinators.

The combinator tree is evaluated by a small event loop over an injected
transport, so the same interpreter runs against the real network and
against a scripted transport on a virtual clock.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass
from urllib.parse import urlencode

import httpx

from .clocks import ManualClock
from .html_model import PageHandle, parse_html

__all__ = [
    "Fallback",
    "FetchOutcome",
    "Get",
    "Post",
    "Race",
    "Retry",
    "RetryPolicy",
    "ScriptedReply",
    "SimTransport",
    "RealTransport",
    "Stall",
    "Timeout",
    "execute",
    "get_url",
    "post_url",
]

MAX_REDIRECTS = 5
BODY_CAP = 4 * 1024 * 1024

FAIL_NETWORK = "network"
FAIL_HTTP = "http-status"
FAIL_TIMEOUT = "timeout"
FAIL_BOTH = "both-failed"
FAIL_RETRIES = "retries-exhausted"
FAIL_CANCELLED = "cancelled"


# --- service expressions -----------------------------------------------------


@dataclass(frozen=True)
class Get:
    url: str
    args: tuple[tuple[str, str], ...] = ()


@dataclass(frozen=True)
class Post:
    url: str
    args: tuple[tuple[str, str], ...] = ()


@dataclass(frozen=True)
class Fallback:
    first: "ServiceExpr"
    second: "ServiceExpr"


@dataclass(frozen=True)
class Race:
    left: "ServiceExpr"
    right: "ServiceExpr"


@dataclass(frozen=True)
class Timeout:
    ms: float
    inner: "ServiceExpr"


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int | None = 5  # None repeats forever
    delay_ms: float = 1000.0


@dataclass(frozen=True)
class Retry:
    inner: "ServiceExpr"
    policy: RetryPolicy = RetryPolicy()


@dataclass(frozen=True)
class Stall:
    pass


ServiceExpr = Get | Post | Fallback | Race | Timeout | Retry | Stall


@dataclass
class FetchOutcome:
    ok: bool
    page: PageHandle | None = None
    status: int | None = None
    elapsed_ms: float = 0.0
    reason: str | None = None

    @classmethod
    def success(cls, page: PageHandle, status: int, elapsed_ms: float) -> "FetchOutcome":
        return cls(True, page=page, status=status, elapsed_ms=elapsed_ms)

    @classmethod
    def failure(cls, reason: str, status: int | None = None) -> "FetchOutcome":
        return cls(False, status=status, reason=reason)


# --- transports ---------------------------------------------------------------


@dataclass
class TransportReply:
    status: int | None
    body: str
    url: str
    elapsed_ms: float
    error: str | None = None  # "network" when the fetch itself failed


class _Ticket:
    def done(self) -> bool:
        raise NotImplementedError

    def result(self) -> TransportReply:
        raise NotImplementedError

    def cancel(self) -> None:
        pass


class Transport:
    """Starts fetches and supplies the time base the combinators run on."""

    def start(self, method: str, url: str, args) -> _Ticket:
        raise NotImplementedError

    def now_ms(self) -> float:
        raise NotImplementedError

    def wait(self, tickets: list[_Ticket], deadline_ms: float | None) -> None:
        raise NotImplementedError


class _RealTicket(_Ticket):
    def __init__(self, transport: "RealTransport"):
        self._transport = transport
        self._reply: TransportReply | None = None
        self.cancelled = False

    def done(self) -> bool:
        return self._reply is not None

    def result(self) -> TransportReply:
        assert self._reply is not None
        return self._reply

    def cancel(self) -> None:
        self.cancelled = True  # result, if any, is discarded

    def _complete(self, reply: TransportReply) -> None:
        with self._transport._cond:
            self._reply = reply
            self._transport._cond.notify_all()


class RealTransport(Transport):
    """httpx-backed transport; each fetch runs in its own thread."""

    def __init__(self, timeout_s: float = 30.0):
        self._cond = threading.Condition()
        self._timeout_s = timeout_s
        self.request_log: list[tuple[str, str]] = []

    def start(self, method: str, url: str, args) -> _RealTicket:
        ticket = _RealTicket(self)
        with self._cond:
            self.request_log.append((method, url))
        thread = threading.Thread(
            target=self._fetch, args=(method, url, tuple(args or ()), ticket), daemon=True
        )
        thread.start()
        return ticket

    def _fetch(self, method: str, url: str, args, ticket: _RealTicket) -> None:
        started = time.monotonic()
        try:
            with httpx.Client(
                follow_redirects=True, max_redirects=MAX_REDIRECTS, timeout=self._timeout_s
            ) as client:
                if method == "GET":
                    full = url + ("?" + urlencode(list(args)) if args else "")
                    response = client.get(full)
                else:
                    response = client.post(url, data=dict(args))
            elapsed = (time.monotonic() - started) * 1000.0
            body = response.text[:BODY_CAP]
            reply = TransportReply(response.status_code, body, str(response.url), elapsed)
        except Exception as exc:  # connection refused, DNS, protocol errors
            elapsed = (time.monotonic() - started) * 1000.0
            reply = TransportReply(None, "", url, elapsed, error=f"network: {exc}")
        ticket._complete(reply)

    def now_ms(self) -> float:
        return time.monotonic() * 1000.0

    def wait(self, tickets: list[_Ticket], deadline_ms: float | None) -> None:
        with self._cond:
            while not any(t.done() for t in tickets):
                if deadline_ms is None:
                    self._cond.wait()
                    continue
                remaining = (deadline_ms - self.now_ms()) / 1000.0
                if remaining <= 0:
                    return
                self._cond.wait(remaining)


@dataclass
class ScriptedReply:
    latency_ms: float = 0.0
    status: int | None = 200
    body: str = ""
    error: str | None = None

    @classmethod
    def ok(cls, body: str, latency_ms: float = 0.0) -> "ScriptedReply":
        return cls(latency_ms=latency_ms, status=200, body=body)

    @classmethod
    def fail(cls, latency_ms: float = 0.0) -> "ScriptedReply":
        return cls(latency_ms=latency_ms, status=None, error="network: scripted")

    @classmethod
    def http(cls, status: int, body: str = "", latency_ms: float = 0.0) -> "ScriptedReply":
        return cls(latency_ms=latency_ms, status=status, body=body)


class _SimTicket(_Ticket):
    def __init__(self, reply: TransportReply, ready_at_ms: float):
        self.reply = reply
        self.ready_at_ms = ready_at_ms
        self._done = False
        self.cancelled = False

    def done(self) -> bool:
        return self._done

    def result(self) -> TransportReply:
        return self.reply

    def cancel(self) -> None:
        self.cancelled = True


class SimTransport(Transport):
    """Deterministic transport over a manual clock.

    Scripts map a url to the sequence of replies successive fetches of
    that url receive; the last entry repeats once exhausted. Unscripted
    urls behave like unreachable hosts.
    """

    def __init__(self, clock: ManualClock | None = None):
        self.clock = clock or ManualClock()
        self._scripts: dict[str, list[ScriptedReply]] = {}
        self._cursor: dict[str, int] = {}
        self.request_log: list[tuple[str, str]] = []

    def script(self, url: str, *replies: ScriptedReply) -> "SimTransport":
        self._scripts[url] = list(replies)
        return self

    def requests_to(self, url: str) -> int:
        return sum(1 for _, u in self.request_log if u == url)

    def start(self, method: str, url: str, args) -> _SimTicket:
        full = url + ("?" + urlencode(list(args)) if method == "GET" and args else "")
        self.request_log.append((method, full))
        entries = self._scripts.get(url)
        if not entries:
            scripted = ScriptedReply.fail()
        else:
            i = self._cursor.get(url, 0)
            scripted = entries[min(i, len(entries) - 1)]
            self._cursor[url] = i + 1
        reply = TransportReply(
            scripted.status, scripted.body, url, scripted.latency_ms, error=scripted.error
        )
        return _SimTicket(reply, self.clock.now_ms() + scripted.latency_ms)

    def now_ms(self) -> float:
        return self.clock.now_ms()

    def wait(self, tickets: list[_Ticket], deadline_ms: float | None) -> None:
        pending = [t for t in tickets if isinstance(t, _SimTicket) and not t.done()]
        wake_times = [t.ready_at_ms for t in pending]
        if deadline_ms is not None:
            wake_times.append(deadline_ms)
        if not wake_times:
            raise RuntimeError("simulated execution stalled with no pending events")
        self.clock.advance_to_ms(min(wake_times))
        now = self.clock.now_ms()
        for ticket in pending:
            if ticket.ready_at_ms <= now:
                ticket._done = True


# --- combinator interpreter ----------------------------------------------------


class _Run:
    def poll(self, now: float) -> FetchOutcome | None:
        raise NotImplementedError

    def collect(self, tickets: list, timers: list) -> None:
        pass

    def cancel(self) -> None:
        pass


class _FetchRun(_Run):
    def __init__(self, expr: Get | Post, transport: Transport):
        method = "GET" if isinstance(expr, Get) else "POST"
        self.url = expr.url
        self.ticket = transport.start(method, expr.url, expr.args)
        self.outcome: FetchOutcome | None = None

    def poll(self, now: float) -> FetchOutcome | None:
        if self.outcome is not None:
            return self.outcome
        if not self.ticket.done():
            return None
        reply = self.ticket.result()
        if reply.error is not None:
            self.outcome = FetchOutcome.failure(FAIL_NETWORK)
        elif 200 <= (reply.status or 0) < 300:
            page = parse_html(reply.body, reply.url)
            self.outcome = FetchOutcome.success(page, reply.status, reply.elapsed_ms)
        else:
            self.outcome = FetchOutcome.failure(FAIL_HTTP, status=reply.status)
        return self.outcome

    def collect(self, tickets, timers):
        if self.outcome is None and not self.ticket.done():
            tickets.append(self.ticket)

    def cancel(self):
        self.ticket.cancel()


class _StallRun(_Run):
    def poll(self, now):
        return None


class _FallbackRun(_Run):
    def __init__(self, expr: Fallback, transport: Transport):
        self.expr = expr
        self.transport = transport
        self.first = _start(expr.first, transport)
        self.second: _Run | None = None

    def poll(self, now):
        if self.second is None:
            result = self.first.poll(now)
            if result is None:
                return None
            if result.ok:
                return result
            self.second = _start(self.expr.second, self.transport)
        return self.second.poll(now)

    def collect(self, tickets, timers):
        (self.second or self.first).collect(tickets, timers)

    def cancel(self):
        self.first.cancel()
        if self.second is not None:
            self.second.cancel()


class _RaceRun(_Run):
    def __init__(self, expr: Race, transport: Transport):
        self.left = _start(expr.left, transport)
        self.right = _start(expr.right, transport)
        self.left_result: FetchOutcome | None = None
        self.right_result: FetchOutcome | None = None

    def poll(self, now):
        if self.left_result is None:
            self.left_result = self.left.poll(now)
        if self.right_result is None:
            self.right_result = self.right.poll(now)
        if self.left_result is not None and self.left_result.ok:
            self.right.cancel()
            return self.left_result
        if self.right_result is not None and self.right_result.ok:
            self.left.cancel()
            return self.right_result
        if self.left_result is not None and self.right_result is not None:
            return FetchOutcome.failure(FAIL_BOTH)
        return None

    def collect(self, tickets, timers):
        if self.left_result is None:
            self.left.collect(tickets, timers)
        if self.right_result is None:
            self.right.collect(tickets, timers)

    def cancel(self):
        self.left.cancel()
        self.right.cancel()


class _TimeoutRun(_Run):
    def __init__(self, expr: Timeout, transport: Transport):
        self.inner = _start(expr.inner, transport)
        self.deadline = transport.now_ms() + expr.ms
        self.expired = False

    def poll(self, now):
        if self.expired:
            return FetchOutcome.failure(FAIL_TIMEOUT)
        result = self.inner.poll(now)
        if result is not None:
            return result
        if now >= self.deadline:
            self.expired = True
            self.inner.cancel()
            return FetchOutcome.failure(FAIL_TIMEOUT)
        return None

    def collect(self, tickets, timers):
        timers.append(self.deadline)
        self.inner.collect(tickets, timers)

    def cancel(self):
        self.inner.cancel()


class _RetryRun(_Run):
    def __init__(self, expr: Retry, transport: Transport):
        self.expr = expr
        self.transport = transport
        self.attempts = 0
        self.current = _start(expr.inner, transport)
        self.next_start_ms: float | None = None

    def poll(self, now):
        policy = self.expr.policy
        if self.next_start_ms is not None:
            if now < self.next_start_ms:
                return None
            self.next_start_ms = None
            self.current = _start(self.expr.inner, self.transport)
        result = self.current.poll(now)
        if result is None:
            return None
        if result.ok:
            return result
        self.attempts += 1
        if policy.max_attempts is not None and self.attempts >= policy.max_attempts:
            return FetchOutcome.failure(FAIL_RETRIES)
        self.next_start_ms = now + policy.delay_ms
        return None

    def collect(self, tickets, timers):
        if self.next_start_ms is not None:
            timers.append(self.next_start_ms)
        else:
            self.current.collect(tickets, timers)

    def cancel(self):
        self.current.cancel()


def _start(expr: ServiceExpr, transport: Transport) -> _Run:
    if isinstance(expr, (Get, Post)):
        return _FetchRun(expr, transport)
    if isinstance(expr, Fallback):
        return _FallbackRun(expr, transport)
    if isinstance(expr, Race):
        return _RaceRun(expr, transport)
    if isinstance(expr, Timeout):
        if expr.ms <= 0:
            raise ValueError("timeout must be positive")
        return _TimeoutRun(expr, transport)
    if isinstance(expr, Retry):
        return _RetryRun(expr, transport)
    if isinstance(expr, Stall):
        return _StallRun()
    raise TypeError(f"not a service expression: {expr!r}")


def execute(expr: ServiceExpr, transport: Transport) -> FetchOutcome:
    """Evaluate a service expression to a single outcome.

    A bare Stall (or a race of stalls) under the real transport blocks
    forever by design; under the simulated transport it raises, since
    virtual time cannot advance without a pending event.
    """
    run = _start(expr, transport)
    while True:
        outcome = run.poll(transport.now_ms())
        if outcome is not None:
            return outcome
        tickets: list = []
        timers: list = []
        run.collect(tickets, timers)
        run_deadline = min(timers) if timers else None
        transport.wait(tickets, run_deadline)


def get_url(url: str, args=None, transport: Transport | None = None) -> FetchOutcome:
    """Fetch one page; 2xx parses the body, anything else is a failure."""
    return execute(Get(url, tuple(args or ())), transport or RealTransport())


def post_url(url: str, args=None, transport: Transport | None = None) -> FetchOutcome:
    return execute(Post(url, tuple(args or ())), transport or RealTransport())
