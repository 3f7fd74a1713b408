"""Per-category harvesting agents.

Each cycle walks the configured index urls, looks for the current date
on the page, follows only ad links whose surroundings carry a match,
extracts records from those ad pages, and stores the ones not already
present. Between cycles the agent sleeps for its wait interval until
stopped.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from urllib.parse import urljoin

from .clocks import Clock
from .datastore import Datastore
from .dates import today_regex
from .fetch_combinators import (
    FetchOutcome,
    Get,
    Retry,
    RetryPolicy,
    ServiceExpr,
    Timeout,
    Transport,
    execute,
)
from .html_model import PageHandle, Piece
from .markup_algebra import PieceSet, elem, pat
from .rule_engine import CategoryRule, extract_records, nsl_to_advert

logger = logging.getLogger(__name__)

__all__ = [
    "AgentRunner",
    "AgentStatus",
    "CategoryAgentConfig",
    "ConfigError",
    "FetchPlan",
    "HarvestReport",
    "extract_latest",
    "harvest_category",
    "run_agent_loop",
    "today_pattern",
]

# An anchor qualifies if a date match lies inside its nearest enclosing
# element among these; otherwise within this many characters after it.
ANCHOR_CONTAINERS = frozenset({"tr", "li", "p", "div"})
ANCHOR_WINDOW = 200

DEFAULT_WAIT_SECS = 900.0


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class FetchPlan:
    """Template for the service expression wrapped around each fetch."""

    timeout_ms: float = 5000.0
    retry_attempts: int | None = 3
    retry_delay_ms: float = 500.0

    def expr_for(self, url: str) -> ServiceExpr:
        expr: ServiceExpr = Get(url)
        if self.timeout_ms:
            expr = Timeout(self.timeout_ms, expr)
        if self.retry_attempts != 1:
            expr = Retry(expr, RetryPolicy(self.retry_attempts, self.retry_delay_ms))
        return expr


@dataclass
class CategoryAgentConfig:
    category: str
    index_urls: list[str]
    rule: CategoryRule
    wait_interval_secs: float = DEFAULT_WAIT_SECS
    fetch_plan: FetchPlan = field(default_factory=FetchPlan)

    def __post_init__(self):
        if not self.index_urls:
            raise ConfigError(f"category {self.category}: no index urls")
        if self.wait_interval_secs <= 0:
            raise ConfigError(f"category {self.category}: wait interval must be positive")
        if self.rule.name != self.category:
            raise ConfigError(
                f"category {self.category}: rule is for {self.rule.name}"
            )


@dataclass
class HarvestReport:
    category: str
    started: datetime
    finished: datetime | None = None
    links_visited: int = 0
    links_matched_today: int = 0
    records_extracted: int = 0
    records_new: int = 0
    records_duplicate: int = 0
    errors: list[tuple[str, str]] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "category": self.category,
            "started": self.started.isoformat(),
            "finished": self.finished.isoformat() if self.finished else None,
            "links_visited": self.links_visited,
            "links_matched_today": self.links_matched_today,
            "records_extracted": self.records_extracted,
            "records_new": self.records_new,
            "records_duplicate": self.records_duplicate,
            "errors": [{"url": u, "reason": r} for u, r in self.errors],
        }


@dataclass
class AgentStatus:
    category: str
    state: str  # "stopped" | "running" | "waiting" | "error"
    last_report: HarvestReport | None = None
    next_run_at: datetime | None = None

    def as_dict(self) -> dict:
        return {
            "category": self.category,
            "state": self.state,
            "last_report": self.last_report.as_dict() if self.last_report else None,
            "next_run_at": self.next_run_at.isoformat() if self.next_run_at else None,
        }


def today_pattern(date_format: str, clock: Clock) -> str:
    """Regex matching today's date rendered in the given format."""
    return today_regex(clock.today(), date_format)


def _nearest_container(page: PageHandle, node_id: int) -> Piece | None:
    nid = page.nodes[node_id].parent
    while nid is not None:
        node = page.nodes[nid]
        if node.name in ANCHOR_CONTAINERS:
            return Piece(page, node.span[0], node.span[1], anchor=nid)
        nid = node.parent
    return None


def _anchor_qualifies(page: PageHandle, anchor: Piece, date_matches: PieceSet) -> bool:
    container = _nearest_container(page, anchor.anchor)
    if container is not None:
        return any(
            container.start <= m.start and m.end <= container.end for m in date_matches
        )
    window_end = anchor.end + ANCHOR_WINDOW
    return any(anchor.end <= m.start <= window_end for m in date_matches)


def _fetch(url: str, plan: FetchPlan, transport: Transport) -> FetchOutcome:
    return execute(plan.expr_for(url), transport)


def harvest_category(
    cfg: CategoryAgentConfig,
    store: Datastore,
    clock: Clock,
    transport: Transport,
) -> HarvestReport:
    """One pass over the category's links queue.

    Per index url: fetch, find matches of today's date, qualify ad
    anchors by date proximity, and extract from the qualifying links.
    Counts only records that survive the all-empty filter; fetch
    failures are recorded per url and never abort the rest."""
    report = HarvestReport(category=cfg.category, started=clock.now())
    date_pattern = today_pattern(cfg.rule.date_format, clock)
    for index_url in cfg.index_urls:
        report.links_visited += 1
        outcome = _fetch(index_url, cfg.fetch_plan, transport)
        if not outcome.ok:
            report.errors.append((index_url, outcome.reason))
            logger.warning("index fetch failed: %s (%s)", index_url, outcome.reason)
            continue
        page = outcome.page
        date_matches = pat(page, date_pattern)
        ad_links: list[str] = []
        for anchor in elem(page, "a"):
            if not _anchor_qualifies(page, anchor, date_matches):
                continue
            report.links_matched_today += 1
            href = page.nodes[anchor.anchor].attrs.get("href", "")
            if href:
                link = urljoin(index_url, href)
                if link not in ad_links:
                    ad_links.append(link)
        for link in ad_links:
            new, duplicate = extract_latest(link, cfg, store, clock, transport, report)
            report.records_new += new
            report.records_duplicate += duplicate
            report.records_extracted += new + duplicate
    report.finished = clock.now()
    return report


def extract_latest(
    link: str,
    cfg: CategoryAgentConfig,
    store: Datastore,
    clock: Clock,
    transport: Transport,
    report: HarvestReport | None = None,
) -> tuple[int, int]:
    """Fetch one ad page, extract its records, store the unseen ones.
    Returns (new, duplicate); all-empty records are dropped."""
    outcome = _fetch(link, cfg.fetch_plan, transport)
    if not outcome.ok:
        if report is not None:
            report.errors.append((link, outcome.reason))
        logger.warning("ad fetch failed: %s (%s)", link, outcome.reason)
        return 0, 0
    records = extract_records(outcome.page, cfg.rule, clock.today())
    new = duplicate = 0
    for nsl in records:
        advert = nsl_to_advert(nsl, cfg.rule, link, clock.now())
        if all(value == "" for value in advert.fields.values()):
            continue
        if store.put_advert(advert).inserted:
            new += 1
        else:
            duplicate += 1
    return new, duplicate


def run_agent_loop(
    cfg: CategoryAgentConfig,
    store: Datastore,
    clock: Clock,
    stop: threading.Event,
    transport: Transport,
    on_status=None,
    on_report=None,
) -> None:
    """Harvest, wait, repeat until the stop signal; per-cycle errors stay
    in the reports and never escape the loop."""

    def publish(status: AgentStatus) -> None:
        if on_status is not None:
            on_status(status)

    last_report: HarvestReport | None = None
    while not stop.is_set():
        publish(AgentStatus(cfg.category, "running", last_report))
        try:
            last_report = harvest_category(cfg, store, clock, transport)
        except Exception as exc:  # defensive: a cycle must not kill the agent
            logger.exception("harvest cycle failed for %s", cfg.category)
            last_report = HarvestReport(cfg.category, started=clock.now(), finished=clock.now())
            last_report.errors.append(("*", f"cycle error: {exc}"))
        if on_report is not None:
            on_report(last_report)
        if stop.is_set():
            break
        next_run_at = clock.now() + timedelta(seconds=cfg.wait_interval_secs)
        publish(AgentStatus(cfg.category, "waiting", last_report, next_run_at))
        deadline_ms = clock.now_ms() + cfg.wait_interval_secs * 1000.0
        if clock.wait_until_ms(deadline_ms, stop):
            break
    publish(AgentStatus(cfg.category, "stopped", last_report))


class AgentRunner:
    """Owns one agent thread and its latest status."""

    def __init__(
        self,
        cfg: CategoryAgentConfig,
        store: Datastore,
        clock: Clock,
        transport: Transport,
        on_report=None,
    ):
        self.cfg = cfg
        self.store = store
        self.clock = clock
        self.transport = transport
        self.on_report = on_report
        self._lock = threading.Lock()
        self._status = AgentStatus(cfg.category, "stopped")
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    @property
    def running(self) -> bool:
        return self._thread is not None and self._thread.is_alive()

    def status(self) -> AgentStatus:
        with self._lock:
            return self._status

    def _publish(self, status: AgentStatus) -> None:
        with self._lock:
            self._status = status

    def start(self) -> None:
        if self.running:
            raise RuntimeError(f"agent {self.cfg.category} already running")
        self._stop = threading.Event()
        # publish before the thread does, so a status read right after
        # start never reports stopped
        with self._lock:
            self._status = AgentStatus(self.cfg.category, "running", self._status.last_report)
        self._thread = threading.Thread(
            target=run_agent_loop,
            args=(self.cfg, self.store, self.clock, self._stop, self.transport),
            kwargs={"on_status": self._publish, "on_report": self.on_report},
            daemon=True,
            name=f"agent-{self.cfg.category}",
        )
        self._thread.start()

    def stop(self, join_timeout: float = 10.0) -> None:
        if not self.running:
            raise RuntimeError(f"agent {self.cfg.category} not running")
        self._stop.set()
        self._thread.join(join_timeout)
