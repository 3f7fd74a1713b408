import threading
from datetime import date, timedelta
from pathlib import Path

import pytest

from adharvest.clocks import ManualClock
from adharvest.datastore import Datastore
from adharvest.dates import BadFormat
from adharvest.fetch_combinators import RealTransport, ScriptedReply, SimTransport
from adharvest.fixture_portal import FixtureSpec, load_spec, serve_fixture
from adharvest.harvest_pipeline import (
    AgentRunner,
    CategoryAgentConfig,
    ConfigError,
    FetchPlan,
    harvest_category,
    run_agent_loop,
    today_pattern,
)
from adharvest.rule_engine import parse_rules

TODAY = date(2006, 3, 7)
REPO = Path(__file__).parent.parent
RULES = parse_rules((REPO / "fixtures" / "portal.rules").read_text())


def pinned_clock():
    return ManualClock()  # starts at 2006-03-07 12:00 UTC


def cars_config(portal, **overrides):
    defaults = dict(
        category="vehicles.cars",
        index_urls=[portal.url_for("vehicles.cars")],
        rule=RULES.category("vehicles.cars"),
        fetch_plan=FetchPlan(timeout_ms=5000, retry_attempts=1),
    )
    defaults.update(overrides)
    return CategoryAgentConfig(**defaults)


@pytest.fixture
def portal():
    with serve_fixture(load_spec(REPO / "fixtures" / "portal.json"), TODAY) as p:
        yield p


@pytest.fixture
def store(tmp_path):
    return Datastore(tmp_path / "data")


# --- today_pattern -------------------------------------------------------------


def test_today_pattern_slashes():
    assert today_pattern("dd/MM/yyyy", pinned_clock()) == "07/03/2006"


def test_today_pattern_escapes_literal_dots():
    assert today_pattern("dd\\.MM\\.yyyy", pinned_clock()) == "07\\.03\\.2006"


def test_today_pattern_unknown_token():
    with pytest.raises(BadFormat):
        today_pattern("QQ", pinned_clock())


# --- date-gated link qualification ----------------------------------------------


MIXED_SPEC = FixtureSpec(
    categories={
        "cars": {
            "layout": "table",
            "ads": [
                {"id": "n1", "posted": "{today}", "fields": {"title": "A1", "price": "Rs 1"}},
                {"id": "n2", "posted": "{today}", "fields": {"title": "A2", "price": "Rs 2"}},
                {"id": "n3", "posted": "{today}", "fields": {"title": "A3", "price": "Rs 3"}},
                {"id": "o1", "posted": "2006-03-06", "fields": {"title": "O1", "price": "Rs 4"}},
                {"id": "o2", "posted": "2006-03-06", "fields": {"title": "O2", "price": "Rs 5"}},
            ],
        }
    }
)

MIXED_RULE = parse_rules(
    """
category cars {
  date_format: "dd/MM/yyyy"
  list: elem(div) contain elem(h1)
  title = pcdata() inside elem(h1)
  price = (pcdata() inside elem(td)) after pat("Price")
  date = (pcdata() inside elem(td)) after pat("Posted")
  contacts = (pcdata() inside elem(td)) after pat("Contact")
}
"""
).category("cars")


def test_harvest_counts_only_today_links(store):
    with serve_fixture(MIXED_SPEC, TODAY) as portal:
        cfg = CategoryAgentConfig(
            category="cars",
            index_urls=[portal.url_for("cars")],
            rule=MIXED_RULE,
            fetch_plan=FetchPlan(retry_attempts=1),
        )
        report = harvest_category(cfg, store, pinned_clock(), RealTransport())
    assert report.links_visited == 1
    assert report.links_matched_today == 3
    assert report.records_new == 3
    assert report.records_duplicate == 0
    assert report.records_extracted == report.records_new + report.records_duplicate
    assert report.errors == []


def test_date_gate_never_fetches_stale_ads(store):
    with serve_fixture(MIXED_SPEC, TODAY) as portal:
        cfg = CategoryAgentConfig(
            category="cars",
            index_urls=[portal.url_for("cars")],
            rule=MIXED_RULE,
            fetch_plan=FetchPlan(retry_attempts=1),
        )
        harvest_category(cfg, store, pinned_clock(), RealTransport())
        fetched = {path for _, path in portal.request_log}
    assert "/ads/n1.html" in fetched
    assert "/ads/o1.html" not in fetched and "/ads/o2.html" not in fetched
    stored_titles = {a.fields["title"] for a in store.list_adverts()}
    assert stored_titles == {"A1", "A2", "A3"}


def test_harvest_no_date_matches_skips_extraction(store):
    with serve_fixture(MIXED_SPEC, date(2007, 1, 1)) as portal:
        # portal renders dates for 2007-01-01 but the clock says 2006-03-08
        clock = ManualClock(start=__import__("datetime").datetime(2006, 3, 8, tzinfo=__import__("datetime").timezone.utc))
        cfg = CategoryAgentConfig(
            category="cars",
            index_urls=[portal.url_for("cars")],
            rule=MIXED_RULE,
            fetch_plan=FetchPlan(retry_attempts=1),
        )
        report = harvest_category(cfg, store, clock, RealTransport())
        ad_fetches = [p for _, p in portal.request_log if p.startswith("/ads/")]
    assert report.links_matched_today == 0
    assert report.records_extracted == 0
    assert ad_fetches == []


def test_harvest_idempotent_on_unchanged_fixture(store, portal):
    cfg = cars_config(portal)
    clock = pinned_clock()
    first = harvest_category(cfg, store, clock, RealTransport())
    second = harvest_category(cfg, store, clock, RealTransport())
    assert first.records_new == 4  # four of the five car ads are dated today
    assert second.records_new == 0
    assert second.records_duplicate == first.records_new
    assert store.counts()["adverts"] == first.records_new


def test_records_new_equals_table_growth(store, portal):
    cfg = cars_config(portal)
    before = store.counts()["adverts"]
    report = harvest_category(cfg, store, pinned_clock(), RealTransport())
    assert store.counts()["adverts"] - before == report.records_new


def test_unreachable_url_is_isolated(store, portal):
    dead = "http://127.0.0.1:1/dead.html"
    cfg = cars_config(portal, index_urls=[dead, portal.url_for("vehicles.cars")])
    report = harvest_category(cfg, store, pinned_clock(), RealTransport())
    assert report.links_visited == 2
    assert [url for url, _ in report.errors] == [dead]
    assert report.records_new == 4  # healthy url unaffected


def test_anchor_window_fallback_branch(store):
    clock = pinned_clock()
    near = '<a href="/ads/x.html">go</a> posted 07/03/2006'
    far = '<a href="/ads/y.html">go</a>' + " " * 250 + "07/03/2006"
    transport = SimTransport(clock)
    transport.script("http://idx/near", ScriptedReply.ok(near))
    transport.script("http://idx/far", ScriptedReply.ok(far))
    transport.script("http://idx/ads/x.html", ScriptedReply.ok("<div><h1>t</h1></div>"))
    for url, expected in (("http://idx/near", 1), ("http://idx/far", 0)):
        cfg = CategoryAgentConfig(
            category="cars",
            index_urls=[url],
            rule=MIXED_RULE,
            fetch_plan=FetchPlan(retry_attempts=1, timeout_ms=0),
        )
        report = harvest_category(cfg, store, clock, transport)
        assert report.links_matched_today == expected, url


def test_config_validation():
    with pytest.raises(ConfigError):
        CategoryAgentConfig(category="cars", index_urls=[], rule=MIXED_RULE)
    with pytest.raises(ConfigError):
        CategoryAgentConfig(
            category="other", index_urls=["http://x/"], rule=MIXED_RULE
        )
    with pytest.raises(ConfigError):
        CategoryAgentConfig(
            category="cars", index_urls=["http://x/"], rule=MIXED_RULE, wait_interval_secs=0
        )


# --- the agent loop ---------------------------------------------------------------


def empty_index_transport(clock):
    transport = SimTransport(clock)
    transport.script("http://idx/cars.html", ScriptedReply.ok("<table></table>"))
    return transport


def loop_config():
    return CategoryAgentConfig(
        category="cars",
        index_urls=["http://idx/cars.html"],
        rule=MIXED_RULE,
        wait_interval_secs=900,
        fetch_plan=FetchPlan(retry_attempts=1, timeout_ms=0),
    )


def test_agent_loop_cycles_exactly_900s_apart(store):
    clock = ManualClock()
    stop = threading.Event()
    reports = []

    def on_report(report):
        reports.append(report)
        if len(reports) == 3:
            stop.set()

    run_agent_loop(
        loop_config(), store, clock, stop, empty_index_transport(clock), on_report=on_report
    )
    assert len(reports) == 3
    starts = [r.started for r in reports]
    assert starts[1] - starts[0] == timedelta(seconds=900)
    assert starts[2] - starts[1] == timedelta(seconds=900)


def test_agent_loop_stop_during_wait(store):
    clock = ManualClock()
    stop = threading.Event()
    statuses = []
    reports = []

    def on_report(report):
        reports.append(report)
        stop.set()  # set while the loop is about to wait

    run_agent_loop(
        loop_config(),
        store,
        clock,
        stop,
        empty_index_transport(clock),
        on_status=statuses.append,
        on_report=on_report,
    )
    assert len(reports) == 1
    assert statuses[0].state == "running"
    assert statuses[-1].state == "stopped"


def test_agent_loop_status_waiting_has_next_run(store):
    clock = ManualClock()
    stop = threading.Event()
    statuses = []
    count = [0]

    def on_report(report):
        count[0] += 1
        if count[0] == 2:
            stop.set()

    run_agent_loop(
        loop_config(),
        store,
        clock,
        stop,
        empty_index_transport(clock),
        on_status=statuses.append,
        on_report=on_report,
    )
    waiting = [s for s in statuses if s.state == "waiting"]
    assert waiting and all(s.next_run_at is not None for s in waiting)
    others = [s for s in statuses if s.state != "waiting"]
    assert all(s.next_run_at is None for s in others)


def test_agent_loop_survives_cycle_errors(store):
    clock = ManualClock()
    stop = threading.Event()
    transport = SimTransport(clock)  # unscripted: every fetch fails
    reports = []

    def on_report(report):
        reports.append(report)
        if len(reports) == 2:
            stop.set()

    run_agent_loop(loop_config(), store, clock, stop, transport, on_report=on_report)
    assert len(reports) == 2
    assert all(r.errors for r in reports)


def test_agent_runner_start_stop(store):
    clock = ManualClock()
    runner = AgentRunner(loop_config(), store, clock, empty_index_transport(clock))
    assert runner.status().state == "stopped"
    runner.start()
    with pytest.raises(RuntimeError):
        runner.start()
    runner.stop()
    assert not runner.running
    with pytest.raises(RuntimeError):
        runner.stop()
    assert runner.status().state == "stopped"
