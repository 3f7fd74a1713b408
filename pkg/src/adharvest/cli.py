"""Command line entry points.

    adharvest serve    --config F --data D --port P [--ui-dir DIR]
    adharvest run-once [--category C] --config F --data D [--today YYYY-MM-DD]
    adharvest extract  --url U --rules F --category C [--today YYYY-MM-DD]
    adharvest portal   --spec F [--today YYYY-MM-DD] [--port P]

run-once performs one harvest+analyze+dispatch cycle and prints the
reports as JSON; extract prints extracted records without touching any
store; portal serves the fixture portal in the foreground.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from datetime import date, datetime, timezone
from pathlib import Path

from .clocks import Clock, ManualClock, SystemClock
from .config import load_config
from .datastore import Datastore
from .fetch_combinators import RealTransport, get_url
from .fixture_portal import load_spec, serve_fixture
from .harvest_pipeline import ConfigError, harvest_category
from .match_notify import analyze_new, dispatch_pending
from .rule_engine import extract_records, nsl_to_advert, parse_rules
from .service_api import ServiceHost, create_app


def _clock_for(today: str | None) -> Clock:
    if today is None:
        return SystemClock()
    pinned = datetime.strptime(today, "%Y-%m-%d").replace(hour=12, tzinfo=timezone.utc)
    return ManualClock(start=pinned)


def _data_dir(args) -> Path:
    data = args.data or os.environ.get("HARVEST_DATA_DIR")
    if not data:
        raise ConfigError("no data directory: pass --data or set HARVEST_DATA_DIR")
    return Path(data)


def cmd_serve(args) -> int:
    config = load_config(args.config)
    store = Datastore(_data_dir(args))
    host = ServiceHost(store, config)
    ui_dir = args.ui_dir if args.ui_dir and Path(args.ui_dir).is_dir() else None
    app = create_app(host, ui_dir=ui_dir)
    import uvicorn

    try:
        uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    finally:
        host.stop_all()
    return 0


def cmd_run_once(args) -> int:
    config = load_config(args.config)
    store = Datastore(_data_dir(args))
    clock = _clock_for(args.today)
    transport = RealTransport()
    names = [args.category] if args.category else sorted(config.categories)
    harvests = []
    for name in names:
        cfg = config.agent(name)
        harvests.append(harvest_category(cfg, store, clock, transport).as_dict())
    created, high_water = analyze_new(store, clock=clock)
    gateway = config.build_gateway(store.data_dir)
    dispatched = dispatch_pending(store, gateway, clock=clock)
    print(
        json.dumps(
            {
                "harvests": harvests,
                "analyze": {"pending_created": created, "high_water": high_water},
                "dispatch": dispatched.as_dict(),
            },
            indent=2,
        )
    )
    return 0


def cmd_extract(args) -> int:
    rules = parse_rules(Path(args.rules).read_text(encoding="utf-8"))
    try:
        rule = rules.category(args.category)
    except KeyError:
        raise ConfigError(f"no rule for category {args.category!r} in {args.rules}")
    clock = _clock_for(args.today)
    outcome = get_url(args.url)
    if not outcome.ok:
        print(f"fetch failed: {outcome.reason}", file=sys.stderr)
        return 1
    records = extract_records(outcome.page, rule, clock.today())
    adverts = [
        nsl_to_advert(nsl, rule, args.url, clock.now()) for nsl in records
    ]
    print(
        json.dumps(
            [
                {
                    "category": a.category,
                    "fields": a.fields,
                    "source_url": a.source_url,
                    "content_hash": a.content_hash,
                }
                for a in adverts
            ],
            indent=2,
        )
    )
    return 0


def cmd_portal(args) -> int:
    spec = load_spec(args.spec)
    today = date.fromisoformat(args.today) if args.today else date.today()
    portal = serve_fixture(spec, today, port=args.port)
    print(f"fixture portal at {portal.base_url} (today = {today})", flush=True)
    try:
        portal._thread.join()
    except KeyboardInterrupt:
        portal.close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adharvest")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the API and agent host")
    serve.add_argument("--config", required=True)
    serve.add_argument("--data", default=None)
    serve.add_argument("--port", type=int, default=8080)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--ui-dir", default="frontend/dist")
    serve.set_defaults(func=cmd_serve)

    once = sub.add_parser("run-once", help="one harvest+analyze+dispatch cycle")
    once.add_argument("--category", default=None)
    once.add_argument("--config", required=True)
    once.add_argument("--data", default=None)
    once.add_argument("--today", default=None, metavar="YYYY-MM-DD")
    once.set_defaults(func=cmd_run_once)

    extract = sub.add_parser("extract", help="extract records from one url")
    extract.add_argument("--url", required=True)
    extract.add_argument("--rules", required=True)
    extract.add_argument("--category", required=True)
    extract.add_argument("--today", default=None, metavar="YYYY-MM-DD")
    extract.set_defaults(func=cmd_extract)

    portal = sub.add_parser("portal", help="serve the fixture portal")
    portal.add_argument("--spec", required=True)
    portal.add_argument("--today", default=None, metavar="YYYY-MM-DD")
    portal.add_argument("--port", type=int, default=0)
    portal.set_defaults(func=cmd_portal)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
