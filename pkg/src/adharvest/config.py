"""Application configuration: which categories to harvest, from where,
with what fetch plan, plus the rules file and the SMS gateway.

Config is a JSON file; relative paths inside it resolve against the
config file's directory.

    {
      "rules_file": "portal.rules",
      "gateway": {"mode": "mock", "sink": "sms-sink.log"},
      "categories": {
        "vehicles.cars": {
          "index_urls": ["http://127.0.0.1:8081/vehicles.cars.html"],
          "wait_interval_secs": 900,
          "fetch": {"timeout_ms": 5000, "retry_attempts": 3, "retry_delay_ms": 500}
        }
      }
    }
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .harvest_pipeline import CategoryAgentConfig, ConfigError, FetchPlan
from .match_notify import HttpGateway, MockFileGateway
from .rule_engine import RuleSet, parse_rules

__all__ = ["AppConfig", "load_config"]

DEFAULT_SINK = "sms-sink.log"


@dataclass
class AppConfig:
    rules: RuleSet
    categories: dict[str, CategoryAgentConfig]
    gateway_mode: str = "mock"  # "mock" | "http"
    gateway_sink: str = DEFAULT_SINK  # mock mode: sink filename under the data dir
    gateway_url: str = ""  # http mode

    def agent(self, category: str) -> CategoryAgentConfig:
        if category not in self.categories:
            raise ConfigError(f"category {category!r} is not configured")
        return self.categories[category]

    def build_gateway(self, data_dir: str | Path):
        if self.gateway_mode == "http":
            return HttpGateway(self.gateway_url)
        sink = Path(self.gateway_sink)
        if not sink.is_absolute():
            sink = Path(data_dir) / sink
        return MockFileGateway(sink)


def load_config(path: str | Path) -> AppConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc

    base = path.parent
    rules_file = data.get("rules_file")
    if not rules_file:
        raise ConfigError("config needs a rules_file")
    rules_path = Path(rules_file)
    if not rules_path.is_absolute():
        rules_path = base / rules_path
    try:
        rules = parse_rules(rules_path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read rules file {rules_path}: {exc}") from exc

    categories: dict[str, CategoryAgentConfig] = {}
    for name, entry in data.get("categories", {}).items():
        try:
            rule = rules.category(name)
        except KeyError:
            raise ConfigError(f"category {name!r} has no rule in {rules_path}")
        fetch = entry.get("fetch", {})
        plan = FetchPlan(
            timeout_ms=float(fetch.get("timeout_ms", 5000)),
            retry_attempts=fetch.get("retry_attempts", 3),
            retry_delay_ms=float(fetch.get("retry_delay_ms", 500)),
        )
        categories[name] = CategoryAgentConfig(
            category=name,
            index_urls=list(entry.get("index_urls", [])),
            rule=rule,
            wait_interval_secs=float(entry.get("wait_interval_secs", 900)),
            fetch_plan=plan,
        )
    if not categories:
        raise ConfigError("config defines no categories")

    gateway = data.get("gateway", {})
    mode = gateway.get("mode", "mock")
    if mode not in ("mock", "http"):
        raise ConfigError(f"unknown gateway mode {mode!r}")
    if mode == "http" and not gateway.get("url"):
        raise ConfigError("http gateway needs a url")
    return AppConfig(
        rules=rules,
        categories=categories,
        gateway_mode=mode,
        gateway_sink=gateway.get("sink", DEFAULT_SINK),
        gateway_url=gateway.get("url", ""),
    )
