// HTML renderers: state in, markup out. All dynamic values pass through
// esc() so advert/client text can't inject markup.

import { AgentRow, ClientRow, PreferenceRow, StatusCounts } from "./api.js";
import { ConsoleState, countdownSeconds } from "./console.js";

export function esc(value: unknown): string {
  return String(value)
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

export function renderClients(rows: ClientRow[]): string {
  if (rows.length === 0) {
    return "<p class='empty'>No subscribers yet.</p>";
  }
  const body = rows
    .map(
      (c) =>
        `<tr><td>${c.id}</td><td>${esc(c.name)}</td><td>${esc(c.mobile)}</td>` +
        `<td>${c.subscriptions.map((s) => `#${s}`).join(", ") || "–"}</td></tr>`,
    )
    .join("");
  return (
    "<table><thead><tr><th>id</th><th>name</th><th>mobile</th><th>subscriptions</th></tr></thead>" +
    `<tbody>${body}</tbody></table>`
  );
}

export function renderPreferences(rows: PreferenceRow[]): string {
  if (rows.length === 0) {
    return "<p class='empty'>No preferences yet.</p>";
  }
  const body = rows
    .map((p) => {
      const constraints = p.constraints
        .map((c) => `${esc(c.field)} ${c.mode} "${esc(c.value)}"`)
        .join(" and ");
      return `<tr><td>#${p.id}</td><td>${esc(p.category)}</td><td>${constraints}</td></tr>`;
    })
    .join("");
  return (
    "<table><thead><tr><th>id</th><th>category</th><th>constraints</th></tr></thead>" +
    `<tbody>${body}</tbody></table>`
  );
}

export function renderCounts(counts: StatusCounts | null): string {
  if (!counts) {
    return "";
  }
  const cell = (label: string, value: number) =>
    `<div class="counter"><span class="value">${value}</span><span class="label">${label}</span></div>`;
  return [
    cell("adverts", counts.adverts),
    cell("pending SMS", counts.pending_sms),
    cell("sent SMS", counts.sent_sms),
    cell("clients", counts.clients),
    cell("preferences", counts.preferences),
  ].join("");
}

export function renderAgents(state: ConsoleState, nowMs: number): string {
  if (state.agents.length === 0) {
    return "<p class='empty'>No agents configured.</p>";
  }
  const rows = state.agents
    .map((agent) => {
      const busy = state.inflight.includes(agent.category) || state.degraded;
      const canStart = agent.state === "stopped" && !busy;
      const canStop = agent.state !== "stopped" && !busy;
      const wait = countdownSeconds(agent.next_run_at, nowMs);
      const detail =
        agent.state === "waiting" && wait !== null ? `next run in ${wait}s` : reportSummary(agent);
      return (
        `<tr><td>${esc(agent.category)}</td>` +
        `<td><span class="badge ${agent.state}">${agent.state}</span></td>` +
        `<td>${detail}</td>` +
        `<td><button data-action="start" data-category="${esc(agent.category)}"` +
        `${canStart ? "" : " disabled"}>start</button>` +
        `<button data-action="stop" data-category="${esc(agent.category)}"` +
        `${canStop ? "" : " disabled"}>stop</button></td></tr>`
      );
    })
    .join("");
  return (
    "<table><thead><tr><th>category</th><th>state</th><th>detail</th><th></th></tr></thead>" +
    `<tbody>${rows}</tbody></table>`
  );
}

function reportSummary(agent: AgentRow): string {
  const report = agent.last_report;
  if (!report) {
    return "";
  }
  return esc(
    `last cycle: ${report.records_new} new, ${report.records_duplicate} duplicate` +
      (report.errors.length ? `, ${report.errors.length} errors` : ""),
  );
}

export function renderBanner(state: ConsoleState): string {
  if (state.degraded) {
    return "<div class='banner error'>Connection to the service lost; controls disabled until it recovers.</div>";
  }
  if (state.actionError) {
    return `<div class='banner warn'>${esc(state.actionError)}</div>`;
  }
  return "";
}
