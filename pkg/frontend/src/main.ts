// Browser bootstrap: wires the registration form and the agent console
// to the DOM and polls the API every 2 seconds.

import { ApiClient, ApiError, Constraint } from "./api.js";
import { AgentConsole, ConsoleState } from "./console.js";
import { registrationFlow } from "./registration.js";
import {
  esc,
  renderAgents,
  renderBanner,
  renderClients,
  renderCounts,
  renderPreferences,
} from "./render.js";

const POLL_INTERVAL_MS = 2000;

const api = new ApiClient("");

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

// --- subscriber lists -------------------------------------------------------

async function refreshLists(): Promise<void> {
  try {
    const [clients, preferences] = await Promise.all([api.listClients(), api.listPreferences()]);
    el("clients").innerHTML = renderClients(clients);
    el("preferences").innerHTML = renderPreferences(preferences);
    updateCategoryOptions();
  } catch (err) {
    console.error("list refresh failed:", err);
  }
}

// --- registration form ---------------------------------------------------------

function constraintRows(): Constraint[] {
  const rows = Array.from(document.querySelectorAll<HTMLElement>("#constraints .constraint"));
  const constraints: Constraint[] = [];
  for (const row of rows) {
    const field = row.querySelector<HTMLInputElement>(".c-field")!.value.trim();
    const mode = row.querySelector<HTMLSelectElement>(".c-mode")!.value as Constraint["mode"];
    const value = row.querySelector<HTMLInputElement>(".c-value")!.value.trim();
    if (field && value) {
      constraints.push({ field, mode, value });
    }
  }
  return constraints;
}

function addConstraintRow(field = "", value = ""): void {
  const row = document.createElement("div");
  row.className = "constraint";
  row.innerHTML =
    `<input class="c-field" placeholder="field (e.g. make)" value="${esc(field)}">` +
    '<select class="c-mode"><option value="equals">equals</option>' +
    '<option value="contains">contains</option></select>' +
    `<input class="c-value" placeholder="value (e.g. Honda)" value="${esc(value)}">` +
    '<button type="button" class="c-remove">×</button>';
  row.querySelector(".c-remove")!.addEventListener("click", () => row.remove());
  el("constraints").appendChild(row);
}

let submitting = false;

async function onRegister(event: Event): Promise<void> {
  event.preventDefault();
  if (submitting) {
    return;
  }
  const feedback = el("register-feedback");
  const button = el<HTMLButtonElement>("register-submit");
  submitting = true;
  button.disabled = true;
  feedback.innerHTML = "";
  try {
    const result = await registrationFlow(api, {
      name: el<HTMLInputElement>("reg-name").value,
      mobile: el<HTMLInputElement>("reg-mobile").value,
      category: el<HTMLSelectElement>("reg-category").value,
      constraints: constraintRows(),
    });
    feedback.innerHTML = `<span class="ok">Subscribed client #${result.clientId} to preference #${result.preferenceId}.</span>`;
    await refreshLists();
  } catch (err) {
    const message =
      err instanceof ApiError ? `${err.code}: ${err.message}` : `request failed: ${err}`;
    feedback.innerHTML = `<span class="error">${esc(message)}</span>`;
  } finally {
    submitting = false;
    button.disabled = false;
  }
}

// --- agent console ---------------------------------------------------------------

const agentConsole = new AgentConsole(api, renderConsole);
let knownCategories: string[] = [];

function renderConsole(state: ConsoleState): void {
  el("banner").innerHTML = renderBanner(state);
  el("agents").innerHTML = renderAgents(state, Date.now());
  el("counters").innerHTML = renderCounts(state.counts);
  knownCategories = state.agents.map((a) => a.category);
  updateCategoryOptions();
  for (const button of document.querySelectorAll<HTMLButtonElement>("#agents button")) {
    button.addEventListener("click", () => {
      const category = button.dataset.category!;
      if (button.dataset.action === "start") {
        void agentConsole.start(category);
      } else {
        void agentConsole.stop(category);
      }
    });
  }
}

function updateCategoryOptions(): void {
  const select = el<HTMLSelectElement>("reg-category");
  const current = select.value;
  const options = knownCategories.length ? knownCategories : [current].filter(Boolean);
  select.innerHTML = options
    .map((c) => `<option value="${esc(c)}"${c === current ? " selected" : ""}>${esc(c)}</option>`)
    .join("");
}

// --- boot -----------------------------------------------------------------------

document.addEventListener("DOMContentLoaded", () => {
  el("register-form").addEventListener("submit", onRegister);
  el("add-constraint").addEventListener("click", () => addConstraintRow());
  addConstraintRow("make", "Honda");
  addConstraintRow("model", "Civic");
  void refreshLists();
  void agentConsole.poll();
  window.setInterval(() => void agentConsole.poll(), POLL_INTERVAL_MS);
});
