// Typed client for the harvesting service API. Every non-2xx response
// carries {code, message}, surfaced here as ApiError.

export interface ClientRow {
  id: number;
  name: string;
  mobile: string;
  subscriptions: number[];
}

export interface Constraint {
  field: string;
  mode: "equals" | "contains";
  value: string;
}

export interface PreferenceRow {
  id: number;
  category: string;
  constraints: Constraint[];
}

export interface HarvestReport {
  category: string;
  started: string;
  finished: string | null;
  links_visited: number;
  links_matched_today: number;
  records_extracted: number;
  records_new: number;
  records_duplicate: number;
  errors: { url: string; reason: string }[];
}

export type AgentState = "stopped" | "running" | "waiting" | "error";

export interface AgentRow {
  category: string;
  state: AgentState;
  last_report: HarvestReport | null;
  next_run_at: string | null;
}

export interface StatusCounts {
  adverts: number;
  clients: number;
  preferences: number;
  subscriptions: number;
  pending_sms: number;
  sent_sms: number;
}

export interface StatusResponse {
  counts: StatusCounts;
  agents: AgentRow[];
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export class ApiClient {
  constructor(readonly baseUrl: string = "") {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await fetch(this.baseUrl + path, {
      method,
      headers: body === undefined ? {} : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) {
      let code = "error";
      let message = `${response.status}`;
      try {
        const data = await response.json();
        code = data.code ?? code;
        message = data.message ?? message;
      } catch {
        // non-JSON error body: keep the status text
      }
      throw new ApiError(response.status, code, message);
    }
    return (await response.json()) as T;
  }

  createClient(name: string, mobile: string): Promise<{ id: number }> {
    return this.request("POST", "/clients", { name, mobile });
  }

  listClients(): Promise<ClientRow[]> {
    return this.request("GET", "/clients");
  }

  createPreference(category: string, constraints: Constraint[]): Promise<{ id: number }> {
    return this.request("POST", "/preferences", { category, constraints });
  }

  listPreferences(): Promise<PreferenceRow[]> {
    return this.request("GET", "/preferences");
  }

  subscribe(clientId: number, preferenceId: number): Promise<{ ok: boolean }> {
    return this.request("POST", `/clients/${clientId}/subscriptions`, {
      preference_id: preferenceId,
    });
  }

  startAgent(category: string): Promise<{ category: string; state: string }> {
    return this.request("POST", `/agents/${encodeURIComponent(category)}/start`);
  }

  stopAgent(category: string): Promise<{ category: string; state: string }> {
    return this.request("POST", `/agents/${encodeURIComponent(category)}/stop`);
  }

  getAgents(): Promise<AgentRow[]> {
    return this.request("GET", "/agents");
  }

  getStatus(): Promise<StatusResponse> {
    return this.request("GET", "/status");
  }
}
