// Agent console state: polls /agents and /status, tracks in-flight
// start/stop actions so a control can't double-submit, and degrades
// gracefully when the API stops answering.

import { AgentRow, ApiError, StatusCounts, StatusResponse } from "./api.js";

// The slice of the API the console uses; ApiClient satisfies it.
export interface ConsoleApi {
  getAgents(): Promise<AgentRow[]>;
  getStatus(): Promise<StatusResponse>;
  startAgent(category: string): Promise<unknown>;
  stopAgent(category: string): Promise<unknown>;
}

export interface ConsoleState {
  agents: AgentRow[];
  counts: StatusCounts | null;
  degraded: boolean;
  inflight: string[]; // categories with an action under way
  actionError: string | null;
}

export type StateListener = (state: ConsoleState) => void;

export class AgentConsole {
  private agents: AgentRow[] = [];
  private counts: StatusCounts | null = null;
  private degraded = false;
  private inflight = new Set<string>();
  private actionError: string | null = null;

  constructor(
    private readonly api: ConsoleApi,
    private readonly onChange: StateListener = () => {},
  ) {}

  state(): ConsoleState {
    return {
      agents: this.agents,
      counts: this.counts,
      degraded: this.degraded,
      inflight: [...this.inflight],
      actionError: this.actionError,
    };
  }

  private emit(): void {
    this.onChange(this.state());
  }

  // One poll cycle. Values on screen come straight from these responses.
  async poll(): Promise<ConsoleState> {
    try {
      const [agents, status] = await Promise.all([this.api.getAgents(), this.api.getStatus()]);
      this.agents = agents;
      this.counts = status.counts;
      this.degraded = false;
    } catch {
      this.degraded = true; // keep stale data, flag the connection
    }
    this.emit();
    return this.state();
  }

  async start(category: string): Promise<void> {
    return this.action(category, () => this.api.startAgent(category));
  }

  async stop(category: string): Promise<void> {
    return this.action(category, () => this.api.stopAgent(category));
  }

  private async action(category: string, call: () => Promise<unknown>): Promise<void> {
    if (this.inflight.has(category)) {
      return; // control already disabled; ignore the double-click
    }
    this.inflight.add(category);
    this.actionError = null;
    this.emit();
    try {
      await call();
    } catch (err) {
      this.actionError = err instanceof ApiError ? `${err.code}: ${err.message}` : String(err);
    } finally {
      this.inflight.delete(category);
    }
    await this.poll();
  }
}

export function countdownSeconds(nextRunAt: string | null, nowMs: number): number | null {
  if (!nextRunAt) {
    return null;
  }
  const target = Date.parse(nextRunAt);
  if (Number.isNaN(target)) {
    return null;
  }
  return Math.max(0, Math.round((target - nowMs) / 1000));
}
