// Spawns the fixture portal and the service host as real subprocesses;
// every test runs against live HTTP.

import { ChildProcess, spawn } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join, resolve } from "node:path";
import type { GlobalSetupContext } from "vitest/node";

const PORTAL_PORT = 18281;
const API_PORT = 18280;
const REPO_ROOT = resolve(__dirname, "..", "..");

declare module "vitest" {
  interface ProvidedContext {
    apiBase: string;
    portalBase: string;
  }
}

function startProcess(args: string[]): ChildProcess {
  const child = spawn("python3", ["-m", "adharvest.cli", ...args], {
    cwd: REPO_ROOT,
    stdio: ["ignore", "pipe", "pipe"],
  });
  child.stderr?.on("data", (chunk) => process.stderr.write(chunk));
  return child;
}

async function waitReady(url: string, timeoutMs = 30000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const response = await fetch(url);
      if (response.ok) {
        return;
      }
    } catch {
      // not up yet
    }
    await new Promise((r) => setTimeout(r, 200));
  }
  throw new Error(`backend at ${url} did not come up`);
}

export default async function setup({ provide }: GlobalSetupContext) {
  const today = new Date().toISOString().slice(0, 10);
  const portal = startProcess([
    "portal",
    "--spec", "fixtures/portal.json",
    "--today", today,
    "--port", String(PORTAL_PORT),
  ]);

  const workDir = mkdtempSync(join(tmpdir(), "adharvest-ui-"));
  const categories: Record<string, unknown> = {};
  for (const name of ["vehicles.cars", "property.rent", "electronics"]) {
    categories[name] = {
      index_urls: [`http://127.0.0.1:${PORTAL_PORT}/${name}.html`],
      wait_interval_secs: 600,
      fetch: { timeout_ms: 5000, retry_attempts: 2, retry_delay_ms: 200 },
    };
  }
  const configPath = join(workDir, "config.json");
  writeFileSync(
    configPath,
    JSON.stringify({
      rules_file: join(REPO_ROOT, "fixtures", "portal.rules"),
      gateway: { mode: "mock", sink: "sms-sink.log" },
      categories,
    }),
  );

  const api = startProcess([
    "serve",
    "--config", configPath,
    "--data", join(workDir, "data"),
    "--port", String(API_PORT),
  ]);

  await waitReady(`http://127.0.0.1:${PORTAL_PORT}/vehicles.cars.html`);
  await waitReady(`http://127.0.0.1:${API_PORT}/status`);

  provide("apiBase", `http://127.0.0.1:${API_PORT}`);
  provide("portalBase", `http://127.0.0.1:${PORTAL_PORT}`);

  return async () => {
    api.kill("SIGTERM");
    portal.kill("SIGTERM");
    await new Promise((r) => setTimeout(r, 500));
    api.kill("SIGKILL");
    portal.kill("SIGKILL");
  };
}
