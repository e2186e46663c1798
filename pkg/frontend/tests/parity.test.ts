/**
 * End-to-end parity: scoreBatch against a live service must return results
 * field-for-field equal to the batch CLI on the same 200-item fixture,
 * including chunked batches.
 */

import { execFileSync, spawn, type ChildProcess } from "node:child_process";
import fs from "node:fs";
import net from "node:net";
import os from "node:os";
import path from "node:path";
import { fileURLToPath } from "node:url";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { RewardClient, type ScoreItem, type ScoreResult } from "../src/client.js";
import { readJsonl } from "../src/jsonl.js";

const here = path.dirname(fileURLToPath(import.meta.url));
const PYTHON = process.env.FSUKIT_PYTHON ?? "python3";

let dir: string;
let serverProcess: ChildProcess | undefined;
let baseUrl: string;

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const probe = net.createServer();
    probe.listen(0, "127.0.0.1", () => {
      const port = (probe.address() as net.AddressInfo).port;
      probe.close(() => resolve(port));
    });
    probe.on("error", reject);
  });
}

async function waitForHealth(url: string, timeoutMs: number): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const res = await fetch(`${url}/healthz`);
      if (res.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((r) => setTimeout(r, 200));
  }
  throw new Error(`service at ${url} did not become healthy in ${timeoutMs}ms`);
}

beforeAll(async () => {
  dir = fs.mkdtempSync(path.join(os.tmpdir(), "fsukit-parity-"));

  execFileSync(PYTHON, [path.join(here, "..", "scripts", "make_parity_fixture.py"), dir], {
    stdio: "pipe",
  });
  execFileSync(
    PYTHON,
    [
      "-m",
      "fsukit.cli",
      "score",
      "--pred",
      path.join(dir, "pred.jsonl"),
      "--gt",
      path.join(dir, "gt.jsonl"),
      "--out",
      path.join(dir, "cli_scores.jsonl"),
    ],
    { stdio: "pipe" },
  );

  const port = await freePort();
  baseUrl = `http://127.0.0.1:${port}`;
  serverProcess = spawn(PYTHON, ["-m", "fsukit.cli", "serve", "--port", String(port)], {
    stdio: "ignore",
  });
  await waitForHealth(baseUrl, 30_000);
}, 60_000);

afterAll(() => {
  serverProcess?.kill();
  if (dir) fs.rmSync(dir, { recursive: true, force: true });
});

describe("client/CLI parity", () => {
  it("returns results field-for-field equal to the batch CLI", async () => {
    const items = JSON.parse(
      fs.readFileSync(path.join(dir, "items.json"), "utf8"),
    ) as ScoreItem[];
    expect(items).toHaveLength(200);

    // maxBatch below the item count forces chunked requests.
    const client = new RewardClient({ baseUrl, maxBatch: 64 });
    const viaService = await client.scoreBatch(items);
    const viaCli = readJsonl<ScoreResult>(path.join(dir, "cli_scores.jsonl"));

    expect(viaService).toHaveLength(viaCli.length);
    for (let i = 0; i < viaCli.length; i++) {
      expect(viaService[i]).toEqual(viaCli[i]);
    }
  }, 60_000);

  it("covers the full reward range in the fixture", async () => {
    const viaCli = readJsonl<ScoreResult>(path.join(dir, "cli_scores.jsonl"));
    const values = new Set(viaCli.map((r) => r.r_mixed));
    expect(values.has(0.5)).toBe(true);
    expect(values.has(0)).toBe(true);
    expect([...values].some((v) => v > 0 && v < 0.5)).toBe(true);
  });
});
