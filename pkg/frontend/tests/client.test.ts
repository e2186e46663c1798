import http from "node:http";
import { AddressInfo } from "node:net";
import { afterEach, describe, expect, it } from "vitest";

import {
  BadRequestError,
  RewardClient,
  ServiceUnavailableError,
  type ScoreItem,
} from "../src/client.js";

type Handler = (body: unknown[], res: http.ServerResponse) => void;

let server: http.Server | undefined;

function startMock(handler: Handler): Promise<string> {
  server = http.createServer((req, res) => {
    let data = "";
    req.on("data", (chunk) => (data += chunk));
    req.on("end", () => {
      handler(data ? JSON.parse(data) : [], res);
    });
  });
  return new Promise((resolve) => {
    server!.listen(0, "127.0.0.1", () => {
      const { port } = server!.address() as AddressInfo;
      resolve(`http://127.0.0.1:${port}`);
    });
  });
}

afterEach(() => {
  server?.close();
  server = undefined;
});

function items(n: number): ScoreItem[] {
  return Array.from({ length: n }, (_, i) => ({
    id: `i${i}`,
    response_text: "x",
    ground_truth: "{}",
  }));
}

function echoScores(body: unknown[], res: http.ServerResponse): void {
  const results = (body as ScoreItem[]).map((item) => ({
    id: item.id,
    r_cfsu: 1,
    r_fsu: 1,
    ted: 0,
    r_ted: 0.5,
    r_mixed: 0.5,
  }));
  res.writeHead(200, { "Content-Type": "application/json" });
  res.end(JSON.stringify(results));
}

describe("RewardClient", () => {
  it("splits oversized batches and merges results in order", async () => {
    const calls: number[] = [];
    const url = await startMock((body, res) => {
      calls.push((body as unknown[]).length);
      echoScores(body as unknown[], res);
    });
    const client = new RewardClient({ baseUrl: url, maxBatch: 1024 });
    const results = await client.scoreBatch(items(3000));
    expect(calls).toEqual([1024, 1024, 952]);
    expect(results).toHaveLength(3000);
    expect(results.map((r) => r.id)).toEqual(items(3000).map((i) => i.id));
  });

  it("sends one call for a small batch", async () => {
    const calls: number[] = [];
    const url = await startMock((body, res) => {
      calls.push((body as unknown[]).length);
      echoScores(body as unknown[], res);
    });
    const client = new RewardClient({ baseUrl: url, maxBatch: 64 });
    await client.scoreBatch(items(10));
    expect(calls).toEqual([10]);
  });

  it("surfaces server diagnostics on 400", async () => {
    const url = await startMock((_body, res) => {
      res.writeHead(400, { "Content-Type": "application/json" });
      res.end(
        JSON.stringify({
          error: "malformed items",
          diagnostics: [{ index: 1, error: "missing field 'ground_truth'" }],
        }),
      );
    });
    const client = new RewardClient({ baseUrl: url });
    try {
      await client.scoreBatch(items(2));
      expect.unreachable("should have thrown");
    } catch (err) {
      expect(err).toBeInstanceOf(BadRequestError);
      expect((err as BadRequestError).diagnostics).toEqual([
        { index: 1, error: "missing field 'ground_truth'" },
      ]);
    }
  });

  it("retries transient 5xx and then succeeds", async () => {
    let attempts = 0;
    const url = await startMock((body, res) => {
      attempts += 1;
      if (attempts === 1) {
        res.writeHead(503);
        res.end();
        return;
      }
      echoScores(body as unknown[], res);
    });
    const client = new RewardClient({ baseUrl: url, retryDelayMs: 1 });
    const results = await client.scoreBatch(items(2));
    expect(attempts).toBe(2);
    expect(results).toHaveLength(2);
  });

  it("gives up with ServiceUnavailableError when the server is down", async () => {
    const client = new RewardClient({
      baseUrl: "http://127.0.0.1:59999",
      retries: 1,
      retryDelayMs: 1,
      timeoutMs: 500,
    });
    await expect(client.scoreBatch(items(1))).rejects.toBeInstanceOf(
      ServiceUnavailableError,
    );
  });

  it("attaches the bearer token when configured", async () => {
    let auth: string | undefined;
    server = http.createServer((req, res) => {
      auth = req.headers.authorization;
      let data = "";
      req.on("data", (c) => (data += c));
      req.on("end", () => echoScores(JSON.parse(data), res));
    });
    const url: string = await new Promise((resolve) => {
      server!.listen(0, "127.0.0.1", () => {
        const { port } = server!.address() as AddressInfo;
        resolve(`http://127.0.0.1:${port}`);
      });
    });
    const client = new RewardClient({ baseUrl: url, token: "sekrit" });
    await client.scoreBatch(items(1));
    expect(auth).toBe("Bearer sekrit");
  });
});
