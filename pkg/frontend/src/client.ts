/**
 * Client for the reward service. Oversized batches are split to respect the
 * server's batch limit and the merged results preserve input order. Rewards
 * are never computed locally: every number comes from the service.
 */

export interface ScoreItem {
  id: string | number;
  response_text: string;
  ground_truth: string;
}

export interface ScoreResult {
  id: string | number;
  r_cfsu: number;
  r_fsu: number;
  ted: number | null;
  r_ted: number;
  r_mixed: number;
  diagnostic?: string;
}

export interface RewardClientOptions {
  baseUrl: string;
  timeoutMs?: number;
  maxBatch?: number;
  token?: string;
  retries?: number;
  retryDelayMs?: number;
}

export class ServiceUnavailableError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "ServiceUnavailableError";
  }
}

export class BadRequestError extends Error {
  readonly status: number;
  readonly diagnostics: unknown[];

  constructor(message: string, status: number, diagnostics: unknown[] = []) {
    super(message);
    this.name = "BadRequestError";
    this.status = status;
    this.diagnostics = diagnostics;
  }
}

export class RewardClient {
  readonly baseUrl: string;
  readonly timeoutMs: number;
  readonly maxBatch: number;
  readonly token?: string;
  readonly retries: number;
  readonly retryDelayMs: number;

  constructor(options: RewardClientOptions) {
    this.baseUrl = options.baseUrl.replace(/\/+$/, "");
    this.timeoutMs = options.timeoutMs ?? 30_000;
    this.maxBatch = options.maxBatch ?? 1024;
    this.token = options.token;
    this.retries = options.retries ?? 2;
    this.retryDelayMs = options.retryDelayMs ?? 250;
  }

  async scoreBatch(items: ScoreItem[]): Promise<ScoreResult[]> {
    const results: ScoreResult[] = [];
    for (let start = 0; start < items.length; start += this.maxBatch) {
      const chunk = items.slice(start, start + this.maxBatch);
      results.push(...(await this.post<ScoreResult[]>("/v1/reward", chunk)));
    }
    return results;
  }

  async health(): Promise<boolean> {
    try {
      const res = await this.fetchWithTimeout(`${this.baseUrl}/healthz`, {});
      return res.ok;
    } catch {
      return false;
    }
  }

  private async fetchWithTimeout(url: string, init: RequestInit): Promise<Response> {
    const controller = new AbortController();
    const timer = setTimeout(() => controller.abort(), this.timeoutMs);
    try {
      return await fetch(url, { ...init, signal: controller.signal });
    } finally {
      clearTimeout(timer);
    }
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    const headers: Record<string, string> = { "Content-Type": "application/json" };
    if (this.token) headers.Authorization = `Bearer ${this.token}`;

    let lastError: unknown;
    for (let attempt = 0; attempt <= this.retries; attempt++) {
      let res: Response;
      try {
        res = await this.fetchWithTimeout(`${this.baseUrl}${path}`, {
          method: "POST",
          headers,
          body: JSON.stringify(body),
        });
      } catch (err) {
        lastError = err;
        await sleep(this.retryDelayMs * 2 ** attempt);
        continue;
      }
      if (res.ok) return (await res.json()) as T;
      if (res.status >= 500) {
        lastError = new Error(`server returned ${res.status}`);
        await sleep(this.retryDelayMs * 2 ** attempt);
        continue;
      }
      // 4xx: the request itself is wrong; retrying cannot help.
      const detail = await res.json().catch(() => ({}));
      const diagnostics = Array.isArray((detail as any).diagnostics)
        ? (detail as any).diagnostics
        : [];
      throw new BadRequestError(
        (detail as any).error ?? `request rejected with ${res.status}`,
        res.status,
        diagnostics,
      );
    }
    throw new ServiceUnavailableError(
      `service unreachable after ${this.retries + 1} attempts: ${String(lastError)}`,
    );
  }
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}
