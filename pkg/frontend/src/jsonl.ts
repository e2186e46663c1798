/**
 * JSONL helpers matching the toolkit's file formats: one JSON object per
 * line, UTF-8, blank lines ignored, CRLF accepted.
 */

import fs from "node:fs";

export class JsonlParseError extends Error {
  readonly path: string;
  readonly lineNumber: number;

  constructor(path: string, lineNumber: number, cause: string) {
    super(`${path}:${lineNumber}: ${cause}`);
    this.name = "JsonlParseError";
    this.path = path;
    this.lineNumber = lineNumber;
  }
}

export function readJsonl<T>(path: string): T[] {
  const text = fs.readFileSync(path, "utf8");
  const records: T[] = [];
  const lines = text.split("\n");
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].replace(/\r$/, "");
    if (!line.trim()) continue;
    try {
      records.push(JSON.parse(line) as T);
    } catch (err) {
      throw new JsonlParseError(path, i + 1, String(err));
    }
  }
  return records;
}

export function writeJsonl(path: string, records: unknown[]): void {
  const body = records.map((r) => JSON.stringify(r)).join("\n");
  fs.writeFileSync(path, records.length ? body + "\n" : "", "utf8");
}
