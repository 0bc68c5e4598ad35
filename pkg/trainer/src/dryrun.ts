/** Dataset dry run: full schema check, token accounting, and step estimate. */

import { readFileSync, writeFileSync } from "node:fs";
import { join } from "node:path";

import { EmptyDatasetError, HashMismatch, RecordSchemaError } from "./errors.js";
import { sha256File, TrainManifest } from "./manifest.js";

const ROLES = new Set(["system", "user", "assistant"]);

export interface SplitReport {
  records: number;
  tokens: number;
}

export interface DryRunReport {
  ok: true;
  train: SplitReport;
  eval: SplitReport;
  steps_estimated: number;
}

/** Characters-to-tokens accounting: ceil(chars / 4), minimum 1 per message. */
function estimateTokens(text: string): number {
  return Math.max(1, Math.ceil(text.length / 4));
}

function checkRecord(record: unknown, file: string, line: number, graphHash: string): number {
  if (record === null || typeof record !== "object" || Array.isArray(record)) {
    throw new RecordSchemaError(file, line, "record is not a JSON object");
  }
  const rec = record as Record<string, unknown>;
  const messages = rec.messages;
  if (!Array.isArray(messages) || messages.length === 0) {
    throw new RecordSchemaError(file, line, "messages must be a non-empty array");
  }
  let tokens = 0;
  messages.forEach((msg, i) => {
    if (msg === null || typeof msg !== "object") {
      throw new RecordSchemaError(file, line, `messages[${i}] is not an object`);
    }
    const { role, content } = msg as Record<string, unknown>;
    if (typeof role !== "string" || !ROLES.has(role)) {
      throw new RecordSchemaError(file, line, `messages[${i}].role ${JSON.stringify(role)} is invalid`);
    }
    if (typeof content !== "string") {
      throw new RecordSchemaError(file, line, `messages[${i}].content is not a string`);
    }
    if (i === 0 && role !== "system") {
      throw new RecordSchemaError(file, line, "first message must be the system prompt");
    }
    tokens += estimateTokens(content);
  });
  const meta = rec.meta;
  if (meta === null || typeof meta !== "object") {
    throw new RecordSchemaError(file, line, "meta must be an object");
  }
  const m = meta as Record<string, unknown>;
  if (typeof m.scenario_id !== "number" || typeof m.seed !== "number") {
    throw new RecordSchemaError(file, line, "meta.scenario_id and meta.seed must be numbers");
  }
  if (!Array.isArray(m.path) || !m.path.every((p) => typeof p === "string")) {
    throw new RecordSchemaError(file, line, "meta.path must be an array of node ids");
  }
  if (graphHash && m.graph_hash !== graphHash) {
    throw new RecordSchemaError(file, line, `meta.graph_hash does not match the dataset manifest (${graphHash})`);
  }
  return tokens;
}

function checkSplit(file: string, graphHash: string): SplitReport {
  const text = readFileSync(file, "utf-8");
  const lines = text.split("\n").filter((l, i, arr) => l !== "" || i !== arr.length - 1);
  if (lines.length === 0) {
    throw new EmptyDatasetError(file);
  }
  let tokens = 0;
  lines.forEach((line, i) => {
    let parsed: unknown;
    try {
      parsed = JSON.parse(line);
    } catch {
      throw new RecordSchemaError(file, i + 1, "line is not valid JSON");
    }
    tokens += checkRecord(parsed, file, i + 1, graphHash);
  });
  return { records: lines.length, tokens };
}

/**
 * Validate every record of both splits, re-verify file hashes, and estimate
 * optimizer steps = ceil(train_records * epochs / effective_batch_size).
 * Never touches a GPU. Writes `report.json` into `outDir` when given.
 */
export function dryRun(manifest: TrainManifest, outDir?: string): DryRunReport {
  const { dataset } = manifest;
  const splits = { train: dataset.train_sha256, eval: dataset.eval_sha256 };
  for (const [split, expected] of Object.entries(splits)) {
    const file = join(dataset.dir, `${split}.jsonl`);
    const actual = sha256File(file);
    if (actual !== expected) {
      throw new HashMismatch(file, expected, actual);
    }
  }
  const train = checkSplit(join(dataset.dir, dataset.train_path), dataset.graph_hash);
  const evalSplit = checkSplit(join(dataset.dir, dataset.eval_path), dataset.graph_hash);
  const report: DryRunReport = {
    ok: true,
    train,
    eval: evalSplit,
    steps_estimated: Math.ceil((train.records * manifest.epochs) / manifest.effective_batch_size),
  };
  if (outDir !== undefined) {
    writeFileSync(join(outDir, "report.json"), JSON.stringify(report, null, 2) + "\n", "utf-8");
  }
  return report;
}
