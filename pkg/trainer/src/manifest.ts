/** Training-run manifests: preset resolution against a hash-verified dataset. */

import { createHash } from "node:crypto";
import { readFileSync, writeFileSync } from "node:fs";
import { join } from "node:path";

import { HashMismatch } from "./errors.js";
import { PRESETS } from "./presets.js";

export interface DatasetRef {
  dir: string;
  train_path: string;
  eval_path: string;
  train_sha256: string;
  eval_sha256: string;
  graph_hash: string;
  counts: { train: number; eval: number };
}

export interface TrainManifest {
  preset: string;
  base_model: string;
  learning_rate: number;
  schedule: "cosine";
  effective_batch_size: number;
  epochs: number;
  checkpoint_selection: "best_eval_loss";
  precision: "bf16";
  /** No published value; documented default. */
  warmup_steps: number;
  /** No published value; documented default. */
  weight_decay: number;
  dataset: DatasetRef;
}

export function sha256File(path: string): string {
  return createHash("sha256").update(readFileSync(path)).digest("hex");
}

/**
 * Build a TrainManifest for `preset` over the dataset exported at
 * `datasetDir` (train.jsonl + eval.jsonl + manifest.json). Every file hash
 * recorded in the dataset manifest is re-computed and verified before the
 * manifest is returned.
 */
export function resolveManifest(preset: string, datasetDir: string): TrainManifest {
  const hp = PRESETS[preset];
  if (!hp) {
    throw new Error(`unknown preset ${JSON.stringify(preset)}; expected one of ${Object.keys(PRESETS).join(", ")}`);
  }
  const raw = JSON.parse(readFileSync(join(datasetDir, "manifest.json"), "utf-8"));
  for (const split of ["train", "eval"] as const) {
    const file = join(datasetDir, `${split}.jsonl`);
    const actual = sha256File(file);
    const expected = raw[`${split}_sha256`];
    if (actual !== expected) {
      throw new HashMismatch(file, String(expected), actual);
    }
  }
  if (hp.learning_rate <= 0) {
    throw new Error(`preset ${preset} has non-positive learning rate`);
  }
  return {
    preset,
    base_model: hp.base_model,
    learning_rate: hp.learning_rate,
    schedule: hp.schedule,
    effective_batch_size: hp.effective_batch_size,
    epochs: hp.epochs,
    checkpoint_selection: "best_eval_loss",
    precision: "bf16",
    warmup_steps: 0,
    weight_decay: 0.0,
    dataset: {
      dir: datasetDir,
      train_path: "train.jsonl",
      eval_path: "eval.jsonl",
      train_sha256: raw.train_sha256,
      eval_sha256: raw.eval_sha256,
      graph_hash: raw.graph_hash ?? "",
      counts: {
        train: raw.counts?.train ?? 0,
        eval: raw.counts?.eval ?? 0,
      },
    },
  };
}

function sortKeysDeep(value: unknown): unknown {
  if (Array.isArray(value)) return value.map(sortKeysDeep);
  if (value !== null && typeof value === "object") {
    const out: Record<string, unknown> = {};
    for (const key of Object.keys(value as object).sort()) {
      out[key] = sortKeysDeep((value as Record<string, unknown>)[key]);
    }
    return out;
  }
  return value;
}

/** Canonical serialization: sorted keys, two-space indent, trailing newline. */
export function manifestToJson(manifest: TrainManifest): string {
  return JSON.stringify(sortKeysDeep(manifest), null, 2) + "\n";
}

export function writeManifest(manifest: TrainManifest, path: string): void {
  writeFileSync(path, manifestToJson(manifest), "utf-8");
}

export function readManifest(path: string): TrainManifest {
  return JSON.parse(readFileSync(path, "utf-8")) as TrainManifest;
}
