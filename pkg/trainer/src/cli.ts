#!/usr/bin/env node
/** Minimal CLI: resolve a preset manifest and dry-run a dataset. */

import { mkdirSync } from "node:fs";
import { join } from "node:path";

import { dryRun } from "./dryrun.js";
import { resolveManifest, writeManifest } from "./manifest.js";

function usage(): never {
  console.error("usage: flowtrain <resolve|dry-run> --preset NAME --dataset DIR --out DIR");
  process.exit(2);
}

function arg(argv: string[], flag: string): string {
  const i = argv.indexOf(flag);
  if (i < 0 || i + 1 >= argv.length) usage();
  return argv[i + 1];
}

export function main(argv: string[]): number {
  const [command] = argv;
  if (command !== "resolve" && command !== "dry-run") usage();
  const preset = arg(argv, "--preset");
  const datasetDir = arg(argv, "--dataset");
  const outDir = arg(argv, "--out");
  try {
    mkdirSync(outDir, { recursive: true });
    const manifest = resolveManifest(preset, datasetDir);
    writeManifest(manifest, join(outDir, "manifest.json"));
    if (command === "dry-run") {
      const report = dryRun(manifest, outDir);
      console.log(JSON.stringify(report));
    } else {
      console.log(JSON.stringify({ ok: true, preset, out: outDir }));
    }
    return 0;
  } catch (err) {
    const e = err as Error;
    console.error(JSON.stringify({ error: e.name, message: e.message }));
    return 1;
  }
}

if (import.meta.url === `file://${process.argv[1]}`) {
  process.exit(main(process.argv.slice(2)));
}
