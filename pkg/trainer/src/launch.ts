/** Launch gating: a training run may only start after a passing dry run. */

import { mkdirSync } from "node:fs";
import { join } from "node:path";

import { dryRun, DryRunReport } from "./dryrun.js";
import { EnvironmentError } from "./errors.js";
import { TrainManifest, writeManifest } from "./manifest.js";

export interface HardwareProfile {
  gpus: number;
  /**
   * Backend hook that actually starts full-parameter SFT (torchrun, a
   * scheduler submission, ...). Injected so the gating and run-directory
   * contract can be exercised without GPU hardware.
   */
  execute?: (manifest: TrainManifest, runDir: string) => void;
}

export interface LaunchResult {
  runDir: string;
  report: DryRunReport;
}

function defaultExecute(_manifest: TrainManifest, _runDir: string): void {
  throw new EnvironmentError(
    "no training backend configured on this host; supply HardwareProfile.execute",
  );
}

/**
 * Run the dataset dry run, materialize the run directory (manifest echo +
 * dry-run report), then hand off to the hardware backend. The dry run is not
 * skippable: any dataset problem aborts before the backend is touched.
 */
export function launch(
  manifest: TrainManifest,
  hardware: HardwareProfile,
  runDir: string,
): LaunchResult {
  if (hardware.gpus < 1) {
    throw new EnvironmentError("training requires at least one GPU");
  }
  mkdirSync(runDir, { recursive: true });
  const report = dryRun(manifest, runDir);
  writeManifest(manifest, join(runDir, "manifest.json"));
  (hardware.execute ?? defaultExecute)(manifest, runDir);
  return { runDir, report };
}
