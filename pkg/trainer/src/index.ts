export { PRESETS, TrainPreset, PresetName } from "./presets.js";
export {
  DatasetRef,
  TrainManifest,
  manifestToJson,
  readManifest,
  resolveManifest,
  sha256File,
  writeManifest,
} from "./manifest.js";
export { DryRunReport, SplitReport, dryRun } from "./dryrun.js";
export { HardwareProfile, LaunchResult, launch } from "./launch.js";
export { EmptyDatasetError, EnvironmentError, HashMismatch, RecordSchemaError } from "./errors.js";
