/** Training hyperparameter presets, one per published run configuration. */

export interface TrainPreset {
  base_model: string;
  learning_rate: number;
  schedule: "cosine";
  effective_batch_size: number;
  epochs: number;
}

export const PRESETS: Record<string, TrainPreset> = {
  "travel-3b": {
    base_model: "llama-3.2-3b-instruct",
    learning_rate: 2e-5,
    schedule: "cosine",
    effective_batch_size: 16,
    epochs: 20,
  },
  "zoom-8b": {
    base_model: "llama-3.1-8b-instruct",
    learning_rate: 2e-5,
    schedule: "cosine",
    effective_batch_size: 32,
    epochs: 10,
  },
  "insurance-8b": {
    base_model: "llama-3.1-8b-instruct",
    learning_rate: 2e-5,
    schedule: "cosine",
    effective_batch_size: 32,
    epochs: 20,
  },
};

export type PresetName = keyof typeof PRESETS;
