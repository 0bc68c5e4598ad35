/** Errors raised by manifest resolution, dry runs, and launch gating. */

export class HashMismatch extends Error {
  constructor(
    public readonly file: string,
    public readonly expected: string,
    public readonly actual: string,
  ) {
    super(`sha256 mismatch for ${file}: manifest says ${expected}, file is ${actual}`);
    this.name = "HashMismatch";
  }
}

export class RecordSchemaError extends Error {
  constructor(
    public readonly file: string,
    public readonly line: number,
    detail: string,
  ) {
    super(`${file}:${line}: ${detail}`);
    this.name = "RecordSchemaError";
  }
}

export class EmptyDatasetError extends Error {
  constructor(public readonly file: string) {
    super(`${file} contains no records`);
    this.name = "EmptyDatasetError";
  }
}

export class EnvironmentError extends Error {
  constructor(detail: string) {
    super(detail);
    this.name = "EnvironmentError";
  }
}
