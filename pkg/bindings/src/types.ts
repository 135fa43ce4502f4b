/**
 * Wire-level types for the segchain score boundary.
 *
 * All arrays are dense float64 nested lists with fixed shapes for a sequence
 * of length `L`, width cap `K`, and label count `Y`:
 *
 * - `emissions`:          L x Y   per-token label scores (chain CRF)
 * - `spanScoresLocal`:    L x K x Y   filtering-classifier span scores
 * - `spanScoresGlobal`:   L x K x Y   path-scoring span scores
 * - `transitions`:        Y x Y   label transition scores
 *
 * Span tables are indexed `[start - 1][width - 1][label]`; entries whose
 * span would run past the end of the sequence are padding and never read.
 * Entity positions are 1-based inclusive.
 */

export interface ScoreTensors {
  readonly emissions: readonly (readonly number[])[];
  readonly spanScoresLocal: readonly (readonly (readonly number[])[])[];
  readonly spanScoresGlobal: readonly (readonly (readonly number[])[])[];
  readonly transitions: readonly (readonly number[])[];
}

export type Backend = "crf" | "semicrf" | "semicrf-unitnull" | "fsemicrf" | "local";

export interface Entity {
  readonly start: number;
  readonly end: number;
  readonly label: string;
}

export interface DecodeResult {
  readonly entities: Entity[];
  readonly score: number;
  /** Text dump of the filtered graph; present when requested on fsemicrf. */
  readonly graph?: string;
}

export interface LossAndGradients {
  readonly loss: number;
  readonly lossLocal: number;
  readonly lossGlobal: number;
  readonly gradients: ScoreTensors;
}

/** An array arrived with the wrong shape; names the offending array. */
export class ShapeError extends Error {
  constructor(
    readonly array: string,
    readonly expected: readonly (number | string)[],
    readonly actual: readonly number[],
  ) {
    super(`${array}: expected shape (${expected.join(", ")}), got (${actual.join(", ")})`);
    this.name = "ShapeError";
  }
}

/** The engine rejected a request (non-shape error) or the process failed. */
export class EngineError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "EngineError";
  }
}
