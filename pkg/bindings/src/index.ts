/**
 * segchain-bindings: drive the segchain decoders from TypeScript.
 *
 * The engine consumes plain float64 score arrays and returns decoded
 * entities or a loss with gradients of the same shapes, so any external
 * featurizer (a neural encoder, a feature template system, ...) can own the
 * scores while the engine owns the structured inference.  The boundary adds
 * no arithmetic: numbers round-trip bit-exactly through the line protocol,
 * and all computation happens engine-side.
 *
 * One-shot helpers spawn a fresh engine process per call; use
 * {@link EngineSession} to amortize interpreter startup over many calls
 * (each request is still fully self-contained).
 */

import { EngineOptions, EngineSession, oneShot } from "./engine.js";
import {
  Backend,
  DecodeResult,
  Entity,
  EngineError,
  LossAndGradients,
  ScoreTensors,
  ShapeError,
} from "./types.js";
import { validateTensors } from "./validate.js";

export { EngineSession, oneShot } from "./engine.js";
export type { EngineOptions } from "./engine.js";
export { EngineError, ShapeError } from "./types.js";
export type {
  Backend,
  DecodeResult,
  Entity,
  LossAndGradients,
  ScoreTensors,
} from "./types.js";
export { validateTensors } from "./validate.js";

export interface DecodeOptions extends EngineOptions {
  /** Label treated as non-entity; required by the segment backends. */
  readonly nullLabel?: string;
  /** Attach the filtered-graph text dump to fsemicrf responses. */
  readonly dumpGraph?: boolean;
}

function decodePayload(
  tensors: ScoreTensors,
  labels: readonly string[],
  backend: Backend,
  options?: DecodeOptions,
): Record<string, unknown> {
  validateTensors(tensors, labels.length);
  const payload: Record<string, unknown> = {
    op: "decode",
    backend,
    labels,
    emissions: tensors.emissions,
    span_scores_local: tensors.spanScoresLocal,
    span_scores_global: tensors.spanScoresGlobal,
    transitions: tensors.transitions,
  };
  const nullLabel = options?.nullLabel ?? (labels.includes("O") ? "O" : undefined);
  if (nullLabel !== undefined) payload["null_label"] = nullLabel;
  if (options?.dumpGraph) payload["dump_graph"] = true;
  return payload;
}

function parseEntities(raw: unknown): Entity[] {
  return (raw as [number, number, string][]).map(([start, end, label]) => ({
    start,
    end,
    label,
  }));
}

function parseDecode(response: Record<string, unknown>): DecodeResult {
  const result: { entities: Entity[]; score: number; graph?: string } = {
    entities: parseEntities(response["entities"]),
    score: response["score"] as number,
  };
  if (typeof response["graph"] === "string") result.graph = response["graph"];
  return result;
}

/** Decode one sequence's scores into entities (fresh engine process). */
export async function ffiDecode(
  tensors: ScoreTensors,
  labels: readonly string[],
  backend: Backend = "fsemicrf",
  options?: DecodeOptions,
): Promise<DecodeResult> {
  return parseDecode(await oneShot(decodePayload(tensors, labels, backend, options), options));
}

export interface LossOptions extends EngineOptions {
  readonly nullLabel?: string;
}

function lossPayload(
  tensors: ScoreTensors,
  gold: readonly Entity[],
  beta: number,
  labels: readonly string[],
  options?: LossOptions,
): Record<string, unknown> {
  validateTensors(tensors, labels.length);
  if (!(beta > 0 && beta <= 1)) {
    throw new EngineError(`beta must be in (0, 1], got ${beta}`);
  }
  return {
    op: "loss_grad",
    labels,
    null_label: options?.nullLabel ?? "O",
    gold: gold.map((e) => [e.start, e.end, e.label]),
    beta,
    emissions: tensors.emissions,
    span_scores_local: tensors.spanScoresLocal,
    span_scores_global: tensors.spanScoresGlobal,
    transitions: tensors.transitions,
  };
}

function parseLoss(response: Record<string, unknown>): LossAndGradients {
  return {
    loss: response["loss"] as number,
    lossLocal: response["loss_local"] as number,
    lossGlobal: response["loss_global"] as number,
    gradients: {
      emissions: response["grad_emissions"] as number[][],
      spanScoresLocal: response["grad_span_scores_local"] as number[][][],
      spanScoresGlobal: response["grad_span_scores_global"] as number[][][],
      transitions: response["grad_transitions"] as number[][],
    },
  };
}

/**
 * Combined filtering + path loss with gradients w.r.t. every input array
 * (fresh engine process).  Gold entities must be non-overlapping; gradients
 * come back with identical shapes to the inputs, ready to feed an external
 * autodiff encoder as upstream gradients.
 */
export async function ffiLossAndGrad(
  tensors: ScoreTensors,
  gold: readonly Entity[],
  beta: number,
  labels: readonly string[],
  options?: LossOptions,
): Promise<LossAndGradients> {
  return parseLoss(await oneShot(lossPayload(tensors, gold, beta, labels, options), options));
}

/** Engine version string, for checkpoint/protocol compatibility checks. */
export async function engineVersion(options?: EngineOptions): Promise<string> {
  const response = await oneShot({ op: "version" }, options);
  return response["version"] as string;
}

/**
 * Session-bound variants of the three calls, sharing one engine process.
 */
export class SegchainClient {
  private readonly session: EngineSession;

  constructor(options?: EngineOptions) {
    this.session = new EngineSession(options);
  }

  async version(): Promise<string> {
    const response = await this.session.request({ op: "version" });
    return response["version"] as string;
  }

  async decode(
    tensors: ScoreTensors,
    labels: readonly string[],
    backend: Backend = "fsemicrf",
    options?: Omit<DecodeOptions, keyof EngineOptions>,
  ): Promise<DecodeResult> {
    return parseDecode(await this.session.request(
      decodePayload(tensors, labels, backend, options)));
  }

  async lossAndGrad(
    tensors: ScoreTensors,
    gold: readonly Entity[],
    beta: number,
    labels: readonly string[],
    options?: Omit<LossOptions, keyof EngineOptions>,
  ): Promise<LossAndGradients> {
    return parseLoss(await this.session.request(
      lossPayload(tensors, gold, beta, labels, options)));
  }

  async close(): Promise<void> {
    await this.session.close();
  }
}
