/** Shared test helpers: seeded RNG, random tensors, and an independent
 * TypeScript re-derivation of the filtered-graph decode. */

import type { Entity, ScoreTensors } from "../src/index.js";

export const LABELS = ["O", "A", "B"] as const;

/** mulberry32: tiny deterministic PRNG, plenty for test data. */
export function rng(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function normal(rand: () => number): number {
  const u = Math.max(rand(), 1e-12);
  const v = rand();
  return Math.sqrt(-2 * Math.log(u)) * Math.cos(2 * Math.PI * v);
}

export function randomTensors(
  rand: () => number,
  length: number,
  maxWidth: number,
  numLabels: number,
): ScoreTensors {
  const matrix = (rows: number, cols: number) =>
    Array.from({ length: rows }, () => Array.from({ length: cols }, () => normal(rand)));
  const cube = () =>
    Array.from({ length }, () =>
      Array.from({ length: maxWidth }, () => Array.from({ length: numLabels }, () => normal(rand))));
  return {
    emissions: matrix(length, numLabels),
    spanScoresLocal: cube(),
    spanScoresGlobal: cube(),
    transitions: matrix(numLabels, numLabels),
  };
}

/** Non-overlapping random gold entities with widths <= maxWidth. */
export function randomGold(
  rand: () => number,
  length: number,
  maxWidth: number,
  labels: readonly string[],
): Entity[] {
  const gold: Entity[] = [];
  let pos = 1;
  while (pos <= length) {
    if (rand() < 0.4) {
      const width = 1 + Math.floor(rand() * maxWidth);
      if (pos + width - 1 <= length) {
        const label = labels[1 + Math.floor(rand() * (labels.length - 1))]!;
        gold.push({ start: pos, end: pos + width - 1, label });
        pos += width;
        continue;
      }
    }
    pos += 1;
  }
  return gold;
}

interface DumpNode {
  start: number;
  end: number;
  label: number;
}

/**
 * Re-derive the best start->end path from the engine's graph dump, using the
 * caller's own score arrays for node and transition weights.
 *
 * The arithmetic mirrors the engine's decode exactly (same additions in the
 * same order, strict-greater tie-breaking over predecessors in topological
 * order), so entities AND score must match bit for bit: IEEE-754 addition
 * and comparison are deterministic across both runtimes, and the JSON float
 * round-trip is exact.
 */
export function rederiveBestPath(
  dump: string,
  tensors: ScoreTensors,
): { entities: [number, number, number][]; score: number } {
  const nodes: DumpNode[] = [];
  const preds: number[][] = [];
  const sinks: number[] = [];
  for (const line of dump.split("\n")) {
    const parts = line.trim().split(/\s+/);
    if (parts[0] === "node") {
      nodes.push({
        start: Number(parts[1]),
        end: Number(parts[2]),
        label: Number(parts[3]),
      });
      preds.push([]);
    } else if (parts[0] === "edge") {
      if (parts[1] === "start" && parts[2] === "end") continue;
      if (parts[2] === "end") sinks.push(Number(parts[1]));
      else if (parts[1] === "start") continue; // start edge: preds stay empty
      else preds[Number(parts[2])]!.push(Number(parts[1]));
    }
  }
  if (nodes.length === 0) return { entities: [], score: 0 };

  const phi = (k: number) => {
    const node = nodes[k]!;
    return tensors.spanScoresGlobal[node.start - 1]![node.end - node.start]![node.label]!;
  };
  const trans = (a: number, b: number) => tensors.transitions[a]![b]!;

  const dp = new Array<number>(nodes.length);
  const back = new Array<number>(nodes.length).fill(-1);
  for (let k = 0; k < nodes.length; k++) {
    if (preds[k]!.length > 0) {
      let best = -Infinity;
      let arg = -1;
      for (const p of preds[k]!) {
        const cand = dp[p]! + trans(nodes[p]!.label, nodes[k]!.label);
        if (cand > best) {
          best = cand;
          arg = p;
        }
      }
      dp[k] = phi(k) + best;
      back[k] = arg;
    } else {
      dp[k] = phi(k);
    }
  }
  let bestSink = -1;
  let bestVal = -Infinity;
  for (const k of sinks.sort((a, b) => a - b)) {
    if (dp[k]! > bestVal) {
      bestVal = dp[k]!;
      bestSink = k;
    }
  }
  const order: number[] = [];
  for (let k = bestSink; k >= 0; k = back[k]!) order.push(k);
  order.reverse();

  let score = 0.0;
  order.forEach((k, pos) => {
    if (pos > 0) score += trans(nodes[order[pos - 1]!]!.label, nodes[k]!.label);
    score += phi(k);
  });
  return {
    entities: order.map((k) => [nodes[k]!.start, nodes[k]!.end, nodes[k]!.label]),
    score,
  };
}
