/**
 * Client-side shape validation.
 *
 * The engine re-validates everything, but catching a malformed tensor before
 * spawning a round-trip gives the caller an error that names the offending
 * array with the shapes involved.
 */

import { ScoreTensors, ShapeError } from "./types.js";

function matrixShape(name: string, value: readonly (readonly number[])[]): [number, number] {
  if (!Array.isArray(value) || value.length === 0 || !Array.isArray(value[0])) {
    throw new ShapeError(name, ["rows", "cols"], [Array.isArray(value) ? value.length : 0]);
  }
  const cols = value[0]!.length;
  for (const row of value) {
    if (!Array.isArray(row) || row.length !== cols) {
      throw new ShapeError(name, [value.length, cols], [value.length, row.length]);
    }
    for (const x of row) {
      if (typeof x !== "number" || !Number.isFinite(x)) {
        throw new ShapeError(name, [value.length, cols], [value.length, cols]);
      }
    }
  }
  return [value.length, cols];
}

function cubeShape(
  name: string,
  value: readonly (readonly (readonly number[])[])[],
): [number, number, number] {
  if (!Array.isArray(value) || value.length === 0) {
    throw new ShapeError(name, ["L", "K", "Y"], [0]);
  }
  const first = value[0];
  if (!Array.isArray(first) || first.length === 0) {
    throw new ShapeError(name, ["L", "K", "Y"], [value.length, 0]);
  }
  const k = first.length;
  const y = first[0]!.length;
  for (const plane of value) {
    if (!Array.isArray(plane) || plane.length !== k) {
      throw new ShapeError(name, [value.length, k, y], [value.length, plane.length, y]);
    }
    for (const row of plane) {
      if (!Array.isArray(row) || row.length !== y) {
        throw new ShapeError(name, [value.length, k, y], [value.length, k, row.length]);
      }
      for (const x of row) {
        if (typeof x !== "number" || !Number.isFinite(x)) {
          throw new ShapeError(name, [value.length, k, y], [value.length, k, y]);
        }
      }
    }
  }
  return [value.length, k, y];
}

/**
 * Check mutual consistency of the four score arrays against the label set.
 * Returns the inferred (L, K, Y).  Throws {@link ShapeError} naming the
 * first array whose shape disagrees.
 */
export function validateTensors(
  tensors: ScoreTensors,
  numLabels: number,
): [number, number, number] {
  const [length, emissionLabels] = matrixShape("emissions", tensors.emissions);
  if (emissionLabels !== numLabels) {
    throw new ShapeError("emissions", [length, numLabels], [length, emissionLabels]);
  }
  const [localL, maxWidth, localY] = cubeShape("spanScoresLocal", tensors.spanScoresLocal);
  if (localL !== length || localY !== numLabels) {
    throw new ShapeError(
      "spanScoresLocal",
      [length, maxWidth, numLabels],
      [localL, maxWidth, localY],
    );
  }
  const [globalL, globalK, globalY] = cubeShape("spanScoresGlobal", tensors.spanScoresGlobal);
  if (globalL !== length || globalK !== maxWidth || globalY !== numLabels) {
    throw new ShapeError(
      "spanScoresGlobal",
      [length, maxWidth, numLabels],
      [globalL, globalK, globalY],
    );
  }
  const [transRows, transCols] = matrixShape("transitions", tensors.transitions);
  if (transRows !== numLabels || transCols !== numLabels) {
    throw new ShapeError("transitions", [numLabels, numLabels], [transRows, transCols]);
  }
  return [length, maxWidth, numLabels];
}
