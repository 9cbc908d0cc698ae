/**
 * Decoding of YOLO-family prediction tensors into candidate boxes.
 *
 * Two common single-tensor export layouts are supported:
 *   v5: [1, N, 5 + numClasses]  rows of (cx, cy, w, h, objectness, probs...)
 *   v8: [1, 4 + numClasses, N]  columns of (cx, cy, w, h, probs...), no
 *       objectness term
 * Coordinates are in model-input pixels; callers unmap them to the original
 * image afterwards.
 */

import { xywhToBox, Box } from "./geometry.js";

export type DecodeStyle = "v5" | "v8";

export interface DecodedBox {
  box: Box;
  confidence: number;
  classId: number;
}

export interface DecodeOptions {
  style: DecodeStyle;
  /** candidates below this score are dropped before NMS */
  confThreshold: number;
}

export function decodePredictions(
  data: Float32Array | number[],
  shape: number[],
  opts: DecodeOptions,
): DecodedBox[] {
  if (shape.length !== 3 || shape[0] !== 1) {
    throw new Error(`expected prediction shape [1, ., .], got [${shape.join(", ")}]`);
  }
  const values = data instanceof Float32Array ? data : Float32Array.from(data);
  return opts.style === "v5"
    ? decodeV5(values, shape[1], shape[2], opts.confThreshold)
    : decodeV8(values, shape[1], shape[2], opts.confThreshold);
}

function decodeV5(
  values: Float32Array,
  rows: number,
  rowLength: number,
  confThreshold: number,
): DecodedBox[] {
  if (rowLength < 6) {
    throw new Error(`v5 rows need at least 6 values, got ${rowLength}`);
  }
  const numClasses = rowLength - 5;
  const out: DecodedBox[] = [];
  for (let r = 0; r < rows; r++) {
    const base = r * rowLength;
    const objectness = values[base + 4];
    let best = 0;
    let bestId = 0;
    for (let c = 0; c < numClasses; c++) {
      const p = values[base + 5 + c];
      if (p > best) {
        best = p;
        bestId = c;
      }
    }
    const confidence = objectness * best;
    if (confidence < confThreshold) continue;
    out.push({
      box: xywhToBox(values[base], values[base + 1], values[base + 2], values[base + 3]),
      confidence,
      classId: bestId,
    });
  }
  return out;
}

function decodeV8(
  values: Float32Array,
  channels: number,
  columns: number,
  confThreshold: number,
): DecodedBox[] {
  if (channels < 5) {
    throw new Error(`v8 output needs at least 5 channels, got ${channels}`);
  }
  const numClasses = channels - 4;
  const out: DecodedBox[] = [];
  for (let col = 0; col < columns; col++) {
    let best = 0;
    let bestId = 0;
    for (let c = 0; c < numClasses; c++) {
      const p = values[(4 + c) * columns + col];
      if (p > best) {
        best = p;
        bestId = c;
      }
    }
    if (best < confThreshold) continue;
    out.push({
      box: xywhToBox(
        values[0 * columns + col],
        values[1 * columns + col],
        values[2 * columns + col],
        values[3 * columns + col],
      ),
      confidence: best,
      classId: bestId,
    });
  }
  return out;
}
