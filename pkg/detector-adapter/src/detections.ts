/** Candidate detections and the post-processing that turns raw model
 * output into wire detections: confidence gate, per-class greedy NMS,
 * clamping to image bounds. */

import { Box, clampBox, iou } from "./geometry.js";

export interface Candidate {
  box: Box;
  confidence: number;
  className: string;
}

/** Greedy non-max suppression, applied independently per class. */
export function nonMaxSuppression(candidates: Candidate[], iouThreshold: number): Candidate[] {
  const byClass = new Map<string, Candidate[]>();
  for (const candidate of candidates) {
    const bucket = byClass.get(candidate.className);
    if (bucket) bucket.push(candidate);
    else byClass.set(candidate.className, [candidate]);
  }
  const kept: Candidate[] = [];
  for (const bucket of byClass.values()) {
    bucket.sort((a, b) => b.confidence - a.confidence);
    const survivors: Candidate[] = [];
    for (const candidate of bucket) {
      if (survivors.every((s) => iou(s.box, candidate.box) <= iouThreshold)) {
        survivors.push(candidate);
      }
    }
    kept.push(...survivors);
  }
  kept.sort((a, b) => b.confidence - a.confidence);
  return kept;
}

export interface PostprocessOptions {
  confThreshold: number;
  nmsIouThreshold: number;
  width: number;
  height: number;
  /** detector class name -> dataset class name (e.g. person -> Pedestrian) */
  classMap: Record<string, string>;
}

export function postprocess(candidates: Candidate[], opts: PostprocessOptions): Candidate[] {
  const confident = candidates.filter((c) => c.confidence >= opts.confThreshold);
  const suppressed = nonMaxSuppression(confident, opts.nmsIouThreshold);
  return suppressed.map((candidate) => ({
    box: clampBox(candidate.box, opts.width, opts.height),
    confidence: Math.min(Math.max(candidate.confidence, 0), 1),
    className: opts.classMap[candidate.className] ?? candidate.className,
  }));
}
