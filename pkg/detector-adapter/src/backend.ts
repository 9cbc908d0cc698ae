/** Inference backends behind the protocol server.
 *
 * A backend turns one image into candidate detections in original-image
 * pixel coordinates, before the shared confidence/NMS/clamp post-processing.
 */

import { readFileSync } from "node:fs";
import { basename } from "node:path";

import { Candidate } from "./detections.js";

export interface ImageRef {
  path: string;
  width: number;
  height: number;
}

export interface DetectorBackend {
  /** Metadata reported in the handshake (model identity, settings). */
  readonly info: Record<string, unknown>;
  detect(image: ImageRef): Promise<Candidate[]>;
}

interface FixtureEntry {
  class: string;
  confidence: number;
  /** [xMin, yMin, xMax, yMax] in original image pixels */
  box: [number, number, number, number];
}

/**
 * Deterministic backend driven by a JSON file: maps image basenames to
 * detection lists, with "*" as fallback. Used by tests and offline runs.
 */
export class FixtureBackend implements DetectorBackend {
  readonly info: Record<string, unknown>;
  private readonly entries: Record<string, FixtureEntry[]>;

  constructor(fixturePath: string) {
    const raw = JSON.parse(readFileSync(fixturePath, "utf-8"));
    this.entries = raw.images ?? {};
    this.info = { kind: "fixture", source: fixturePath };
  }

  async detect(image: ImageRef): Promise<Candidate[]> {
    const entries = this.entries[basename(image.path)] ?? this.entries["*"] ?? [];
    return entries.map((entry) => ({
      className: entry.class,
      confidence: entry.confidence,
      box: {
        xMin: entry.box[0],
        yMin: entry.box[1],
        xMax: entry.box[2],
        yMax: entry.box[3],
      },
    }));
  }
}
