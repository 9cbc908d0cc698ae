/** The long-running protocol loop.
 *
 * Requests are handled strictly in order, one response line per request
 * line, ids correlated. A failing request (unreadable image, backend error)
 * produces an error response carrying the request id; it never takes the
 * process down.
 */

import { createInterface } from "node:readline";
import { Readable, Writable } from "node:stream";

import { DetectorBackend } from "./backend.js";
import { AdapterConfig } from "./config.js";
import { postprocess } from "./detections.js";
import { pngSize } from "./png.js";
import {
  PROTOCOL_VERSION,
  Response,
  WireDetection,
  isHandshake,
  parseRequestLine,
  serializeResponse,
} from "./protocol.js";

export function handshakeMetadata(
  config: AdapterConfig,
  backend: DetectorBackend,
): Record<string, unknown> {
  return {
    name: "detector-adapter",
    backend: backend.info,
    conf_threshold: config.confThreshold,
    nms_iou_threshold: config.nmsIouThreshold,
    class_map: config.classMap,
  };
}

export async function serve(
  backend: DetectorBackend,
  config: AdapterConfig,
  input: Readable,
  output: Writable,
): Promise<void> {
  const write = (response: Response) => {
    output.write(serializeResponse(response));
  };
  const reader = createInterface({ input, crlfDelay: Infinity });
  for await (const line of reader) {
    if (!line.trim()) continue;
    let requestId: string | number | null = null;
    try {
      const request = parseRequestLine(line);
      if (isHandshake(request)) {
        write({
          type: "handshake",
          version: PROTOCOL_VERSION,
          detector: handshakeMetadata(config, backend),
        });
        continue;
      }
      requestId = request.id;
      const size = pngSize(request.image_path);
      const image = { path: request.image_path, ...size };
      const candidates = await backend.detect(image);
      const detections = postprocess(candidates, {
        confThreshold: config.confThreshold,
        nmsIouThreshold: config.nmsIouThreshold,
        width: size.width,
        height: size.height,
        classMap: config.classMap,
      });
      write({ id: request.id, detections: detections.map(toWire) });
    } catch (err) {
      write({ id: requestId, error: (err as Error).message });
    }
  }
}

function toWire(candidate: {
  box: { xMin: number; yMin: number; xMax: number; yMax: number };
  confidence: number;
  className: string;
}): WireDetection {
  return {
    class: candidate.className,
    x_min: candidate.box.xMin,
    y_min: candidate.box.yMin,
    x_max: candidate.box.xMax,
    y_max: candidate.box.yMax,
    confidence: candidate.confidence,
  };
}
