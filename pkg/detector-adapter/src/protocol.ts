/**
 * Wire protocol: JSON Lines over stdin/stdout.
 *
 * The client opens with a handshake announcing the protocol version; every
 * later line is a detection request answered by exactly one response line
 * carrying the same id.
 */

export const PROTOCOL_VERSION = "degrade-bench/1";

export interface WireDetection {
  class: string;
  x_min: number;
  y_min: number;
  x_max: number;
  y_max: number;
  confidence: number;
}

export interface HandshakeRequest {
  type: "handshake";
  version?: string;
}

export interface DetectRequest {
  id: string | number;
  image_path: string;
}

export type Request = HandshakeRequest | DetectRequest;

export interface HandshakeResponse {
  type: "handshake";
  version: string;
  detector: Record<string, unknown>;
}

export interface DetectResponse {
  id: string | number;
  detections: WireDetection[];
}

export interface ErrorResponse {
  id: string | number | null;
  error: string;
}

export type Response = HandshakeResponse | DetectResponse | ErrorResponse;

export function isHandshake(request: Request): request is HandshakeRequest {
  return (request as HandshakeRequest).type === "handshake";
}

export function parseRequestLine(line: string): Request {
  let parsed: unknown;
  try {
    parsed = JSON.parse(line);
  } catch {
    throw new Error(`request is not valid JSON: ${line.slice(0, 120)}`);
  }
  if (typeof parsed !== "object" || parsed === null || Array.isArray(parsed)) {
    throw new Error("request must be a JSON object");
  }
  const obj = parsed as Record<string, unknown>;
  if (obj.type === "handshake") {
    return { type: "handshake", version: obj.version as string | undefined };
  }
  if (obj.id === undefined || typeof obj.image_path !== "string") {
    throw new Error("detection request needs 'id' and 'image_path'");
  }
  return { id: obj.id as string | number, image_path: obj.image_path };
}

export function serializeResponse(response: Response): string {
  return JSON.stringify(response) + "\n";
}
