import { describe, expect, it } from "vitest";

import {
  PROTOCOL_VERSION,
  isHandshake,
  parseRequestLine,
  serializeResponse,
} from "../src/protocol.js";

describe("parseRequestLine", () => {
  it("parses handshakes", () => {
    const req = parseRequestLine('{"type": "handshake", "version": "degrade-bench/1"}');
    expect(isHandshake(req)).toBe(true);
  });

  it("parses detection requests with string or numeric ids", () => {
    const a = parseRequestLine('{"id": "r-1", "image_path": "/x.png"}');
    expect(isHandshake(a)).toBe(false);
    expect(a).toEqual({ id: "r-1", image_path: "/x.png" });
    const b = parseRequestLine('{"id": 7, "image_path": "/y.png"}');
    expect(b).toEqual({ id: 7, image_path: "/y.png" });
  });

  it("rejects junk", () => {
    expect(() => parseRequestLine("nope")).toThrow(/not valid JSON/);
    expect(() => parseRequestLine("[1,2]")).toThrow(/JSON object/);
    expect(() => parseRequestLine('{"id": 1}')).toThrow(/image_path/);
  });
});

describe("serializeResponse", () => {
  it("emits one newline-terminated JSON line", () => {
    const line = serializeResponse({ id: 1, detections: [] });
    expect(line.endsWith("\n")).toBe(true);
    expect(JSON.parse(line)).toEqual({ id: 1, detections: [] });
  });

  it("carries the protocol version in handshakes", () => {
    const line = serializeResponse({
      type: "handshake",
      version: PROTOCOL_VERSION,
      detector: {},
    });
    expect(JSON.parse(line).version).toBe("degrade-bench/1");
  });
});
