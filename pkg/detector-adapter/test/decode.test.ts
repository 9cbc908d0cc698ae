import { describe, expect, it } from "vitest";

import { decodePredictions } from "../src/decode.js";

describe("decodePredictions v5 layout", () => {
  // rows of (cx, cy, w, h, objectness, p_person, p_car)
  const rows = [
    [100, 80, 40, 60, 0.9, 0.8, 0.1],
    [300, 200, 50, 50, 0.05, 0.9, 0.0],
    [10, 10, 4, 4, 0.9, 0.2, 0.7],
  ];
  const data = Float32Array.from(rows.flat());
  const shape = [1, 3, 7];

  it("multiplies objectness into the class score", () => {
    const out = decodePredictions(data, shape, { style: "v5", confThreshold: 0.0 });
    expect(out).toHaveLength(3);
    expect(out[0].confidence).toBeCloseTo(0.9 * 0.8, 6);
    expect(out[0].classId).toBe(0);
    expect(out[2].classId).toBe(1);
  });

  it("applies the candidate threshold", () => {
    const out = decodePredictions(data, shape, { style: "v5", confThreshold: 0.5 });
    expect(out).toHaveLength(2);
  });

  it("converts centers to corners", () => {
    const [first] = decodePredictions(data, shape, { style: "v5", confThreshold: 0.5 });
    expect(first.box).toEqual({ xMin: 80, yMin: 50, xMax: 120, yMax: 110 });
  });
});

describe("decodePredictions v8 layout", () => {
  // channels x columns: (cx, cy, w, h, p_person, p_car), two columns
  const channels = [
    [100, 300], // cx
    [80, 200], // cy
    [40, 50], // w
    [60, 50], // h
    [0.85, 0.2], // p_person
    [0.05, 0.6], // p_car
  ];
  const data = Float32Array.from(channels.flat());
  const shape = [1, 6, 2];

  it("takes the max class probability as confidence", () => {
    const out = decodePredictions(data, shape, { style: "v8", confThreshold: 0.0 });
    expect(out).toHaveLength(2);
    expect(out[0].confidence).toBeCloseTo(0.85, 6);
    expect(out[0].classId).toBe(0);
    expect(out[1].confidence).toBeCloseTo(0.6, 6);
    expect(out[1].classId).toBe(1);
  });

  it("reads the transposed layout correctly", () => {
    const [first] = decodePredictions(data, shape, { style: "v8", confThreshold: 0.7 });
    expect(first.box).toEqual({ xMin: 80, yMin: 50, xMax: 120, yMax: 110 });
  });
});

describe("shape validation", () => {
  it("rejects non-batch-1 shapes", () => {
    expect(() =>
      decodePredictions(new Float32Array(12), [2, 2, 3], { style: "v5", confThreshold: 0 }),
    ).toThrow();
  });

  it("rejects too-narrow rows", () => {
    expect(() =>
      decodePredictions(new Float32Array(10), [1, 2, 5], { style: "v5", confThreshold: 0 }),
    ).toThrow();
  });
});
