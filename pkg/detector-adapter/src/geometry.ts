/** Box math: letterbox preprocessing and its inverse, clamping, IoU. */

export interface Box {
  xMin: number;
  yMin: number;
  xMax: number;
  yMax: number;
}

/** How an image was fitted onto the square model input. */
export interface LetterboxMapping {
  scale: number;
  padX: number;
  padY: number;
  inputSize: number;
}

/**
 * Aspect-preserving fit of (width x height) into a square input with
 * symmetric padding, the standard YOLO-family preprocessing.
 */
export function letterboxMapping(
  width: number,
  height: number,
  inputSize: number,
): LetterboxMapping {
  if (width <= 0 || height <= 0) {
    throw new Error(`image dimensions must be positive, got ${width}x${height}`);
  }
  const scale = Math.min(inputSize / width, inputSize / height);
  const padX = (inputSize - width * scale) / 2;
  const padY = (inputSize - height * scale) / 2;
  return { scale, padX, padY, inputSize };
}

/** Map a box from model-input coordinates back to original image pixels. */
export function unmapBox(box: Box, mapping: LetterboxMapping): Box {
  return {
    xMin: (box.xMin - mapping.padX) / mapping.scale,
    yMin: (box.yMin - mapping.padY) / mapping.scale,
    xMax: (box.xMax - mapping.padX) / mapping.scale,
    yMax: (box.yMax - mapping.padY) / mapping.scale,
  };
}

/** Clamp a box to the image rectangle so 0 <= xMin <= xMax <= width. */
export function clampBox(box: Box, width: number, height: number): Box {
  const clamp = (v: number, hi: number) => Math.min(Math.max(v, 0), hi);
  const xMin = clamp(box.xMin, width);
  const xMax = clamp(box.xMax, width);
  const yMin = clamp(box.yMin, height);
  const yMax = clamp(box.yMax, height);
  return {
    xMin: Math.min(xMin, xMax),
    yMin: Math.min(yMin, yMax),
    xMax: Math.max(xMin, xMax),
    yMax: Math.max(yMin, yMax),
  };
}

export function boxArea(box: Box): number {
  return Math.max(0, box.xMax - box.xMin) * Math.max(0, box.yMax - box.yMin);
}

export function iou(a: Box, b: Box): number {
  const interW = Math.min(a.xMax, b.xMax) - Math.max(a.xMin, b.xMin);
  const interH = Math.min(a.yMax, b.yMax) - Math.max(a.yMin, b.yMin);
  const inter = Math.max(interW, 0) * Math.max(interH, 0);
  const union = boxArea(a) + boxArea(b) - inter;
  return union <= 0 ? 0 : inter / union;
}

/** Center/size (YOLO head output) to corner form. */
export function xywhToBox(cx: number, cy: number, w: number, h: number): Box {
  return { xMin: cx - w / 2, yMin: cy - h / 2, xMax: cx + w / 2, yMax: cy + h / 2 };
}
