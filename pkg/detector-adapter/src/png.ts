/** PNG header inspection: dimensions without a full decode.
 *
 * The harness stores every frame and candidate as PNG, so the adapter only
 * needs this one container. The IHDR chunk is mandatory and first, with
 * width/height big-endian at fixed offsets.
 */

import { openSync, readSync, closeSync } from "node:fs";

const PNG_SIGNATURE = Buffer.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]);

export interface ImageSize {
  width: number;
  height: number;
}

export function pngSize(path: string): ImageSize {
  const header = Buffer.alloc(26);
  let fd: number;
  try {
    fd = openSync(path, "r");
  } catch (err) {
    throw new Error(`unreadable image ${path}: ${(err as Error).message}`);
  }
  try {
    const got = readSync(fd, header, 0, header.length, 0);
    if (got < header.length || !header.subarray(0, 8).equals(PNG_SIGNATURE)) {
      throw new Error(`unreadable image ${path}: not a PNG`);
    }
    if (header.toString("ascii", 12, 16) !== "IHDR") {
      throw new Error(`unreadable image ${path}: missing IHDR`);
    }
    const width = header.readUInt32BE(16);
    const height = header.readUInt32BE(20);
    if (width === 0 || height === 0) {
      throw new Error(`unreadable image ${path}: zero dimension`);
    }
    return { width, height };
  } finally {
    closeSync(fd);
  }
}
