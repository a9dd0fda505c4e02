/** Run-length mask encoding shared with the service: row-major runs,
 * alternating zero/one, starting with the zero run. */

import type { RLEMask } from "./types.js";

export function rleEncode(mask: Uint8Array, height: number, width: number): RLEMask {
  if (mask.length !== height * width) {
    throw new Error(`mask length ${mask.length} does not match ${height}x${width}`);
  }
  const counts: number[] = [];
  let current = 0;
  let run = 0;
  for (const bit of mask) {
    const b = bit ? 1 : 0;
    if (b === current) {
      run += 1;
    } else {
      counts.push(run);
      current = b;
      run = 1;
    }
  }
  counts.push(run);
  return { size: [height, width], counts };
}

export function rleDecode(rle: RLEMask): Uint8Array {
  const [height, width] = rle.size;
  const total = rle.counts.reduce((a, b) => a + b, 0);
  if (total !== height * width) {
    throw new Error(`RLE counts sum to ${total}, expected ${height * width}`);
  }
  const mask = new Uint8Array(height * width);
  let pos = 0;
  let bit = 0;
  for (const run of rle.counts) {
    if (bit) mask.fill(1, pos, pos + run);
    pos += run;
    bit = 1 - bit;
  }
  return mask;
}
