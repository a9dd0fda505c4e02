import { describe, expect, it } from "vitest";

import { rleDecode, rleEncode } from "../src/rle";

describe("run-length mask encoding", () => {
  it("round-trips random masks", () => {
    for (let seed = 0; seed < 20; seed++) {
      const mask = new Uint8Array(12 * 7);
      for (let i = 0; i < mask.length; i++) {
        mask[i] = (i * 2654435761 + seed * 97) % 5 < 2 ? 1 : 0;
      }
      const decoded = rleDecode(rleEncode(mask, 12, 7));
      expect(Array.from(decoded)).toEqual(Array.from(mask));
    }
  });

  it("starts with the zero run", () => {
    const full = new Uint8Array(16).fill(1);
    expect(rleEncode(full, 4, 4).counts).toEqual([0, 16]);
    const empty = new Uint8Array(16);
    expect(rleEncode(empty, 4, 4).counts).toEqual([16]);
  });

  it("rejects size mismatches", () => {
    expect(() => rleEncode(new Uint8Array(5), 4, 4)).toThrow(/does not match/);
    expect(() => rleDecode({ size: [4, 4], counts: [3] })).toThrow(/RLE/);
  });
});
