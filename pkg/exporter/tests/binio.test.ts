import { describe, expect, it } from "vitest";

import { f32le, readF32le, u32le } from "../src/binio.js";

describe("binary encoding", () => {
  it("writes float32 little-endian", () => {
    expect(Array.from(f32le([1.0]))).toEqual([0x00, 0x00, 0x80, 0x3f]);
    expect(Array.from(f32le([-2.0]))).toEqual([0x00, 0x00, 0x00, 0xc0]);
  });

  it("round-trips float32 values", () => {
    const values = [0.5, -2.25, 1e-3, 1234.5];
    const back = readF32le(f32le(values));
    for (let i = 0; i < values.length; i++) {
      expect(back[i]).toBeCloseTo(values[i], 5);
    }
  });

  it("writes uint32 little-endian and rejects bad values", () => {
    expect(Array.from(u32le([1, 258]))).toEqual([1, 0, 0, 0, 2, 1, 0, 0]);
    expect(() => u32le([-1])).toThrow();
    expect(() => u32le([1.5])).toThrow();
  });

  it("rejects truncated buffers", () => {
    expect(() => readF32le(new Uint8Array(5))).toThrow();
  });
});
