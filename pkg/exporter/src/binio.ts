/** Little-endian binary encoding helpers for the trajectory file formats. */

export function f32le(values: ArrayLike<number>): Uint8Array {
  const out = new Uint8Array(values.length * 4);
  const view = new DataView(out.buffer);
  for (let i = 0; i < values.length; i++) {
    view.setFloat32(i * 4, values[i], true);
  }
  return out;
}

export function u32le(values: ArrayLike<number>): Uint8Array {
  const out = new Uint8Array(values.length * 4);
  const view = new DataView(out.buffer);
  for (let i = 0; i < values.length; i++) {
    const v = values[i];
    if (!Number.isInteger(v) || v < 0 || v > 0xffffffff) {
      throw new Error(`u32le: value ${v} out of range`);
    }
    view.setUint32(i * 4, v, true);
  }
  return out;
}

export function readF32le(data: Uint8Array): Float64Array {
  if (data.length % 4 !== 0) {
    throw new Error(`readF32le: ${data.length} bytes is not a multiple of 4`);
  }
  const view = new DataView(data.buffer, data.byteOffset, data.byteLength);
  const out = new Float64Array(data.length / 4);
  for (let i = 0; i < out.length; i++) {
    out[i] = view.getFloat32(i * 4, true);
  }
  return out;
}
