/** 64-bit FNV-1a, the checksum the trajectory manifest format prescribes. */

const FNV_OFFSET = 0xcbf29ce484222325n;
const FNV_PRIME = 0x100000001b3n;
const MASK64 = 0xffffffffffffffffn;

export function fnv1a64(data: Uint8Array): string {
  let h = FNV_OFFSET;
  for (let i = 0; i < data.length; i++) {
    h = ((h ^ BigInt(data[i])) * FNV_PRIME) & MASK64;
  }
  return h.toString(16).padStart(16, "0");
}

export function fnv1a64String(text: string): string {
  return fnv1a64(new TextEncoder().encode(text));
}
