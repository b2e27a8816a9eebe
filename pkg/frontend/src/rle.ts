// Run-length label transport; must stay byte-compatible with the service
// encoder (shared/rle_vectors.json is the contract).

import { Rle } from "./types.js";

export function decodeRle(rle: Rle): Int32Array {
  const [h, w] = rle.shape;
  const total = rle.runs.reduce((acc, [, len]) => acc + len, 0);
  if (total !== h * w) {
    throw new Error(`RLE runs cover ${total} pixels, expected ${h * w}`);
  }
  const out = new Int32Array(h * w);
  let pos = 0;
  for (const [value, length] of rle.runs) {
    if (length <= 0) throw new Error("RLE run lengths must be positive");
    out.fill(value, pos, pos + length);
    pos += length;
  }
  return out;
}

export function encodeRle(labels: Int32Array, h: number, w: number): Rle {
  if (labels.length !== h * w) {
    throw new Error(`labels length ${labels.length} does not match ${h}x${w}`);
  }
  const runs: Array<[number, number]> = [];
  let i = 0;
  while (i < labels.length) {
    let j = i + 1;
    while (j < labels.length && labels[j] === labels[i]) j++;
    runs.push([labels[i], j - i]);
    i = j;
  }
  return { shape: [h, w], runs };
}
