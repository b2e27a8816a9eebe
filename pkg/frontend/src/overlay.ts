// Pure overlay rendering: labels -> RGBA pixels at 60% opacity.
//
// Kept DOM-free so determinism is testable; main.ts blits the buffer into a
// canvas via ImageData.

import { Palette, Rle } from "./types.js";
import { decodeRle } from "./rle.js";

export const OVERLAY_ALPHA = 0.6;

/** Nearest-neighbor source index per destination index: floor(i*src/dst). */
export function nearestIndexMap(src: number, dst: number): Int32Array {
  const map = new Int32Array(dst);
  for (let i = 0; i < dst; i++) map[i] = Math.floor((i * src) / dst);
  return map;
}

export function renderOverlay(
  rle: Rle,
  palette: Palette,
  outW: number,
  outH: number,
  hideClass: number | null = null,
): Uint8ClampedArray<ArrayBuffer> {
  const labels = decodeRle(rle);
  const [h, w] = rle.shape;
  const colors = new Map(palette.entries.map((e) => [e.id, e.rgb]));
  const rows = nearestIndexMap(h, outH);
  const cols = nearestIndexMap(w, outW);
  const alpha = Math.round(OVERLAY_ALPHA * 255);
  const out = new Uint8ClampedArray(outW * outH * 4);
  for (let y = 0; y < outH; y++) {
    const srcRow = rows[y] * w;
    for (let x = 0; x < outW; x++) {
      const cls = labels[srcRow + cols[x]];
      const o = (y * outW + x) * 4;
      if (cls === hideClass) continue; // transparent
      const rgb = colors.get(cls);
      if (!rgb) throw new Error(`class ${cls} missing from palette`);
      out[o] = rgb[0];
      out[o + 1] = rgb[1];
      out[o + 2] = rgb[2];
      out[o + 3] = alpha;
    }
  }
  return out;
}

export interface LegendItem {
  id: number;
  name: string;
  rgb: [number, number, number];
}

/** Only the classes actually present in the labels, in palette order. */
export function legendFor(rle: Rle, palette: Palette): LegendItem[] {
  const present = new Set(decodeRle(rle));
  return palette.entries
    .filter((e) => present.has(e.id))
    .sort((a, b) => a.id - b.id)
    .map((e) => ({ id: e.id, name: e.name, rgb: e.rgb }));
}
