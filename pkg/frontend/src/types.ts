// Wire types mirroring the service's JSON schemas.

export interface PaletteEntry {
  id: number;
  name: string;
  rgb: [number, number, number];
}

export interface Palette {
  entries: PaletteEntry[];
  background: number;
  structure: number;
}

export function roomIds(palette: Palette): number[] {
  return palette.entries
    .map((e) => e.id)
    .filter((id) => id !== palette.background && id !== palette.structure)
    .sort((a, b) => a - b);
}

export interface DesignNode {
  id: number;
  category: number;
  x: number; // normalized [0,1]
  y: number;
}

export type Edge = [number, number];

export interface Design {
  boundary: Array<[number, number]>; // normalized polygon vertices
  nodes: DesignNode[];
  edges: Edge[];
}

export interface Rle {
  shape: [number, number];
  runs: Array<[number, number]>;
}

export interface GenerateResponse {
  labels: { rle: Rle; palette_version: string };
  png: string | null;
  timing_ms: number;
  model_version: string;
}

export interface ServiceError {
  code: string;
  message: string;
  violations?: string[];
  errors?: Array<{ loc: string[]; msg: string }>;
}
