// Client-side graph validation.
//
// The rule strings are shared verbatim with the server (see
// shared/validation_rules.json); the golden test keeps both sides equal, so
// a design that passes here cannot be rejected by the server's validator.

import { Design, Palette, roomIds } from "./types.js";

export const RULE_EMPTY = "graph must have ≥1 node";
export const RULE_DUPLICATE_NODE = "duplicate node id";
export const RULE_NONCONTIGUOUS = "node ids must be contiguous from 0";
export const RULE_SELF_LOOP = "self-loop";
export const RULE_DUPLICATE_EDGE = "duplicate edge";
export const RULE_UNKNOWN_ENDPOINT = "edge endpoint not a node id";
export const RULE_NON_ROOM = "non-room category";
export const RULE_CENTROID_RANGE = "centroid out of range";

export const VALIDATION_RULES: string[] = [
  RULE_EMPTY,
  RULE_DUPLICATE_NODE,
  RULE_NONCONTIGUOUS,
  RULE_SELF_LOOP,
  RULE_DUPLICATE_EDGE,
  RULE_UNKNOWN_ENDPOINT,
  RULE_NON_ROOM,
  RULE_CENTROID_RANGE,
];

export interface Violation {
  rule: string;
  subject: string;
}

export function violationText(v: Violation): string {
  return `${v.rule}: ${v.subject}`;
}

export function validateGraph(design: Design, palette: Palette): Violation[] {
  const out: Violation[] = [];
  if (design.nodes.length === 0) {
    out.push({ rule: RULE_EMPTY, subject: "graph" });
    return out;
  }
  const seen = new Set<number>();
  for (const n of design.nodes) {
    if (seen.has(n.id)) {
      out.push({ rule: RULE_DUPLICATE_NODE, subject: `node ${n.id}` });
    }
    seen.add(n.id);
  }
  const sorted = [...seen].sort((a, b) => a - b);
  if (!sorted.every((v, i) => v === i) || sorted.length !== design.nodes.length) {
    if (!sorted.every((v, i) => v === i)) {
      out.push({ rule: RULE_NONCONTIGUOUS, subject: `ids [${sorted.join(", ")}]` });
    }
  }
  const rooms = new Set(roomIds(palette));
  for (const n of design.nodes) {
    if (!rooms.has(n.category)) {
      out.push({ rule: RULE_NON_ROOM, subject: `node ${n.id}` });
    }
    if (n.x < 0 || n.x > 1 || n.y < 0 || n.y > 1) {
      out.push({ rule: RULE_CENTROID_RANGE, subject: `node ${n.id}` });
    }
  }
  const edgeKeys = new Set<string>();
  const ordered = design.edges
    .map(([a, b]): [number, number] => [Math.min(a, b), Math.max(a, b)])
    .sort((p, q) => p[0] - q[0] || p[1] - q[1]);
  for (const [a, b] of ordered) {
    if (a === b) {
      out.push({ rule: RULE_SELF_LOOP, subject: `edge (${a},${b})` });
      continue;
    }
    const key = `${a}-${b}`;
    if (edgeKeys.has(key)) {
      out.push({ rule: RULE_DUPLICATE_EDGE, subject: `edge (${a},${b})` });
      continue;
    }
    edgeKeys.add(key);
    if (!seen.has(a) || !seen.has(b)) {
      out.push({ rule: RULE_UNKNOWN_ENDPOINT, subject: `edge (${a},${b})` });
    }
  }
  return out;
}

// Boundary sanity (mirrors the server's polygon rejection rules).

export function validateBoundary(boundary: Array<[number, number]>): string[] {
  const problems: string[] = [];
  if (boundary.length < 3) {
    problems.push(`boundary needs ≥3 vertices, has ${boundary.length}`);
    return problems;
  }
  if (Math.abs(shoelace(boundary)) < 1e-12) {
    problems.push("boundary polygon has zero area");
  }
  if (selfIntersects(boundary)) {
    problems.push("boundary polygon is self-intersecting");
  }
  return problems;
}

function shoelace(v: Array<[number, number]>): number {
  let a = 0;
  for (let i = 0; i < v.length; i++) {
    const [x0, y0] = v[i];
    const [x1, y1] = v[(i + 1) % v.length];
    a += x0 * y1 - x1 * y0;
  }
  return a / 2;
}

function orient(a: [number, number], b: [number, number], c: [number, number]): number {
  const v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
  return Math.abs(v) < 1e-15 ? 0 : v > 0 ? 1 : -1;
}

function selfIntersects(verts: Array<[number, number]>): boolean {
  const n = verts.length;
  for (let i = 0; i < n; i++) {
    for (let j = i + 1; j < n; j++) {
      if (j === i || (j + 1) % n === i || (i + 1) % n === j) continue;
      const [p, q] = [verts[i], verts[(i + 1) % n]];
      const [r, s] = [verts[j], verts[(j + 1) % n]];
      const o1 = orient(p, q, r);
      const o2 = orient(p, q, s);
      const o3 = orient(r, s, p);
      const o4 = orient(r, s, q);
      if (o1 !== o2 && o3 !== o4 && o1 !== 0 && o2 !== 0 && o3 !== 0 && o4 !== 0) {
        return true;
      }
    }
  }
  return false;
}
