// Immutable design mutations; every editor action maps to one of these, so
// the undo stack can store plain snapshots.

import { Design, DesignNode, Edge } from "./types.js";

export function emptyDesign(): Design {
  return { boundary: [], nodes: [], edges: [] };
}

export function squareDesign(margin = 0.1): Design {
  return {
    boundary: [
      [margin, margin],
      [1 - margin, margin],
      [1 - margin, 1 - margin],
      [margin, 1 - margin],
    ],
    nodes: [],
    edges: [],
  };
}

function clone(d: Design): Design {
  return {
    boundary: d.boundary.map(([x, y]) => [x, y] as [number, number]),
    nodes: d.nodes.map((n) => ({ ...n })),
    edges: d.edges.map(([a, b]) => [a, b] as Edge),
  };
}

export function addBoundaryVertex(d: Design, x: number, y: number): Design {
  const next = clone(d);
  next.boundary.push([x, y]);
  return next;
}

export function moveBoundaryVertex(d: Design, index: number, x: number, y: number): Design {
  const next = clone(d);
  next.boundary[index] = [x, y];
  return next;
}

export function removeBoundaryVertex(d: Design, index: number): Design {
  const next = clone(d);
  next.boundary.splice(index, 1);
  return next;
}

export function addNode(d: Design, category: number, x: number, y: number): Design {
  const next = clone(d);
  const id = next.nodes.length;
  next.nodes.push({ id, category, x, y });
  return next;
}

export function moveNode(d: Design, id: number, x: number, y: number): Design {
  const next = clone(d);
  const node = next.nodes.find((n) => n.id === id);
  if (node) {
    node.x = x;
    node.y = y;
  }
  return next;
}

export function setNodeCategory(d: Design, id: number, category: number): Design {
  const next = clone(d);
  const node = next.nodes.find((n) => n.id === id);
  if (node) node.category = category;
  return next;
}

export function removeNode(d: Design, id: number): Design {
  const next = clone(d);
  next.nodes = next.nodes.filter((n) => n.id !== id);
  // reindex to keep ids contiguous, remapping edges along the way
  const remap = new Map<number, number>();
  next.nodes.forEach((n, i) => remap.set(n.id, i));
  next.nodes = next.nodes.map((n, i) => ({ ...n, id: i }));
  next.edges = next.edges
    .filter(([a, b]) => remap.has(a) && remap.has(b))
    .map(([a, b]) => [remap.get(a)!, remap.get(b)!] as Edge);
  return next;
}

/** Connect two nodes, or disconnect them when the edge already exists. */
export function toggleEdge(d: Design, a: number, b: number): Design {
  const next = clone(d);
  const key: Edge = [Math.min(a, b), Math.max(a, b)];
  const at = next.edges.findIndex(([p, q]) => p === key[0] && q === key[1]);
  if (at >= 0) {
    next.edges.splice(at, 1);
  } else {
    next.edges.push(key);
  }
  return next;
}

export function nodeAt(d: Design, x: number, y: number, radius: number): DesignNode | null {
  for (let i = d.nodes.length - 1; i >= 0; i--) {
    const n = d.nodes[i];
    if (Math.hypot(n.x - x, n.y - y) <= radius) return n;
  }
  return null;
}

export function boundaryVertexAt(d: Design, x: number, y: number, radius: number): number {
  for (let i = d.boundary.length - 1; i >= 0; i--) {
    const [vx, vy] = d.boundary[i];
    if (Math.hypot(vx - x, vy - y) <= radius) return i;
  }
  return -1;
}
