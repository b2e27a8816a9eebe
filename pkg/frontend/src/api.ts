// Service client. One generate request may be in flight at a time; a new
// submission aborts the pending one.

import { Design, GenerateResponse, Palette, ServiceError } from "./types.js";

export interface GenerateOptions {
  resolution: number;
  return_png: boolean;
}

/** Request payload for a design; node positions become centroid hints. */
export function designToRequest(design: Design, options: GenerateOptions, wallPx = 2): unknown {
  return {
    boundary: { polygons: [design.boundary], wall_px: wallPx },
    graph: {
      nodes: design.nodes.map((n) => ({
        id: n.id,
        category: n.category,
        centroid: [n.x, n.y],
      })),
      edges: design.edges.map(([a, b]) => [a, b]),
    },
    options: { resolution: options.resolution, return_png: options.return_png },
  };
}

export class ServiceUnreachable extends Error {
  constructor(cause: unknown) {
    super(`service unreachable: ${cause}`);
  }
}

export class RequestFailed extends Error {
  constructor(
    public status: number,
    public detail: ServiceError,
  ) {
    super(`${status}: ${detail.code} ${detail.message}`);
  }
}

export class ApiClient {
  private pending: AbortController | null = null;

  constructor(private baseUrl: string) {}

  async classes(): Promise<{ palette: Palette; version: string }> {
    const res = await this.get("/v1/classes");
    return (await res.json()) as { palette: Palette; version: string };
  }

  async health(): Promise<{ status: string; model_version?: string }> {
    const res = await this.get("/v1/health");
    return (await res.json()) as { status: string; model_version?: string };
  }

  /** POST /v1/generate, cancelling any still-pending generate call. */
  async generate(design: Design, options: GenerateOptions): Promise<GenerateResponse> {
    this.pending?.abort();
    const controller = new AbortController();
    this.pending = controller;
    let res: Response;
    try {
      res = await fetch(`${this.baseUrl}/v1/generate`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(designToRequest(design, options)),
        signal: controller.signal,
      });
    } catch (err) {
      if ((err as Error).name === "AbortError") throw err;
      throw new ServiceUnreachable(err);
    } finally {
      if (this.pending === controller) this.pending = null;
    }
    if (!res.ok) {
      throw new RequestFailed(res.status, (await res.json()) as ServiceError);
    }
    return (await res.json()) as GenerateResponse;
  }

  private async get(path: string): Promise<Response> {
    try {
      return await fetch(`${this.baseUrl}${path}`);
    } catch (err) {
      throw new ServiceUnreachable(err);
    }
  }
}
