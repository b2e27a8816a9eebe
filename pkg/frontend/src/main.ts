// Canvas app: sketch a boundary, compose the room graph, generate, inspect.

import { ApiClient, GenerateOptions, RequestFailed, ServiceUnreachable } from "./api.js";
import {
  addBoundaryVertex,
  addNode,
  boundaryVertexAt,
  moveBoundaryVertex,
  moveNode,
  nodeAt,
  removeBoundaryVertex,
  removeNode,
  setNodeCategory,
  squareDesign,
  toggleEdge,
} from "./design.js";
import { UndoStack } from "./history.js";
import { legendFor, renderOverlay } from "./overlay.js";
import { Design, GenerateResponse, Palette, roomIds } from "./types.js";
import { validateBoundary, validateGraph, violationText } from "./validation.js";

const PICK_RADIUS = 0.03;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

class App {
  private canvas = el<HTMLCanvasElement>("canvas");
  private ctx = this.canvas.getContext("2d")!;
  private status = el<HTMLDivElement>("status");
  private meta = el<HTMLDivElement>("meta");
  private legend = el<HTMLUListElement>("legend");
  private categorySelect = el<HTMLSelectElement>("category");
  private resolutionSelect = el<HTMLSelectElement>("resolution");
  private history = new UndoStack<Design>(squareDesign());
  private palette: Palette | null = null;
  private response: GenerateResponse | null = null;
  private selectedNode: number | null = null;
  private dragging: { kind: "vertex" | "node"; index: number } | null = null;
  private dragMoved = false;
  private client: ApiClient;

  constructor() {
    this.client = new ApiClient(el<HTMLInputElement>("service-url").value);
    el<HTMLInputElement>("service-url").addEventListener("change", (e) => {
      this.client = new ApiClient((e.target as HTMLInputElement).value);
      void this.loadPalette();
    });
    el<HTMLButtonElement>("generate").addEventListener("click", () => void this.generate());
    el<HTMLButtonElement>("undo").addEventListener("click", () => this.apply(this.history.undo()));
    el<HTMLButtonElement>("redo").addEventListener("click", () => this.apply(this.history.redo()));
    el<HTMLButtonElement>("square").addEventListener("click", () => this.push(squareDesign()));
    document.addEventListener("keydown", (e) => {
      if ((e.ctrlKey || e.metaKey) && e.key === "z") this.apply(this.history.undo());
      if ((e.ctrlKey || e.metaKey) && e.key === "y") this.apply(this.history.redo());
    });
    this.canvas.addEventListener("mousedown", (e) => this.onDown(e));
    this.canvas.addEventListener("mousemove", (e) => this.onMove(e));
    this.canvas.addEventListener("mouseup", (e) => this.onUp(e));
    this.canvas.addEventListener("contextmenu", (e) => {
      e.preventDefault();
      this.onRightClick(e);
    });
    void this.loadPalette();
    this.redraw();
  }

  private get design(): Design {
    return this.history.value;
  }

  private mode(): "boundary" | "rooms" {
    const checked = document.querySelector<HTMLInputElement>('input[name="mode"]:checked');
    return (checked?.value as "boundary" | "rooms") ?? "boundary";
  }

  private norm(e: MouseEvent): [number, number] {
    const rect = this.canvas.getBoundingClientRect();
    return [(e.clientX - rect.left) / rect.width, (e.clientY - rect.top) / rect.height];
  }

  private push(next: Design): void {
    this.history.push(next);
    this.apply(next);
  }

  private apply(_: Design): void {
    this.response = null; // edits invalidate the last overlay
    this.validate();
    this.redraw();
  }

  private async loadPalette(): Promise<void> {
    try {
      const { palette } = await this.client.classes();
      this.palette = palette;
      this.categorySelect.innerHTML = "";
      for (const id of roomIds(palette)) {
        const entry = palette.entries.find((e) => e.id === id)!;
        const opt = document.createElement("option");
        opt.value = String(id);
        opt.textContent = entry.name;
        this.categorySelect.appendChild(opt);
      }
      this.status.textContent = "connected";
      this.validate();
      this.redraw();
    } catch {
      this.status.textContent = "service unreachable (palette not loaded)";
    }
  }

  private selectedCategory(): number {
    return Number(this.categorySelect.value);
  }

  private onDown(e: MouseEvent): void {
    const [x, y] = this.norm(e);
    this.dragMoved = false;
    if (this.mode() === "boundary") {
      const idx = boundaryVertexAt(this.design, x, y, PICK_RADIUS);
      if (idx >= 0) this.dragging = { kind: "vertex", index: idx };
    } else {
      const node = nodeAt(this.design, x, y, PICK_RADIUS);
      if (node) this.dragging = { kind: "node", index: node.id };
    }
  }

  private onMove(e: MouseEvent): void {
    if (!this.dragging) return;
    const [x, y] = this.norm(e);
    this.dragMoved = true;
    // live preview without committing to history until mouseup
    const d = this.design;
    const preview =
      this.dragging.kind === "vertex"
        ? moveBoundaryVertex(d, this.dragging.index, x, y)
        : moveNode(d, this.dragging.index, x, y);
    this.drawDesign(preview);
  }

  private onUp(e: MouseEvent): void {
    const [x, y] = this.norm(e);
    if (this.dragging) {
      if (this.dragMoved) {
        const d = this.design;
        this.push(
          this.dragging.kind === "vertex"
            ? moveBoundaryVertex(d, this.dragging.index, x, y)
            : moveNode(d, this.dragging.index, x, y),
        );
        this.dragging = null;
        return;
      }
      // click without movement: selection / edge toggling
      if (this.dragging.kind === "node") {
        const id = this.dragging.index;
        this.dragging = null;
        if (this.selectedNode === null || this.selectedNode === id) {
          this.selectedNode = this.selectedNode === id ? null : id;
        } else {
          this.push(toggleEdge(this.design, this.selectedNode, id));
          this.selectedNode = null;
        }
        this.redraw();
        return;
      }
      this.dragging = null;
      return;
    }
    if (this.mode() === "boundary") {
      this.push(addBoundaryVertex(this.design, x, y));
    } else {
      this.push(addNode(this.design, this.selectedCategory(), x, y));
    }
  }

  private onRightClick(e: MouseEvent): void {
    const [x, y] = this.norm(e);
    if (this.mode() === "boundary") {
      const idx = boundaryVertexAt(this.design, x, y, PICK_RADIUS);
      if (idx >= 0) this.push(removeBoundaryVertex(this.design, idx));
    } else {
      const node = nodeAt(this.design, x, y, PICK_RADIUS);
      if (node) {
        if (e.shiftKey) {
          this.push(removeNode(this.design, node.id));
        } else {
          this.push(setNodeCategory(this.design, node.id, this.selectedCategory()));
        }
      }
    }
  }

  private validate(): string[] {
    const problems = validateBoundary(this.design.boundary);
    if (this.palette) {
      problems.push(...validateGraph(this.design, this.palette).map(violationText));
    }
    this.status.textContent = problems.length ? problems.join("; ") : "design valid";
    return problems;
  }

  private async generate(): Promise<void> {
    if (!this.palette) {
      this.status.textContent = "service unreachable (palette not loaded)";
      return;
    }
    const problems = this.validate();
    if (problems.length) return;
    const options: GenerateOptions = {
      resolution: Number(this.resolutionSelect.value),
      return_png: false,
    };
    this.status.textContent = "generating…";
    try {
      this.response = await this.client.generate(this.design, options);
      this.status.textContent = "ok";
      this.meta.textContent = `model ${this.response.model_version} · ${this.response.timing_ms.toFixed(0)} ms`;
    } catch (err) {
      this.response = null;
      if (err instanceof RequestFailed) {
        const extra = err.detail.violations?.join("; ") ?? "";
        this.status.textContent = `${err.status} ${err.detail.code}: ${err.detail.message} ${extra}`;
      } else if (err instanceof ServiceUnreachable) {
        this.status.textContent = "service unreachable; design preserved";
      } else if ((err as Error).name === "AbortError") {
        return; // superseded by a newer submission
      } else {
        this.status.textContent = String(err);
      }
    }
    this.redraw();
  }

  private redraw(): void {
    this.drawDesign(this.design);
  }

  private drawDesign(d: Design): void {
    const { width, height } = this.canvas;
    const ctx = this.ctx;
    ctx.clearRect(0, 0, width, height);
    ctx.fillStyle = "#ffffff";
    ctx.fillRect(0, 0, width, height);

    // boundary sketch
    if (d.boundary.length) {
      ctx.strokeStyle = "#333";
      ctx.lineWidth = 2;
      ctx.beginPath();
      d.boundary.forEach(([x, y], i) => {
        if (i === 0) ctx.moveTo(x * width, y * height);
        else ctx.lineTo(x * width, y * height);
      });
      ctx.closePath();
      ctx.stroke();
      ctx.fillStyle = "#333";
      for (const [x, y] of d.boundary) {
        ctx.beginPath();
        ctx.arc(x * width, y * height, 4, 0, Math.PI * 2);
        ctx.fill();
      }
    }

    // generated overlay at 60% opacity above the sketch
    if (this.response && this.palette) {
      const buf = renderOverlay(this.response.labels.rle, this.palette, width, height);
      const off = document.createElement("canvas");
      off.width = width;
      off.height = height;
      off.getContext("2d")!.putImageData(new ImageData(buf, width, height), 0, 0);
      ctx.drawImage(off, 0, 0);
      this.legend.innerHTML = "";
      for (const item of legendFor(this.response.labels.rle, this.palette)) {
        const li = document.createElement("li");
        const swatch = document.createElement("span");
        swatch.className = "swatch";
        swatch.style.background = `rgb(${item.rgb.join(",")})`;
        li.appendChild(swatch);
        li.appendChild(document.createTextNode(item.name));
        this.legend.appendChild(li);
      }
    } else {
      this.legend.innerHTML = "";
    }

    // graph on top
    ctx.lineWidth = 1.5;
    ctx.strokeStyle = "#555";
    for (const [a, b] of d.edges) {
      const na = d.nodes.find((n) => n.id === a);
      const nb = d.nodes.find((n) => n.id === b);
      if (!na || !nb) continue;
      ctx.beginPath();
      ctx.moveTo(na.x * width, na.y * height);
      ctx.lineTo(nb.x * width, nb.y * height);
      ctx.stroke();
    }
    for (const n of d.nodes) {
      const rgb = this.palette?.entries.find((e) => e.id === n.category)?.rgb ?? [120, 120, 120];
      ctx.beginPath();
      ctx.fillStyle = `rgb(${rgb.join(",")})`;
      ctx.arc(n.x * width, n.y * height, 10, 0, Math.PI * 2);
      ctx.fill();
      if (this.selectedNode === n.id) {
        ctx.strokeStyle = "#000";
        ctx.lineWidth = 3;
        ctx.stroke();
        ctx.lineWidth = 1.5;
        ctx.strokeStyle = "#555";
      }
      ctx.fillStyle = "#000";
      ctx.font = "11px sans-serif";
      ctx.fillText(String(n.id), n.x * width + 12, n.y * height + 4);
    }
  }
}

new App();
