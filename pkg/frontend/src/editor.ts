import {
  clampBox,
  corners,
  fromCorners,
  hitTest,
  moveBox,
  resizeByHandle,
} from "./boxes";
import type { EditableBox, Handle } from "./boxes";

const CLASS_COLORS = [
  "#e6553a",
  "#3a7be6",
  "#3ae68a",
  "#e6c83a",
  "#a63ae6",
  "#3adbe6",
  "#e63aa8",
  "#93e63a",
];

export function classColor(classIndex: number): string {
  return CLASS_COLORS[classIndex % CLASS_COLORS.length] ?? "#888";
}

type DragState =
  | { mode: "move"; index: number; lastX: number; lastY: number }
  | { mode: "resize"; index: number; handle: Handle }
  | { mode: "draw"; startX: number; startY: number };

/**
 * Canvas bounding-box editor. Renders the frame image (or a blank backdrop
 * when no image exists for the frame) with the editable boxes on top, and
 * turns pointer gestures into move/resize/draw edits.
 */
export class BoxEditor {
  boxes: EditableBox[] = [];
  selected = -1;
  activeClass = 0;
  drawMode = false;
  onChange: () => void = () => {};

  private image: HTMLImageElement | null = null;
  private drag: DragState | null = null;
  private scale = 1;

  constructor(
    private canvas: HTMLCanvasElement,
    private imageWidth: number,
    private imageHeight: number,
  ) {
    canvas.addEventListener("pointerdown", (e) => this.pointerDown(e));
    canvas.addEventListener("pointermove", (e) => this.pointerMove(e));
    canvas.addEventListener("pointerup", () => this.pointerUp());
    this.fit();
  }

  private fit(): void {
    const maxWidth = this.canvas.parentElement?.clientWidth || 640;
    this.scale = Math.min(1.5, Math.max(0.1, maxWidth / this.imageWidth));
    this.canvas.width = Math.round(this.imageWidth * this.scale);
    this.canvas.height = Math.round(this.imageHeight * this.scale);
  }

  loadFrame(boxes: EditableBox[], imageUrl: string): void {
    this.boxes = boxes;
    this.selected = -1;
    this.drag = null;
    this.image = null;
    const img = new Image();
    img.onload = () => {
      this.image = img;
      this.render();
    };
    img.onerror = () => {
      this.image = null; // frames without extracted images get a blank backdrop
      this.render();
    };
    img.src = imageUrl;
    this.render();
  }

  addBoxAtCenter(): void {
    const size = Math.min(this.imageWidth, this.imageHeight) / 5;
    this.boxes.push(
      clampBox(
        {
          cx: this.imageWidth / 2,
          cy: this.imageHeight / 2,
          bw: size,
          bh: size,
          classIndex: this.activeClass,
          provenance: "human",
        },
        this.imageWidth,
        this.imageHeight,
      ),
    );
    this.selected = this.boxes.length - 1;
    this.changed();
  }

  deleteSelected(): void {
    if (this.selected >= 0) {
      this.boxes.splice(this.selected, 1);
      this.selected = -1;
      this.changed();
    }
  }

  setSelectedClass(classIndex: number): void {
    const box = this.boxes[this.selected];
    if (box) {
      this.boxes[this.selected] = { ...box, classIndex, provenance: "human" };
      this.changed();
    }
  }

  private toImage(e: PointerEvent): [number, number] {
    const rect = this.canvas.getBoundingClientRect();
    return [(e.clientX - rect.left) / this.scale, (e.clientY - rect.top) / this.scale];
  }

  private pointerDown(e: PointerEvent): void {
    const [x, y] = this.toImage(e);
    this.canvas.setPointerCapture(e.pointerId);
    if (this.drawMode) {
      this.drag = { mode: "draw", startX: x, startY: y };
      this.boxes.push(fromCorners(x, y, x, y, this.activeClass));
      this.selected = this.boxes.length - 1;
      this.changed();
      return;
    }
    // topmost box wins; handles win over interiors
    for (let i = this.boxes.length - 1; i >= 0; i--) {
      const box = this.boxes[i];
      if (!box) continue;
      const hit = hitTest(box, x, y);
      if (hit.kind === "handle" && hit.handle) {
        this.selected = i;
        this.drag = { mode: "resize", index: i, handle: hit.handle };
        this.changed();
        return;
      }
      if (hit.kind === "inside") {
        this.selected = i;
        this.drag = { mode: "move", index: i, lastX: x, lastY: y };
        this.changed();
        return;
      }
    }
    this.selected = -1;
    this.changed();
  }

  private pointerMove(e: PointerEvent): void {
    if (!this.drag) return;
    const [x, y] = this.toImage(e);
    if (this.drag.mode === "draw") {
      const i = this.boxes.length - 1;
      this.boxes[i] = fromCorners(this.drag.startX, this.drag.startY, x, y, this.activeClass);
    } else if (this.drag.mode === "move") {
      const box = this.boxes[this.drag.index];
      if (box) {
        this.boxes[this.drag.index] = moveBox(box, x - this.drag.lastX, y - this.drag.lastY);
        this.drag.lastX = x;
        this.drag.lastY = y;
      }
    } else {
      const box = this.boxes[this.drag.index];
      if (box) {
        this.boxes[this.drag.index] = resizeByHandle(box, this.drag.handle, x, y);
        // the drag handle may flip sides when crossing the anchor
        const updated = this.boxes[this.drag.index];
        if (updated) {
          const hit = hitTest(updated, x, y);
          if (hit.kind === "handle" && hit.handle) this.drag.handle = hit.handle;
        }
      }
    }
    this.changed();
  }

  private pointerUp(): void {
    if (this.drag) {
      // boxes clamp to image bounds on commit
      this.boxes = this.boxes.map((b) => clampBox(b, this.imageWidth, this.imageHeight));
      this.drag = null;
      this.drawMode = false;
      this.changed();
    }
  }

  private changed(): void {
    this.render();
    this.onChange();
  }

  render(): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    ctx.save();
    ctx.clearRect(0, 0, this.canvas.width, this.canvas.height);
    if (this.image) {
      ctx.drawImage(this.image, 0, 0, this.canvas.width, this.canvas.height);
    } else {
      ctx.fillStyle = "#1c2128";
      ctx.fillRect(0, 0, this.canvas.width, this.canvas.height);
    }
    ctx.scale(this.scale, this.scale);
    this.boxes.forEach((box, i) => {
      const [x0, y0, x1, y1] = corners(box);
      ctx.lineWidth = 2 / this.scale;
      ctx.strokeStyle = classColor(box.classIndex);
      ctx.setLineDash(box.provenance === "prediction" ? [6 / this.scale, 4 / this.scale] : []);
      ctx.strokeRect(x0, y0, x1 - x0, y1 - y0);
      ctx.setLineDash([]);
      if (i === this.selected) {
        ctx.fillStyle = classColor(box.classIndex);
        for (const [hx, hy] of [
          [x0, y0],
          [x1, y0],
          [x0, y1],
          [x1, y1],
        ]) {
          ctx.fillRect((hx ?? 0) - 4 / this.scale, (hy ?? 0) - 4 / this.scale, 8 / this.scale, 8 / this.scale);
        }
      }
    });
    ctx.restore();
  }
}
