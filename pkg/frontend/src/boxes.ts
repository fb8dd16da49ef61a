import type { AnnotationPayload, PredictionBox } from "./types";

export type Provenance = "prediction" | "human";

/** A box under edit, in image pixel coordinates (center + size). */
export interface EditableBox {
  cx: number;
  cy: number;
  bw: number;
  bh: number;
  classIndex: number;
  provenance: Provenance;
}

export type Handle = "nw" | "ne" | "sw" | "se";

export function corners(box: EditableBox): [number, number, number, number] {
  return [box.cx - box.bw / 2, box.cy - box.bh / 2, box.cx + box.bw / 2, box.cy + box.bh / 2];
}

export function fromCorners(
  x0: number,
  y0: number,
  x1: number,
  y1: number,
  classIndex: number,
  provenance: Provenance = "human",
): EditableBox {
  const [lx, hx] = x0 <= x1 ? [x0, x1] : [x1, x0];
  const [ly, hy] = y0 <= y1 ? [y0, y1] : [y1, y0];
  return {
    cx: (lx + hx) / 2,
    cy: (ly + hy) / 2,
    bw: hx - lx,
    bh: hy - ly,
    classIndex,
    provenance,
  };
}

/** Clamp a box into the image: size capped to the frame, center shifted inside. */
export function clampBox(box: EditableBox, width: number, height: number): EditableBox {
  const bw = Math.min(Math.max(0, box.bw), width);
  const bh = Math.min(Math.max(0, box.bh), height);
  const cx = Math.min(Math.max(bw / 2, box.cx), width - bw / 2);
  const cy = Math.min(Math.max(bh / 2, box.cy), height - bh / 2);
  return { ...box, cx, cy, bw, bh };
}

/** Validation errors that block submission; empty list means submittable. */
export function validateBoxes(boxes: EditableBox[], numClasses: number): string[] {
  const errors: string[] = [];
  boxes.forEach((box, i) => {
    if (box.bw <= 0 || box.bh <= 0) {
      errors.push(`box ${i + 1}: width and height must be positive`);
    }
    if (!Number.isFinite(box.cx) || !Number.isFinite(box.cy)) {
      errors.push(`box ${i + 1}: position is not finite`);
    }
    if (box.classIndex < 0 || box.classIndex >= numClasses) {
      errors.push(`box ${i + 1}: class out of range`);
    }
  });
  return errors;
}

/** Prefill the editor from model predictions; class = argmax of the probs. */
export function fromPredictions(predictions: PredictionBox[]): EditableBox[] {
  return predictions.map((p) => {
    let best = 0;
    for (let i = 1; i < p.probs.length; i++) {
      const current = p.probs[i] ?? 0;
      if (current > (p.probs[best] ?? 0)) best = i;
    }
    return {
      cx: p.bbox[0],
      cy: p.bbox[1],
      bw: p.bbox[2],
      bh: p.bbox[3],
      classIndex: best,
      provenance: "prediction" as const,
    };
  });
}

/** The wire payload for one frame; accepted predictions become human truth. */
export function toAnnotationPayload(boxes: EditableBox[]): AnnotationPayload {
  return {
    objects: boxes.map((b) => ({
      bbox: [b.cx, b.cy, b.bw, b.bh],
      class: b.classIndex,
    })),
  };
}

export interface HitResult {
  kind: "none" | "inside" | "handle";
  handle?: Handle;
}

const HANDLE_RADIUS = 6;

/** Which part of a box a point touches; handles win over the interior. */
export function hitTest(box: EditableBox, x: number, y: number): HitResult {
  const [x0, y0, x1, y1] = corners(box);
  const handles: Array<[Handle, number, number]> = [
    ["nw", x0, y0],
    ["ne", x1, y0],
    ["sw", x0, y1],
    ["se", x1, y1],
  ];
  for (const [handle, hx, hy] of handles) {
    if (Math.abs(x - hx) <= HANDLE_RADIUS && Math.abs(y - hy) <= HANDLE_RADIUS) {
      return { kind: "handle", handle };
    }
  }
  if (x >= x0 && x <= x1 && y >= y0 && y <= y1) {
    return { kind: "inside" };
  }
  return { kind: "none" };
}

/** Move the given corner to (x, y), keeping the opposite corner fixed. */
export function resizeByHandle(
  box: EditableBox,
  handle: Handle,
  x: number,
  y: number,
): EditableBox {
  const [x0, y0, x1, y1] = corners(box);
  const anchorX = handle === "nw" || handle === "sw" ? x1 : x0;
  const anchorY = handle === "nw" || handle === "ne" ? y1 : y0;
  const moved = fromCorners(anchorX, anchorY, x, y, box.classIndex, box.provenance);
  return { ...moved, provenance: "human" };
}

export function moveBox(box: EditableBox, dx: number, dy: number): EditableBox {
  return { ...box, cx: box.cx + dx, cy: box.cy + dy, provenance: "human" };
}
