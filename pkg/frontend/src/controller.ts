import { ApiClient, ApiError } from "./api";
import { clampBox, fromPredictions, toAnnotationPayload, validateBoxes } from "./boxes";
import type { EditableBox } from "./boxes";
import { sortQueue } from "./queue";
import type {
  IterateResponse,
  QueueItem,
  QueueResponse,
  StateSummary,
  SubmissionResponse,
} from "./types";

/**
 * Flow logic for the workbench, independent of the DOM.
 *
 * The controller never mutates loop state locally: every queue status it
 * exposes comes from a server response, so a hard refresh can always
 * rebuild the exact same view.
 */
export class WorkbenchController {
  state: StateSummary | null = null;
  queue: QueueResponse | null = null;

  constructor(readonly api: ApiClient) {}

  async refresh(): Promise<void> {
    this.state = await this.api.getState();
    this.queue = await this.api.getQueue();
  }

  queueItems(): QueueItem[] {
    return this.queue ? sortQueue(this.queue.items) : [];
  }

  pendingFrames(): number[] {
    return this.queueItems()
      .filter((item) => item.status === "pending")
      .map((item) => item.frame_index);
  }

  canIterate(): boolean {
    return this.queue?.can_iterate ?? false;
  }

  /** Open a frame for annotation: prefill the editor with predictions. */
  async openFrame(frameIndex: number): Promise<EditableBox[]> {
    const predictions = await this.api.getPredictions(frameIndex);
    return fromPredictions(predictions.detections);
  }

  /**
   * Validate, clamp to image bounds, and submit one frame's boxes.
   *
   * On a 409 conflict the queue is refreshed to server truth before the
   * error is rethrown, so the caller's view never drifts.
   */
  async submitFrame(frameIndex: number, boxes: EditableBox[]): Promise<SubmissionResponse> {
    if (!this.state) throw new Error("controller not initialized; call refresh() first");
    const errors = validateBoxes(boxes, this.state.class_names.length);
    if (errors.length > 0) {
      throw new Error(errors.join("; "));
    }
    const clamped = boxes.map((b) => clampBox(b, this.state!.width, this.state!.height));
    try {
      const response = await this.api.submitAnnotations(
        frameIndex,
        toAnnotationPayload(clamped),
      );
      await this.refresh();
      return response;
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        await this.refresh();
      }
      throw err;
    }
  }

  async runIteration(): Promise<IterateResponse> {
    const response = await this.api.iterate();
    await this.refresh();
    return response;
  }
}
