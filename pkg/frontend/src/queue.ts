import type { AnnotationPayload, QueueItem } from "./types";

/** Pending first, then weighted score descending, frame index as tiebreak. */
export function sortQueue(items: QueueItem[]): QueueItem[] {
  return [...items].sort((a, b) => {
    if (a.status !== b.status) return a.status === "pending" ? -1 : 1;
    const wa = a.weighted_score ?? 0;
    const wb = b.weighted_score ?? 0;
    if (wa !== wb) return wb - wa;
    return a.frame_index - b.frame_index;
  });
}

/** Structural payload equality, used to recognize idempotent re-submissions. */
export function samePayload(a: AnnotationPayload, b: AnnotationPayload): boolean {
  if (a.objects.length !== b.objects.length) return false;
  return a.objects.every((obj, i) => {
    const other = b.objects[i];
    if (!other) return false;
    return (
      obj.class === other.class &&
      obj.bbox.length === other.bbox.length &&
      obj.bbox.every((v, j) => v === other.bbox[j])
    );
  });
}
