// Wire types mirroring the annotation service responses.

export interface StrategyInfo {
  kind: string;
  fixed_mu: number;
  batch_size: number;
  rng_seed: number;
  confidence_threshold: number;
  test_neighbors: boolean;
}

export interface StateSummary {
  iteration: number;
  num_frames: number;
  class_names: string[];
  width: number;
  height: number;
  labeled_count: number;
  unlabeled_count: number;
  test_count: number;
  stop_target: number;
  stopped: boolean;
  pending_count: number;
  can_iterate: boolean;
  strategy: StrategyInfo;
}

export type QueueStatus = "pending" | "done";

export interface QueueItem {
  frame_index: number;
  status: QueueStatus;
  frame_score: number | null;
  weighted_score: number | null;
  image_url: string;
}

export interface QueueResponse {
  round_index: number;
  items: QueueItem[];
  pending_count: number;
  can_iterate: boolean;
  stopped: boolean;
}

export interface PredictionBox {
  bbox: [number, number, number, number];
  probs: number[];
}

export interface PredictionsResponse {
  frame_index: number;
  detections: PredictionBox[];
}

export interface AnnotationObject {
  bbox: [number, number, number, number];
  class: number;
}

export interface AnnotationPayload {
  objects: AnnotationObject[];
}

export interface SubmissionResponse {
  frame_index: number;
  changed: boolean;
  pending_remaining: number;
  iteration_complete: boolean;
  can_iterate: boolean;
}

export interface IterateResponse {
  round_index: number;
  queried: number[];
  mu: number;
  scores: unknown[];
}

export interface HistoryRound {
  round: number;
  frames: number[];
  scores: Record<string, number>;
  done: boolean;
  mean_weighted_score: number | null;
}

export interface HistoryResponse {
  iteration: number;
  rounds: HistoryRound[];
  map_series: number[] | null;
}
