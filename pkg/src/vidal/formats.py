"""Wire formats and state persistence.

All documents are UTF-8 JSON with a ``schema`` version tag. Serialization is
canonical (sorted keys, stable list order), so identical inputs produce
byte-identical files and a load/save round trip is byte-stable. Writes are
atomic: temp file in the target directory, then rename.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Any

from vidal.loop import LoopState, QueryRecord
from vidal.model import (
    AnnotatedObject,
    BBox,
    ClassDistribution,
    Detection,
    FrameDetections,
    GroundTruthFrame,
    VideoMeta,
)
from vidal.simulate import LearningDecay, NoiseProfile, NoiseRange
from vidal.strategy import StrategyConfig, StrategyKind

DETECTIONS_SCHEMA = "vidal.detections.v1"
ANNOTATIONS_SCHEMA = "vidal.annotations.v1"
STATE_SCHEMA = "vidal.state.v1"
SCORES_SCHEMA = "vidal.scores.v1"
NOISE_SCHEMA = "vidal.noise.v1"
DIRECTIVE_SCHEMA = "vidal.directive.v1"
REPORT_SCHEMA = "vidal.report.v1"


class FormatError(ValueError):
    """Malformed or wrong-version document."""


def dumps(document: dict) -> str:
    return json.dumps(document, indent=2, sort_keys=True) + "\n"


def atomic_write(path: str | Path, text: str) -> None:
    """Write via a temp file in the same directory, then rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_document(path: str | Path, document: dict) -> None:
    atomic_write(path, dumps(document))


def read_document(path: str | Path, expected_schema: str) -> dict:
    try:
        with open(path, encoding="utf-8") as handle:
            document = json.load(handle)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(document, dict):
        raise FormatError(f"{path}: expected a JSON object at the top level")
    schema = document.get("schema")
    if schema != expected_schema:
        raise FormatError(f"{path}: schema {schema!r} where {expected_schema!r} was expected")
    return document


def _require(document: dict, key: str, context: str) -> Any:
    if key not in document:
        raise FormatError(f"{context}: missing field {key!r}")
    return document[key]


def _bbox_from_list(values, context: str) -> BBox:
    if not isinstance(values, (list, tuple)) or len(values) != 4:
        raise FormatError(f"{context}: bbox must be [cx, cy, bw, bh], got {values!r}")
    try:
        return BBox(*(float(v) for v in values))
    except ValueError as exc:
        raise FormatError(f"{context}: {exc}") from exc


# -- detections -------------------------------------------------------------


def detections_document(frames: dict[int, FrameDetections], iteration: int) -> dict:
    return {
        "schema": DETECTIONS_SCHEMA,
        "iteration": iteration,
        "frames": [
            {
                "index": index,
                "detections": [
                    {
                        "bbox": [d.bbox.cx, d.bbox.cy, d.bbox.bw, d.bbox.bh],
                        "probs": list(d.probs.probs),
                    }
                    for d in frames[index].detections
                ],
            }
            for index in sorted(frames)
        ],
    }


def parse_detections(document: dict) -> tuple[dict[int, FrameDetections], int]:
    """Validate and decode a detections document into per-frame objects."""
    iteration = int(document.get("iteration", 0))
    frames: dict[int, FrameDetections] = {}
    for entry in _require(document, "frames", "detections document"):
        index = int(_require(entry, "index", "detections frame"))
        context = f"detections frame {index}"
        if index in frames:
            raise FormatError(f"{context}: duplicate frame index")
        dets = []
        for pos, det in enumerate(_require(entry, "detections", context)):
            det_context = f"{context} detection {pos}"
            bbox = _bbox_from_list(_require(det, "bbox", det_context), det_context)
            probs_raw = _require(det, "probs", det_context)
            try:
                probs = ClassDistribution(tuple(float(p) for p in probs_raw))
            except ValueError as exc:
                raise FormatError(f"{det_context}: {exc}") from exc
            dets.append(Detection(bbox, probs))
        frames[index] = FrameDetections(index, tuple(dets))
    return frames, iteration


def load_detections(path: str | Path) -> tuple[dict[int, FrameDetections], int]:
    return parse_detections(read_document(path, DETECTIONS_SCHEMA))


# -- annotations ------------------------------------------------------------


def annotations_document(
    frames: list[GroundTruthFrame], meta: VideoMeta | None = None
) -> dict:
    document = {
        "schema": ANNOTATIONS_SCHEMA,
        "frames": [
            {
                "index": gt.frame_index,
                "objects": [
                    {
                        "bbox": [o.bbox.cx, o.bbox.cy, o.bbox.bw, o.bbox.bh],
                        "class": o.class_index,
                    }
                    for o in gt.objects
                ],
            }
            for gt in sorted(frames, key=lambda g: g.frame_index)
        ],
    }
    if meta is not None:
        document["meta"] = meta_document(meta)
    return document


def parse_annotation_objects(objects, context: str) -> tuple[AnnotatedObject, ...]:
    parsed = []
    for pos, obj in enumerate(objects):
        obj_context = f"{context} object {pos}"
        bbox = _bbox_from_list(_require(obj, "bbox", obj_context), obj_context)
        try:
            parsed.append(AnnotatedObject(bbox, int(_require(obj, "class", obj_context))))
        except ValueError as exc:
            raise FormatError(f"{obj_context}: {exc}") from exc
    return tuple(parsed)


def parse_annotations(document: dict) -> tuple[list[GroundTruthFrame], VideoMeta | None]:
    """Decode an annotations document; ground-truth files may embed meta."""
    frames = []
    seen = set()
    for entry in _require(document, "frames", "annotations document"):
        index = int(_require(entry, "index", "annotations frame"))
        context = f"annotations frame {index}"
        if index in seen:
            raise FormatError(f"{context}: duplicate frame index")
        seen.add(index)
        objects = parse_annotation_objects(_require(entry, "objects", context), context)
        frames.append(GroundTruthFrame(index, objects))
    meta = parse_meta(document["meta"]) if "meta" in document else None
    return frames, meta


def load_annotations(path: str | Path) -> tuple[list[GroundTruthFrame], VideoMeta | None]:
    return parse_annotations(read_document(path, ANNOTATIONS_SCHEMA))


# -- video meta and strategy ------------------------------------------------


def meta_document(meta: VideoMeta) -> dict:
    return {
        "width": meta.width,
        "height": meta.height,
        "num_frames": meta.num_frames,
        "class_names": list(meta.class_names),
    }


def parse_meta(document: dict) -> VideoMeta:
    try:
        return VideoMeta(
            width=int(_require(document, "width", "meta")),
            height=int(_require(document, "height", "meta")),
            num_frames=int(_require(document, "num_frames", "meta")),
            class_names=tuple(_require(document, "class_names", "meta")),
        )
    except ValueError as exc:
        raise FormatError(f"meta: {exc}") from exc


def strategy_document(config: StrategyConfig) -> dict:
    return {
        "kind": config.kind.value,
        "fixed_mu": config.fixed_mu,
        "batch_size": config.batch_size,
        "rng_seed": config.rng_seed,
        "confidence_threshold": config.confidence_threshold,
        "test_neighbors": config.test_neighbors,
    }


def parse_strategy(document: dict) -> StrategyConfig:
    try:
        return StrategyConfig(
            kind=StrategyKind(_require(document, "kind", "strategy")),
            fixed_mu=float(document.get("fixed_mu", 1.0)),
            batch_size=int(document.get("batch_size", 10)),
            rng_seed=int(document.get("rng_seed", 0)),
            confidence_threshold=float(document.get("confidence_threshold", 0.5)),
            test_neighbors=bool(document.get("test_neighbors", True)),
        )
    except ValueError as exc:
        raise FormatError(f"strategy: {exc}") from exc


# -- loop state ---------------------------------------------------------------


def state_document(state: LoopState) -> dict:
    return {
        "schema": STATE_SCHEMA,
        "meta": meta_document(state.meta),
        "strategy": strategy_document(state.strategy),
        "iteration": state.iteration,
        "stop_fraction": state.stop_fraction,
        "labeled": sorted(state.labeled),
        "unlabeled": sorted(state.unlabeled),
        "test": sorted(state.test),
        "annotations": {
            str(f): [
                {
                    "bbox": [o.bbox.cx, o.bbox.cy, o.bbox.bw, o.bbox.bh],
                    "class": o.class_index,
                }
                for o in gt.objects
            ]
            for f, gt in sorted(state.annotations.items())
        },
        "history": [
            {
                "round": record.round_index,
                "frames": list(record.frames),
                "scores": (
                    {str(f): s for f, s in sorted(record.scores.items())}
                    if record.scores is not None
                    else None
                ),
            }
            for record in state.history
        ],
    }


def parse_state(document: dict) -> LoopState:
    meta = parse_meta(_require(document, "meta", "state"))
    strategy = parse_strategy(_require(document, "strategy", "state"))
    annotations = {}
    for key, objects in _require(document, "annotations", "state").items():
        frame = int(key)
        annotations[frame] = GroundTruthFrame(
            frame, parse_annotation_objects(objects, f"state annotations frame {frame}")
        )
    history = []
    for entry in _require(document, "history", "state"):
        scores_raw = entry.get("scores")
        history.append(
            QueryRecord(
                round_index=int(_require(entry, "round", "state history")),
                frames=tuple(int(f) for f in _require(entry, "frames", "state history")),
                scores=(
                    {int(f): float(s) for f, s in scores_raw.items()}
                    if scores_raw is not None
                    else None
                ),
            )
        )
    try:
        state = LoopState(
            meta=meta,
            strategy=strategy,
            labeled=frozenset(int(f) for f in _require(document, "labeled", "state")),
            unlabeled=frozenset(int(f) for f in _require(document, "unlabeled", "state")),
            test=frozenset(int(f) for f in _require(document, "test", "state")),
            annotations=annotations,
            history=tuple(history),
            iteration=int(_require(document, "iteration", "state")),
            stop_fraction=float(document.get("stop_fraction", 0.8)),
        )
        state.check_partition()
    except ValueError as exc:
        raise FormatError(f"state: {exc}") from exc
    return state


def persist_state(state: LoopState, path: str | Path) -> None:
    """Atomically write the state file."""
    write_document(path, state_document(state))


def predictions_path(state_path: str | Path) -> Path:
    """Sidecar with the latest iteration's detections for queried frames."""
    return Path(str(state_path) + ".predictions.json")


def scores_path(state_path: str | Path) -> Path:
    """Sidecar with the latest iteration's scores report."""
    return Path(str(state_path) + ".scores.json")


def load_state(path: str | Path) -> LoopState:
    """Load and validate a state file; never modifies the file."""
    return parse_state(read_document(path, STATE_SCHEMA))


# -- noise profile ------------------------------------------------------------


def noise_document(profile: NoiseProfile, decay: LearningDecay) -> dict:
    return {
        "schema": NOISE_SCHEMA,
        "decay": {"d0": decay.d0, "floor": decay.floor},
        "ranges": [
            {
                "start": r.start,
                "end": r.end,
                "p_miss": r.p_miss,
                "p_spurious": r.p_spurious,
                "jitter_sigma": r.jitter_sigma,
                "class_temperature": r.class_temperature,
            }
            for r in profile.ranges
        ],
    }


def parse_noise(document: dict) -> tuple[NoiseProfile, LearningDecay]:
    ranges = []
    for pos, entry in enumerate(_require(document, "ranges", "noise document")):
        context = f"noise range {pos}"
        try:
            ranges.append(
                NoiseRange(
                    start=int(_require(entry, "start", context)),
                    end=int(_require(entry, "end", context)),
                    p_miss=float(entry.get("p_miss", 0.0)),
                    p_spurious=float(entry.get("p_spurious", 0.0)),
                    jitter_sigma=float(entry.get("jitter_sigma", 0.0)),
                    class_temperature=float(entry.get("class_temperature", 0.0)),
                )
            )
        except ValueError as exc:
            raise FormatError(f"{context}: {exc}") from exc
    decay_raw = document.get("decay", {})
    try:
        profile = NoiseProfile(tuple(ranges))
        decay = LearningDecay(
            d0=float(decay_raw.get("d0", 1.0)), floor=float(decay_raw.get("floor", 1.0))
        )
    except ValueError as exc:
        raise FormatError(f"noise document: {exc}") from exc
    return profile, decay


def load_noise(path: str | Path) -> tuple[NoiseProfile, LearningDecay]:
    return parse_noise(read_document(path, NOISE_SCHEMA))


# -- derived documents --------------------------------------------------------


def scores_document(report: list[dict], iteration: int) -> dict:
    return {"schema": SCORES_SCHEMA, "iteration": iteration, "frames": report}


def directive_document(directive) -> dict:
    return {
        "schema": DIRECTIVE_SCHEMA,
        "epochs": directive.epochs,
        "minibatch_size": directive.minibatch_size,
        "learning_rate": directive.learning_rate,
        "batches": [list(batch) for batch in directive.batches],
    }
