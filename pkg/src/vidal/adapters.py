"""Detector adapters: where the loop's detection outputs come from.

Four sources: replaying a detections file, spawning an external command
with a request manifest, posting the frame list to a remote endpoint, and
the in-process synthetic detector. Every adapter returns detections for
exactly the requested frames, validated against the wire schema; anything
missing or malformed is surfaced with frame and iteration context.
"""

from __future__ import annotations

import json
import shlex
import subprocess
from pathlib import Path

import httpx

from vidal import formats
from vidal.loop import LoopState
from vidal.model import FrameDetections, GroundTruthFrame
from vidal.simulate import LearningDecay, NoiseProfile, effective_noise, synthesize_detections


class AdapterError(RuntimeError):
    """A detection source failed or returned an incomplete answer."""


class FileAdapter:
    """Replay detections from a document on disk.

    The file may cover more frames than requested (e.g. a full-video dump
    replayed across iterations); completeness is checked by the caller.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)

    def fetch(self, frames: list[int], state: LoopState) -> dict[int, FrameDetections]:
        try:
            available, _ = formats.load_detections(self.path)
        except (OSError, formats.FormatError) as exc:
            raise AdapterError(f"detections file {self.path}: {exc}") from exc
        return {f: available[f] for f in frames if f in available}


class ExecAdapter:
    """Spawn an external command that produces a detections file.

    Writes ``request.json`` ({iteration, frame_indices, state_path}) into
    the working directory, runs the command there, and reads back
    ``detections.json``. A nonzero exit is a failure.
    """

    def __init__(self, command: str, workdir: str | Path, state_path: str | Path | None = None):
        self.command = command
        self.workdir = Path(workdir)
        self.state_path = str(state_path) if state_path else None

    def fetch(self, frames: list[int], state: LoopState) -> dict[int, FrameDetections]:
        request = {
            "iteration": state.iteration,
            "frame_indices": list(frames),
            "state_path": self.state_path,
        }
        (self.workdir / "request.json").write_text(json.dumps(request, indent=2))
        proc = subprocess.run(
            shlex.split(self.command),
            cwd=self.workdir,
            capture_output=True,
            text=True,
        )
        if proc.returncode != 0:
            raise AdapterError(
                f"detector command failed with exit {proc.returncode} at iteration "
                f"{state.iteration}: {proc.stderr.strip()[:500]}"
            )
        out_path = self.workdir / "detections.json"
        if not out_path.exists():
            raise AdapterError(f"detector command produced no {out_path}")
        try:
            available, _ = formats.load_detections(out_path)
        except formats.FormatError as exc:
            raise AdapterError(f"detector output {out_path}: {exc}") from exc
        return {f: available[f] for f in frames if f in available}


class HttpAdapter:
    """Ask a remote endpoint for detections, one request per iteration."""

    def __init__(self, url: str, client: httpx.Client | None = None, timeout: float = 60.0):
        self.url = url
        self._client = client
        self.timeout = timeout

    def fetch(self, frames: list[int], state: LoopState) -> dict[int, FrameDetections]:
        payload = {"iteration": state.iteration, "frame_indices": list(frames)}
        client = self._client or httpx.Client(timeout=self.timeout)
        try:
            response = client.post(self.url, json=payload)
        except httpx.HTTPError as exc:
            raise AdapterError(
                f"detector endpoint {self.url} unreachable at iteration {state.iteration}: {exc}"
            ) from exc
        finally:
            if self._client is None:
                client.close()
        if response.status_code != 200:
            raise AdapterError(
                f"detector endpoint {self.url} returned {response.status_code} "
                f"at iteration {state.iteration}"
            )
        document = response.json()
        if document.get("schema") != formats.DETECTIONS_SCHEMA:
            raise AdapterError(
                f"detector endpoint {self.url}: schema {document.get('schema')!r} "
                f"where {formats.DETECTIONS_SCHEMA!r} was expected"
            )
        try:
            available, _ = formats.parse_detections(document)
        except formats.FormatError as exc:
            raise AdapterError(f"detector endpoint {self.url}: {exc}") from exc
        return {f: available[f] for f in frames if f in available}


class SyntheticAdapter:
    """In-process synthetic detector over known ground truth."""

    def __init__(
        self,
        ground_truth: dict[int, GroundTruthFrame],
        profile: NoiseProfile,
        decay: LearningDecay,
        seed: int = 0,
    ):
        self.ground_truth = ground_truth
        self.profile = profile
        self.decay = decay
        self.seed = seed

    def fetch(self, frames: list[int], state: LoopState) -> dict[int, FrameDetections]:
        self.profile.validate_for(state.meta.num_frames)
        labeled = set(state.labeled)
        if not labeled:
            raise AdapterError("synthetic detector needs at least one labeled frame")
        out = {}
        for f in frames:
            gt = self.ground_truth.get(f)
            if gt is None:
                raise AdapterError(f"no ground truth for frame {f}")
            params = effective_noise(f, self.profile, self.decay, labeled)
            out[f] = synthesize_detections(gt, params, state.meta, (self.seed, f))
        return out


def fetch_detections(
    adapter,
    required: set[int],
    state: LoopState,
    optional: set[int] | None = None,
) -> dict[int, FrameDetections]:
    """Fetch detections from any adapter, in one request per iteration.

    Every frame in ``required`` must be answered; ``optional`` frames (test
    frames wanted only as temporal neighbors) may be absent from sources
    that do not hold them.
    """
    optional = optional or set()
    wanted = sorted(set(required) | optional)
    result = adapter.fetch(wanted, state)
    missing = sorted(f for f in required if f not in result)
    if missing:
        raise AdapterError(
            f"missing detections for frames {missing[:10]} at iteration {state.iteration}"
        )
    return result
