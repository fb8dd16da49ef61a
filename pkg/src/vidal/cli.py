"""Command-line interface: a thin layer over the core package.

Every command is deterministic given its inputs and seeds; identical
invocations produce byte-identical output files.
"""

from __future__ import annotations

import sys
from dataclasses import replace
from pathlib import Path

import click

from vidal import formats
from vidal.adapters import (
    AdapterError,
    ExecAdapter,
    FileAdapter,
    HttpAdapter,
    SyntheticAdapter,
    fetch_detections,
)
from vidal.evaluate import EvalConfig, mean_ap
from vidal.loop import (
    LoopError,
    ingest_annotations,
    initialize_state,
    run_iteration,
    training_directive,
)
from vidal.model import ValidationError, VideoMeta
from vidal.runner import run_simulation
from vidal.strategy import StrategyConfig, StrategyKind

STRATEGY_NAMES = {
    "p": StrategyKind.PASSIVE,
    "c": StrategyKind.CLASSIFICATION_ONLY,
    "s1": StrategyKind.S1_DYNAMIC,
    "s1-fixed": StrategyKind.S1_FIXED,
    "s2": StrategyKind.S2,
}


def _fail(message: str) -> None:
    raise click.ClickException(message)


@click.group()
def main() -> None:
    """Active-learning frame selection for video annotation."""


@main.command()
@click.option("--frames", "num_frames", type=int, required=True, help="Number of video frames.")
@click.option("--width", type=int, required=True)
@click.option("--height", type=int, required=True)
@click.option("--classes", required=True, help="Comma-separated class names.")
@click.option("--init-count", type=int, default=10, show_default=True)
@click.option("--test-fraction", type=float, default=0.1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--state", "state_path", type=click.Path(), required=True)
@click.option("--strategy", "strategy_name", type=click.Choice(sorted(STRATEGY_NAMES)), default="s1")
@click.option("--batch", type=int, default=10, show_default=True)
@click.option("--stop-fraction", type=float, default=0.8, show_default=True)
@click.option("--threshold", type=float, default=0.5, show_default=True,
              help="Detection confidence threshold.")
def init(num_frames, width, height, classes, init_count, test_fraction, seed,
         state_path, strategy_name, batch, stop_fraction, threshold) -> None:
    """Create a fresh run state with its guiding set and test split."""
    class_names = tuple(c.strip() for c in classes.split(",") if c.strip())
    try:
        meta = VideoMeta(width, height, num_frames, class_names)
        strategy = StrategyConfig(
            kind=STRATEGY_NAMES[strategy_name],
            batch_size=batch,
            rng_seed=seed,
            confidence_threshold=threshold,
        )
        state = initialize_state(
            meta, strategy, init_count=init_count, test_fraction=test_fraction,
            seed=seed, stop_fraction=stop_fraction,
        )
    except (ValidationError, LoopError, ValueError) as exc:
        _fail(str(exc))
    formats.persist_state(state, state_path)
    guiding = sorted(state.pending)
    click.echo(f"state written to {state_path}")
    click.echo(f"guiding frames to annotate: {guiding}")
    click.echo(f"test frames held out: {len(state.test)}")


def _build_adapter(adapter_spec, detections_path, state_path, gt_path, noise_path, seed):
    if detections_path:
        return FileAdapter(detections_path)
    if not adapter_spec:
        _fail("either --detections or --adapter is required")
    if adapter_spec == "synthetic":
        if not gt_path or not noise_path:
            _fail("--adapter synthetic needs --gt and --noise")
        gt_frames, _ = formats.load_annotations(gt_path)
        profile, decay = formats.load_noise(noise_path)
        return SyntheticAdapter(
            {g.frame_index: g for g in gt_frames}, profile, decay, seed=seed
        )
    if adapter_spec.startswith("exec:"):
        return ExecAdapter(
            adapter_spec[len("exec:"):], workdir=Path(state_path).parent,
            state_path=state_path,
        )
    if adapter_spec.startswith("http:") or adapter_spec.startswith("https:"):
        return HttpAdapter(adapter_spec)
    _fail(f"unknown adapter {adapter_spec!r}; use exec:CMD, http:URL or synthetic")


@main.command()
@click.option("--state", "state_path", type=click.Path(exists=True), required=True)
@click.option("--detections", "detections_path", type=click.Path(exists=True))
@click.option("--adapter", "adapter_spec")
@click.option("--strategy", "strategy_name", type=click.Choice(sorted(STRATEGY_NAMES)))
@click.option("--mu", type=float, help="Fixed balance parameter (s1-fixed only).")
@click.option("--batch", type=int)
@click.option("--gt", "gt_path", type=click.Path(exists=True), help="Ground truth (synthetic adapter).")
@click.option("--noise", "noise_path", type=click.Path(exists=True), help="Noise profile (synthetic adapter).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", type=click.Path(), help="Write the query+scores document here.")
def iterate(state_path, detections_path, adapter_spec, strategy_name, mu, batch,
            gt_path, noise_path, seed, out_path) -> None:
    """Score the unlabeled frames and query the next batch."""
    try:
        state = formats.load_state(state_path)
    except formats.FormatError as exc:
        _fail(str(exc))
    strategy = state.strategy
    if strategy_name:
        strategy = replace(strategy, kind=STRATEGY_NAMES[strategy_name])
    if mu is not None:
        strategy = replace(strategy, fixed_mu=mu)
    if batch is not None:
        strategy = replace(strategy, batch_size=batch)
    state = replace(state, strategy=strategy)

    adapter = _build_adapter(adapter_spec, detections_path, state_path, gt_path, noise_path, seed)
    try:
        detections = fetch_detections(
            adapter, set(state.unlabeled), state, optional=set(state.test)
        )
        result = run_iteration(state, detections)
    except (AdapterError, LoopError) as exc:
        _fail(str(exc))
    formats.persist_state(result.state, state_path)
    formats.write_document(
        formats.predictions_path(state_path),
        formats.detections_document({f: detections[f] for f in result.queried},
                                    result.state.iteration),
    )
    formats.write_document(
        formats.scores_path(state_path),
        formats.scores_document(result.report, result.state.iteration),
    )
    document = {
        "schema": formats.SCORES_SCHEMA,
        "iteration": result.state.history[-1].round_index,
        "queried": list(result.queried),
        "mu": result.mu,
        "frames": result.report,
    }
    if out_path:
        formats.write_document(out_path, document)
        click.echo(f"queried frames: {list(result.queried)}")
        click.echo(f"scores written to {out_path}")
    else:
        click.echo(formats.dumps(document), nl=False)


@main.command()
@click.option("--state", "state_path", type=click.Path(exists=True), required=True)
@click.option("--annotations", "annotations_path", type=click.Path(exists=True), required=True)
def annotate(state_path, annotations_path) -> None:
    """Ingest an annotations document for pending queried frames."""
    try:
        state = formats.load_state(state_path)
        labels, _ = formats.load_annotations(annotations_path)
        new_state = ingest_annotations(state, labels)
    except (formats.FormatError, LoopError, ValidationError) as exc:
        _fail(str(exc))
    formats.persist_state(new_state, state_path)
    click.echo(f"annotated {len(labels)} frames; {len(new_state.pending)} still pending")
    if not new_state.pending:
        click.echo(f"round complete; iteration is now {new_state.iteration}")


@main.command()
@click.option("--state", "state_path", type=click.Path(exists=True), required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--epochs", type=int, default=10, show_default=True)
@click.option("--minibatch", type=int, default=20, show_default=True)
@click.option("--learning-rate", type=float, default=0.001, show_default=True)
@click.option("--out", "out_path", type=click.Path())
def directive(state_path, seed, epochs, minibatch, learning_rate, out_path) -> None:
    """Emit the incremental training directive for the latest batch."""
    try:
        state = formats.load_state(state_path)
        result = training_directive(
            state, seed, epochs=epochs, minibatch_size=minibatch, learning_rate=learning_rate
        )
    except (formats.FormatError, LoopError) as exc:
        _fail(str(exc))
    document = formats.directive_document(result)
    if out_path:
        formats.write_document(out_path, document)
        click.echo(f"directive written to {out_path}")
    else:
        click.echo(formats.dumps(document), nl=False)


@main.command()
@click.option("--gt", "gt_path", type=click.Path(exists=True), required=True,
              help="Annotations document with embedded meta.")
@click.option("--noise", "noise_path", type=click.Path(exists=True), required=True)
@click.option("--strategy", "strategy_name", type=click.Choice(sorted(STRATEGY_NAMES)), default="s1")
@click.option("--iterations", type=int, required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--report", "report_path", type=click.Path(), required=True)
@click.option("--init-count", type=int, default=10, show_default=True)
@click.option("--test-fraction", type=float, default=0.1, show_default=True)
@click.option("--batch", type=int, default=10, show_default=True)
@click.option("--stop-fraction", type=float, default=0.8, show_default=True)
@click.option("--mu", type=float, default=1.0, show_default=True)
@click.option("--threshold", type=float, default=0.5, show_default=True)
def simulate(gt_path, noise_path, strategy_name, iterations, seed, report_path,
             init_count, test_fraction, batch, stop_fraction, mu, threshold) -> None:
    """Run the full loop end to end against the synthetic detector."""
    try:
        gt_frames, meta = formats.load_annotations(gt_path)
        if meta is None:
            _fail("ground truth file must embed video meta for simulation")
        profile, decay = formats.load_noise(noise_path)
        strategy = StrategyConfig(
            kind=STRATEGY_NAMES[strategy_name],
            fixed_mu=mu,
            batch_size=batch,
            rng_seed=seed,
            confidence_threshold=threshold,
        )
        result = run_simulation(
            gt_frames, meta, profile, decay, strategy,
            iterations=iterations, seed=seed, init_count=init_count,
            test_fraction=test_fraction, stop_fraction=stop_fraction,
        )
    except (formats.FormatError, AdapterError, LoopError, ValueError) as exc:
        _fail(str(exc))
    formats.write_document(report_path, result.to_document(seed))
    for outcome in result.rounds:
        click.echo(
            f"round {outcome.round_index}: labeled {outcome.labeled_count}, "
            f"test mAP {outcome.test_map:.4f}"
        )
    click.echo(f"report written to {report_path}")


def _parse_thresholds(spec: str) -> tuple[float, ...]:
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            _fail("thresholds must be START:STEP:END or a comma list")
        start, step, end = (float(p) for p in parts)
        values = []
        t = start
        while t <= end + 1e-9:
            values.append(round(t, 6))
            t += step
        return tuple(values)
    return tuple(float(p) for p in spec.split(","))


@main.command("eval")
@click.option("--gt", "gt_path", type=click.Path(exists=True), required=True)
@click.option("--detections", "detections_path", type=click.Path(exists=True), required=True)
@click.option("--thresholds", default="0.5:0.05:0.95", show_default=True)
def eval_command(gt_path, detections_path, thresholds) -> None:
    """Mean average precision of a detections file against ground truth."""
    try:
        gt_frames, meta = formats.load_annotations(gt_path)
        predictions, _ = formats.load_detections(detections_path)
        if meta is not None:
            num_classes = meta.num_classes
        else:
            highest = max(
                (o.class_index for g in gt_frames for o in g.objects), default=0
            )
            probs_len = max(
                (len(d.probs) for f in predictions.values() for d in f.detections),
                default=highest + 1,
            )
            num_classes = max(highest + 1, probs_len)
        config = EvalConfig(iou_thresholds=_parse_thresholds(thresholds))
        report = mean_ap(
            predictions, {g.frame_index: g for g in gt_frames}, num_classes, config
        )
    except (formats.FormatError, ValueError) as exc:
        _fail(str(exc))
    names = meta.class_names if meta else None
    click.echo(formats.dumps(report.to_document(names)), nl=False)


@main.command()
@click.option("--state", "state_path", type=click.Path(exists=True), required=True)
@click.option("--images", "images_dir", type=click.Path(), default=None)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--adapter", "adapter_spec")
@click.option("--detections", "detections_path", type=click.Path(exists=True))
@click.option("--gt", "gt_path", type=click.Path(exists=True))
@click.option("--noise", "noise_path", type=click.Path(exists=True))
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--report", "report_path", type=click.Path(exists=True),
              help="Simulation report whose mAP series the workbench charts.")
@click.option("--frontend", "frontend_dir", type=click.Path(),
              help="Directory with the built workbench assets.")
def serve(state_path, images_dir, port, host, adapter_spec, detections_path,
          gt_path, noise_path, seed, report_path, frontend_dir) -> None:
    """Serve the annotation workbench API (and UI, if built)."""
    import uvicorn

    from vidal.service import create_app

    adapter = None
    if adapter_spec or detections_path:
        adapter = _build_adapter(
            adapter_spec, detections_path, state_path, gt_path, noise_path, seed
        )
    if frontend_dir is None:
        bundled = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        if bundled.is_dir():
            frontend_dir = str(bundled)
    app = create_app(
        state_path, images_dir=images_dir, adapter=adapter,
        report_path=report_path, frontend_dir=frontend_dir,
    )
    click.echo(f"serving on http://{host}:{port}")
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    sys.exit(main())
