"""Command-line interface: simulate, build artifacts, train, replay, watch."""
from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__
from .decoys import (
    DecoyKind,
    DecoyRegistry,
    DecoySpec,
    IoFailure,
    NameStyle,
    WatchUnavailable,
    default_early_dirs,
    deploy,
)
from .events import parse_event_log, window_events
from .features import extract_features
from .gbdt import BoostParams, BoostedForest, fit
from .graph import DEFAULT_EMBEDDING_DIMS, DEFAULT_HASH_SEED, build_graph, encode
from .notes import DEFAULT_NGRAM_SIZE, DEFAULT_POOL_CAPACITY, DEFAULT_TAU_SIM, GenePool, build_pool, similarity, tokenize
from .pipeline import (
    FilesystemContentProvider,
    MappingContentProvider,
    PipelineConfig,
    metrics_report,
    run_live,
    run_replay,
)
from .simulator import Corpus, build_corpus, generate, spec_from_json, spec_from_kind, write_scenario


@click.group()
@click.version_option(version=__version__, prog_name="ransomwatch")
def main() -> None:
    """Ransomware monitoring-detection-response engine."""


# -- decoy ------------------------------------------------------------------

@main.group()
def decoy() -> None:
    """Deploy, list and verify decoy files."""


@decoy.command("deploy")
@click.option("--dir", "directory", required=True, type=click.Path(file_okay=False))
@click.option("--count", default=2, show_default=True, type=int)
@click.option("--kind", "kinds", multiple=True, type=click.Choice([k.value for k in DecoyKind]),
              default=(DecoyKind.DOCUMENT.value,), show_default=True)
@click.option("--style", type=click.Choice([s.value for s in NameStyle]),
              default=NameStyle.MIMIC_NEIGHBORS.value, show_default=True)
@click.option("--auto", is_flag=True, help="Prepend the early-traversal directories.")
@click.option("--early-dir", "early_dirs", multiple=True,
              help="Early-traversal directory for --auto (repeatable).")
@click.option("--registry", "registry_path", default="decoys.json", show_default=True)
@click.option("--seed", default=0, show_default=True, type=int)
def decoy_deploy(directory, count, kinds, style, auto, early_dirs, registry_path, seed) -> None:
    """Write decoys into DIRECTORY and record them in the registry."""
    registry = DecoyRegistry.load(registry_path) if Path(registry_path).exists() else DecoyRegistry()
    spec = DecoySpec(directory, count, tuple(DecoyKind(k) for k in kinds), NameStyle(style))
    early = (list(early_dirs) or default_early_dirs()) if auto else []
    try:
        paths = deploy(spec, registry, seed=seed, early_dirs=early)
    except IoFailure as exc:
        raise click.ClickException(str(exc)) from exc
    registry.save(registry_path)
    for p in paths:
        click.echo(p)
    click.echo(f"deployed {len(paths)} decoys; registry at {registry_path}")


@decoy.command("list")
@click.option("--registry", "registry_path", default="decoys.json", show_default=True)
def decoy_list(registry_path) -> None:
    registry = DecoyRegistry.load(registry_path)
    for path, entry in sorted(registry.entries().items()):
        click.echo(f"{path}\t{entry.kind.value}\t{entry.content_digest[:12]}")


@decoy.command("verify")
@click.option("--registry", "registry_path", default="decoys.json", show_default=True)
def decoy_verify(registry_path) -> None:
    """Check that every registered decoy still matches its digest."""
    registry = DecoyRegistry.load(registry_path)
    problems = registry.verify()
    if not problems:
        click.echo(f"ok: {len(registry)} decoys intact")
        return
    for path, problem in sorted(problems.items()):
        click.echo(f"TAMPERED {path}: {problem}")
    sys.exit(1)


# -- gene pool / notes --------------------------------------------------------

@main.group()
def genepool() -> None:
    """Build and inspect ransom-note gene pools."""


@genepool.command("build")
@click.option("--notes", "notes_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--n", default=DEFAULT_NGRAM_SIZE, show_default=True, type=int)
@click.option("--top-k", default=DEFAULT_POOL_CAPACITY, show_default=True, type=int)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def genepool_build(notes_dir, n, top_k, out_path) -> None:
    """Build a pool from every readable text file under NOTES dir."""
    docs = []
    for path in sorted(Path(notes_dir).iterdir()):
        if path.is_file():
            try:
                docs.append(tokenize(path.read_text(encoding="utf-8")))
            except UnicodeDecodeError:
                continue
    pool = build_pool(docs, n=n, top_k=top_k)
    pool.save(out_path)
    click.echo(f"pool: {len(pool)} fragments from {pool.source_count} notes -> {out_path}")


@main.group()
def note() -> None:
    """Score documents against a gene pool."""


@note.command("score")
@click.option("--pool", "pool_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--file", "file_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--tau", default=DEFAULT_TAU_SIM, show_default=True, type=float)
def note_score(pool_path, file_path, tau) -> None:
    pool = GenePool.load(pool_path)
    verdict = similarity(tokenize(Path(file_path).read_text(encoding="utf-8")), pool, tau=tau)
    click.echo(json.dumps({
        "file": file_path,
        "score": round(verdict.score, 6),
        "matched_fragments": len(verdict.matched),
        "is_note": verdict.is_note,
        "tau": tau,
    }))


# -- features ----------------------------------------------------------------

@main.group()
def features() -> None:
    """Extract behavioral feature vectors from traces."""


@features.command("extract")
@click.option("--log", "log_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--pid", required=True, type=int)
@click.option("--start", default=None, type=int, help="Window start in microseconds (default: pid's first event).")
@click.option("--dt", "delta_us", default=None, type=int, help="Window length in microseconds (default: whole trace).")
@click.option("--dims", default=DEFAULT_EMBEDDING_DIMS, show_default=True, type=int)
@click.option("--hash-seed", default=DEFAULT_HASH_SEED, type=int)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def features_extract(log_path, pid, start, delta_us, dims, hash_seed, out_path) -> None:
    parsed = parse_event_log(Path(log_path).read_text(encoding="utf-8"))
    for issue in parsed.issues:
        click.echo(f"warning: line {issue.line_no}: {issue.kind.value} {issue.detail}", err=True)
    pid_events = [ev for ev in parsed.events if ev.pid == pid]
    if not pid_events:
        raise click.ClickException(f"no events for pid {pid}")
    if start is None:
        start = pid_events[0].time
    if delta_us is None:
        delta_us = max(1, pid_events[-1].time - start + 1)
    window = window_events(parsed.events, pid, start, delta_us)
    vec = extract_features(window)
    embedding = encode(build_graph(window), dims, hash_seed).values
    payload = {
        "pid": pid,
        "window_start_us": start,
        "window_end_us": start + delta_us,
        "events": len(window.events),
        "dims": dims,
        "hash_seed": hash_seed,
        "expert": vec.as_dict(),
        "embedding": embedding.tolist(),
        "vector": vec.as_array().tolist() + embedding.tolist(),
    }
    Path(out_path).write_text(json.dumps(payload, indent=2), encoding="utf-8")
    click.echo(f"{len(window.events)} events -> {len(payload['vector'])}-dim vector -> {out_path}")


# -- model -------------------------------------------------------------------

@main.command()
@click.option("--corpus", "corpus_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--trees", default=100, show_default=True, type=int)
@click.option("--eta", default=0.1, show_default=True, type=float)
@click.option("--depth", default=4, show_default=True, type=int)
@click.option("--gamma", default=0.0, show_default=True, type=float)
@click.option("--lambda", "lambda_", default=1.0, show_default=True, type=float)
def train(corpus_dir, out_path, trees, eta, depth, gamma, lambda_) -> None:
    """Train the boosted-forest classifier on a window corpus directory."""
    corpus = Corpus.load(corpus_dir)
    params = BoostParams(n_trees=trees, eta=eta, max_depth=depth, gamma=gamma, lambda_=lambda_)
    forest = fit(corpus.X, corpus.y, params, dims=corpus.dims, hash_seed=corpus.hash_seed)
    forest.save(out_path)
    acc = float(((forest.predict(corpus.X) >= 0.5).astype(int) == corpus.y).mean())
    size = Path(out_path).stat().st_size
    click.echo(f"trained {trees} trees on {len(corpus.y)} windows; train acc {acc:.4f}; {size} bytes -> {out_path}")


@main.command()
@click.option("--model", "model_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--features", "features_path", required=True, type=click.Path(exists=True, dir_okay=False))
def predict(model_path, features_path) -> None:
    """Score one extracted feature vector."""
    forest = BoostedForest.load(model_path)
    payload = json.loads(Path(features_path).read_text(encoding="utf-8"))
    prob = forest.predict_row(np.asarray(payload["vector"], dtype=np.float64))
    click.echo(json.dumps({"probability": round(prob, 6), "ransomware": prob >= 0.5}))


# -- simulator -----------------------------------------------------------------

@main.command()
@click.option("--kind", default=None, help="m1..m6 or office/installer/backup/indexer/editor/zipper.")
@click.option("--files", default=120, show_default=True, type=int)
@click.option("--fps", default=60.0, show_default=True, type=float, help="Files encrypted per second.")
@click.option("--seed", default=7, show_default=True, type=int)
@click.option("--note-every", default=1, show_default=True, type=int)
@click.option("--avoid-decoys", is_flag=True)
@click.option("--spec", "spec_path", default=None, type=click.Path(exists=True, dir_okay=False),
              help="Scenario spec as JSON (overrides the other options).")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
def simulate(kind, files, fps, seed, note_every, avoid_decoys, spec_path, out_dir) -> None:
    """Generate one labeled scenario: trace.jsonl, ground_truth.json, notes.json."""
    if spec_path is not None:
        spec = spec_from_json(Path(spec_path).read_text(encoding="utf-8"))
    elif kind is not None:
        spec = spec_from_kind(kind, seed=seed, files=files, fps=fps,
                              note_every_k_dirs=note_every, avoid_decoys=avoid_decoys)
    else:
        raise click.ClickException("pass --kind or --spec")
    result = generate(spec)
    paths = write_scenario(result, out_dir)
    click.echo(f"{len(result.events)} events -> {paths['trace']}")


@main.command()
@click.option("--ransom", default=240, show_default=True, type=int, help="Ransomware windows.")
@click.option("--benign", default=260, show_default=True, type=int, help="Benign windows.")
@click.option("--seed", default=7, show_default=True, type=int)
@click.option("--dims", default=DEFAULT_EMBEDDING_DIMS, show_default=True, type=int)
@click.option("--include-zipper", is_flag=True, help="Add the zip-like stress profile to the benign mix.")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
def corpus(ransom, benign, seed, dims, include_zipper, out_dir) -> None:
    """Build a labeled window corpus ready for `train`."""
    built = build_corpus(ransom, benign, seed, dims=dims, include_zipper=include_zipper)
    built.save(out_dir)
    click.echo(f"corpus: {built.X.shape[0]} windows x {built.X.shape[1]} features -> {out_dir}")


# -- engine --------------------------------------------------------------------

@main.command()
@click.option("--log", "log_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--pool", "pool_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--model", "model_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--decoys", "registry_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--notes", "notes_path", default=None, type=click.Path(exists=True, dir_okay=False),
              help="Optional notes.json mapping paths to file text for note scoring.")
@click.option("--tau", default=DEFAULT_TAU_SIM, show_default=True, type=float)
@click.option("--out", "alerts_path", required=True, type=click.Path(dir_okay=False))
@click.option("--metrics", "metrics_path", required=True, type=click.Path(dir_okay=False))
def run(log_path, pool_path, model_path, registry_path, notes_path, tau, alerts_path, metrics_path) -> None:
    """Replay a trace through the funnel, writing alerts and metrics."""
    registry = DecoyRegistry.load(registry_path)
    pool = GenePool.load(pool_path)
    forest = BoostedForest.load(model_path)
    provider = MappingContentProvider.from_json_file(notes_path) if notes_path else None
    config = PipelineConfig(tau_sim=tau)
    result = run_replay(log_path, registry, pool, forest, config, provider)
    result.save_alerts(alerts_path)
    result.save_metrics(metrics_path)
    for issue in result.issues:
        click.echo(f"warning: line {issue.line_no}: {issue.kind.value} {issue.detail}", err=True)
    report = metrics_report(result.metrics)
    click.echo(json.dumps(report))


@main.command()
@click.option("--dirs", "watch_dirs", required=True, multiple=True, type=click.Path(exists=True, file_okay=False))
@click.option("--pool", "pool_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--model", "model_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--decoys", "registry_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--tau", default=DEFAULT_TAU_SIM, show_default=True, type=float)
@click.option("--duration", default=None, type=float, help="Stop after this many seconds (default: run until interrupted).")
def watch(watch_dirs, pool_path, model_path, registry_path, tau, duration) -> None:
    """Watch directories live; print alerts as they fire."""
    registry = DecoyRegistry.load(registry_path)
    pool = GenePool.load(pool_path)
    forest = BoostedForest.load(model_path)
    config = PipelineConfig(tau_sim=tau)
    try:
        result = run_live(
            watch_dirs, registry, pool, forest, config,
            duration_s=duration,
            content_provider=FilesystemContentProvider(),
            on_alert=lambda alert: click.echo(alert.to_json_line()),
        )
    except WatchUnavailable as exc:
        raise click.ClickException(f"{exc}; live watching unavailable, use `run` for trace replay") from exc
    click.echo(json.dumps(metrics_report(result.metrics)))


if __name__ == "__main__":
    main()
