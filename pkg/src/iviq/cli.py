"""Command-line entry points: index build/verify, simulate, eval, timing, serve."""

from __future__ import annotations

import json
from pathlib import Path

import click

from .corpus import build_index, load_index, load_manifest, save_index, save_manifest
from .errors import GeneratorExhausted, IviqError
from .evaluation import emit_report, run_experiment, timing_study
from .gateway import make_gateway
from .heuristic import ObjectLexicon
from .session import SessionConfig, SessionRecord, replay_session, start_session
from .worldgen import generate_manifest


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    data = json.loads(Path(path).read_text("utf-8"))
    if not isinstance(data, dict):
        raise click.ClickException("config file must hold a JSON object")
    return data


def _session_config(config_file: dict, **flags) -> SessionConfig:
    merged = dict(config_file)
    merged.update({k: v for k, v in flags.items() if v is not None})
    config = SessionConfig.from_json(merged)
    problems = config.problems()
    if problems:
        raise click.ClickException("invalid config:\n  " + "\n  ".join(problems))
    return config


def _gateway_for(manifest, provider: str | None, seed: int | None,
                 noise_rate: float | None = None, call_delay_s: float | None = None):
    if provider is not None and provider != manifest.provider.get("kind"):
        manifest = type(manifest)(
            **{**manifest.__dict__, "provider": {**manifest.provider, "kind": provider}})
    try:
        return make_gateway(manifest, seed=seed, noise_rate=noise_rate,
                            call_delay_s=call_delay_s)
    except IviqError as exc:
        raise click.ClickException(str(exc))


@click.group()
def main():
    """Interactive text-to-video retrieval with question/answer refinement."""


@main.group()
def index():
    """Build or verify the binary embedding index."""


@index.command("build")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--seed", type=int, default=None, help="Override the provider seed.")
@click.option("--max-concurrency", type=int, default=1, show_default=True)
def index_build(manifest_path, out_path, seed, max_concurrency):
    """Embed every (video, segment) and write the index container."""
    manifest = load_manifest(manifest_path)
    gateway = _gateway_for(manifest, None, seed)
    try:
        matrix = build_index(manifest, gateway, max_concurrency=max_concurrency)
    except IviqError as exc:
        raise click.ClickException(str(exc))
    save_index(matrix, out_path)
    click.echo(f"wrote {len(matrix)} rows (dim {matrix.dimension}) to {out_path}")


@index.command("verify")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--index", "index_path", required=True, type=click.Path(exists=True))
def index_verify(manifest_path, index_path):
    """Check container integrity and coverage against the manifest."""
    manifest = load_manifest(manifest_path)
    try:
        matrix = load_index(index_path)
    except IviqError as exc:
        raise click.ClickException(f"container check failed: {exc}")
    problems = []
    if matrix.dimension != manifest.dimension:
        problems.append(
            f"dimension {matrix.dimension} != manifest dimension {manifest.dimension}")
    expected = {(v.video_id, seg) for v in manifest.videos for seg in v.segments}
    have = set(matrix.keys)
    if expected - have:
        problems.append(f"missing rows for {sorted(expected - have)[:5]}")
    if have - expected:
        problems.append(f"extra rows {sorted(have - expected)[:5]}")
    if manifest.provider.get("kind") == "synthetic" and not problems:
        rebuilt = build_index(manifest, make_gateway(manifest))
        if rebuilt != matrix:
            problems.append("index bytes differ from a fresh synthetic rebuild")
    if problems:
        raise click.ClickException("verification failed:\n  " + "\n  ".join(problems))
    click.echo(f"index OK: {len(matrix)} rows, dim {matrix.dimension}, checksum valid")


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--query", required=True)
@click.option("--target", default=None, help="Target video id (defaults to the caption's video).")
@click.option("--generator", type=click.Choice(["heuristic", "auto_text", "auto_text_vid"]),
              default=None)
@click.option("--answer-provider", type=click.Choice(["scripted", "videoqa", "cap_lm"]),
              default=None)
@click.option("--augment", "augmentations", multiple=True, type=click.Choice(["AS", "AO"]))
@click.option("--max-rounds", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
def simulate(manifest_path, query, target, generator, answer_provider, augmentations,
             max_rounds, seed, config_path):
    """Run one verbose simulated session and print the dialogue."""
    manifest = load_manifest(manifest_path)
    config = _session_config(
        _load_config_file(config_path),
        generator=generator, answer_provider=answer_provider, max_rounds=max_rounds,
        augmentations=list(augmentations) or None)
    gateway = _gateway_for(manifest, None, seed)
    if target is None:
        matches = [vid for vid, text in manifest.captions if text == query]
        if not matches:
            raise click.ClickException(
                "--target not given and the query matches no manifest caption")
        target = matches[0]
    index_ = build_index(manifest, gateway)
    try:
        session = start_session(query, config, manifest=manifest, index=index_,
                                gateway=gateway, target=target)
    except IviqError as exc:
        raise click.ClickException(str(exc))

    click.echo(f'initial query: "{query}"  (target {target})')
    click.echo(f"round 0 rank: {session.record.trajectory[0]}")
    while True:
        try:
            round_ = session.step()
        except GeneratorExhausted:
            break
        rank = session.record.trajectory[-1]
        click.echo(f"  Q{round_.round_index}: {round_.question.text}")
        click.echo(f"  A{round_.round_index}: {round_.answer}   (rank -> {rank})")
    record = session.record
    click.echo(f'final query: "{record.query.composed}"')
    click.echo(f"rank {record.trajectory[0]} -> {record.trajectory[-1]} "
               f"after {len(record.rounds)} rounds")


@main.command("eval")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--seed", type=int, default=None, help="Override the provider seed.")
@click.option("--provider", type=click.Choice(["synthetic", "remote"]), default=None,
              help="Override the model provider kind.")
@click.option("--generator", type=click.Choice(["heuristic", "auto_text", "auto_text_vid"]),
              default=None)
@click.option("--answer-provider", type=click.Choice(["scripted", "videoqa", "cap_lm"]),
              default=None)
@click.option("--composer", type=click.Choice(
    ["concat_sep", "similarity_aggregation", "rank_aggregation"]), default=None)
@click.option("--augment", "augmentations", multiple=True, type=click.Choice(["AS", "AO"]))
@click.option("--max-rounds", type=int, default=None)
@click.option("--rerank/--no-rerank", default=None)
@click.option("--rerank-k", type=int, default=None)
@click.option("--caption-k", type=int, default=None)
@click.option("--noise-rate", type=float, default=None, help="Synthetic VQA noise rate.")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--figures/--no-figures", default=True, show_default=True)
def eval_cmd(manifest_path, out_dir, seed, provider, generator, answer_provider, composer,
             augmentations, max_rounds, rerank, rerank_k, caption_k, noise_rate,
             config_path, figures):
    """Run the batch experiment and write report.json / report.csv (+ figures)."""
    manifest = load_manifest(manifest_path)
    config = _session_config(
        _load_config_file(config_path),
        generator=generator, answer_provider=answer_provider, composer=composer,
        max_rounds=max_rounds, rerank=rerank, rerank_k=rerank_k, caption_k=caption_k,
        augmentations=list(augmentations) or None)
    gateway = _gateway_for(manifest, provider, seed, noise_rate=noise_rate)
    try:
        report = run_experiment(manifest, config, gateway)
    except IviqError as exc:
        raise click.ClickException(str(exc))
    written = emit_report(report, out_dir)
    if figures:
        from .plots import plot_median_rank, plot_recall_curves

        written.append(plot_recall_curves(report, Path(out_dir) / "recall_vs_rounds.png"))
        written.append(plot_median_rank(report, Path(out_dir) / "median_rank.png"))
    final = report.snapshots[-1]
    click.echo(f"sessions: {len(report.trajectories)}  failures: {len(report.failures)}")
    click.echo(f"final round {final.round_index}: R@1 {final.recall_at_1:.2f}  "
               f"R@5 {final.recall_at_5:.2f}  R@10 {final.recall_at_10:.2f}  "
               f"MdR {final.median_rank:g}")
    for path in written:
        click.echo(f"wrote {path}")


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--sample-n", type=int, default=50, show_default=True)
@click.option("--providers", default="videoqa,cap_lm", show_default=True,
              help="Comma-separated answer provider tags.")
@click.option("--delay", "call_delay_s", type=float, default=0.0, show_default=True,
              help="Injected per-model-call delay in seconds.")
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--figures/--no-figures", default=True, show_default=True)
def timing(manifest_path, sample_n, providers, call_delay_s, seed, out_dir, figures):
    """Answer-latency study across providers; writes timing.json / timing.csv."""
    manifest = load_manifest(manifest_path)
    tags = [t.strip() for t in providers.split(",") if t.strip()]
    gateway = _gateway_for(manifest, None, seed, call_delay_s=call_delay_s)
    try:
        table = timing_study(manifest, sample_n, tags, gateway)
    except (IviqError, ValueError) as exc:
        raise click.ClickException(str(exc))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "timing.json").write_text(
        json.dumps(table, indent=2, sort_keys=True) + "\n", "utf-8")
    lines = ["provider,mean_s,calls"]
    for tag in tags:
        cell = table["providers"][tag]
        lines.append(f"{tag},{cell['mean_s']:.6f},{cell['calls']}")
    (out / "timing.csv").write_text("\n".join(lines) + "\n", "utf-8")
    if figures:
        from .plots import plot_latency_table

        plot_latency_table(table, out / "latency.png")
    for tag in tags:
        cell = table["providers"][tag]
        click.echo(f"{tag}: mean {cell['mean_s']:.4f}s over {cell['calls']} answers")
    click.echo(f"wrote {out / 'timing.json'} and {out / 'timing.csv'}")


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--record", "record_path", required=True, type=click.Path(exists=True),
              help="SessionRecord JSON exported from a live or simulated session.")
@click.option("--seed", type=int, default=None)
def replay(manifest_path, record_path, seed):
    """Replay a session record offline and check it reproduces itself."""
    manifest = load_manifest(manifest_path)
    gateway = _gateway_for(manifest, None, seed)
    try:
        record = SessionRecord.from_json(json.loads(Path(record_path).read_text("utf-8")))
    except (ValueError, KeyError) as exc:
        raise click.ClickException(f"record does not parse: {exc}")
    index_ = build_index(manifest, gateway)
    result = replay_session(record, index_, gateway)
    problems = []
    if result.composed_queries[-1] != record.query.composed:
        problems.append("composed query diverged")
    if record.target is not None and result.trajectory != record.trajectory:
        problems.append(
            f"trajectory diverged: {list(result.trajectory)} != {list(record.trajectory)}")
    if problems:
        raise click.ClickException("replay mismatch: " + "; ".join(problems))
    click.echo(f"replay OK: {len(record.rounds)} rounds reproduce the record exactly")


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8080, show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--generator", type=click.Choice(["heuristic", "auto_text", "auto_text_vid"]),
              default=None)
@click.option("--ui-dir", type=click.Path(exists=True), default=None,
              help="Directory with the built UI bundle to serve at /.")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
def serve(manifest_path, host, port, seed, generator, ui_dir, config_path):
    """Host the session API (and the UI bundle, if provided)."""
    import uvicorn

    from .service import ServiceContext, create_app

    manifest = load_manifest(manifest_path)
    config = _session_config(_load_config_file(config_path), generator=generator)
    gateway = _gateway_for(manifest, None, seed)
    click.echo(f"building index for {len(manifest.videos)} videos...")
    index_ = build_index(manifest, gateway)
    ctx = ServiceContext(
        manifest=manifest, index=index_, gateway=gateway,
        lexicon=ObjectLexicon.default(), default_config=config,
        ui_dir=Path(ui_dir) if ui_dir else None)
    app = create_app(ctx)
    click.echo(f"serving on http://{host}:{port}")
    uvicorn.run(app, host=host, port=port, log_level="warning")


@main.command("make-world")
@click.option("--seed", type=int, required=True)
@click.option("--videos", "n_videos", type=int, default=500, show_default=True)
@click.option("--dimension", type=int, default=256, show_default=True)
@click.option("--objects", "n_objects", type=int, default=20, show_default=True)
@click.option("--extras", "extras_per_video", type=int, default=2, show_default=True)
@click.option("--halves/--no-halves", default=True, show_default=True)
@click.option("--noise-rate", type=float, default=0.0, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
def make_world(seed, n_videos, dimension, n_objects, extras_per_video, halves,
               noise_rate, out_path):
    """Generate a synthetic corpus manifest for desk-scale experiments."""
    try:
        manifest = generate_manifest(
            seed, n_videos, dimension=dimension, n_objects=n_objects,
            extras_per_video=extras_per_video, halves=halves, noise_rate=noise_rate)
    except ValueError as exc:
        raise click.ClickException(str(exc))
    save_manifest(manifest, out_path)
    click.echo(f"wrote {manifest.name}: {n_videos} videos, "
               f"{len(manifest.captions)} captions to {out_path}")


if __name__ == "__main__":
    main()
