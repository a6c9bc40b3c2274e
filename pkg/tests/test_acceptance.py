"""Acceptance suite: one test per criterion, each printing a pass line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines; every tolerance and bound is pinned here, nothing is deferred.
"""

import statistics
import time

import numpy as np
import pytest
from click.testing import CliRunner

from iviq.cli import main as cli_main
from iviq.corpus import EmbeddingMatrix, build_index
from iviq.evaluation import compute_metrics, run_experiment, timing_study
from iviq.gateway import SyntheticProvider
from iviq.parametric import render_auto_text, render_auto_text_vid, CaptionSet
from iviq.ranking import rank_cosine, rerank_itm
from iviq.session import SessionConfig, replay_session, start_session
from iviq.text import tokenize
from iviq.worldgen import generate_manifest

A3_SEED = 7
A3_VIDEOS = 500


@pytest.fixture(scope="module")
def a3_world():
    """Seed-7 world of 500 videos: object-only captions ambiguous (>=20 share
    each object), full profile unique, extra-object pairs globally unique."""
    manifest = generate_manifest(A3_SEED, A3_VIDEOS, extra_slots=("extra_objects",))
    gateway = SyntheticProvider.from_manifest(manifest)
    index = build_index(manifest, gateway)
    return manifest, gateway, index


def _passline(name: str, detail: str) -> None:
    print(f"[PASS] {name}: {detail}")


def test_A1_metric_oracle():
    """compute_metrics equals an independent brute-force implementation
    exactly on 1000 random rank vectors; MdR of [5, 6] is exactly 5.5."""
    t0 = time.monotonic()
    rng = np.random.default_rng(20240901)
    for _ in range(1000):
        n = int(rng.integers(1, 51))
        corpus_size = int(rng.integers(10, 10001))
        ranks = [int(r) for r in rng.integers(1, corpus_size + 1, size=n)]
        snap = compute_metrics(ranks, corpus_size)
        # brute force: explicit counting and stdlib median
        assert snap.recall_at_1 == 100.0 * len([r for r in ranks if r <= 1]) / n
        assert snap.recall_at_5 == 100.0 * len([r for r in ranks if r <= 5]) / n
        assert snap.recall_at_10 == 100.0 * len([r for r in ranks if r <= 10]) / n
        assert snap.median_rank == float(statistics.median(ranks))
    assert compute_metrics([5, 6], 10).median_rank == 5.5
    elapsed = time.monotonic() - t0
    assert elapsed < 5.0
    _passline("A1", f"1000 random vectors exact, MdR([5,6])=5.5, {elapsed:.2f}s < 5s")


def test_A2_ranking_oracle():
    """rank_cosine equals the exhaustive-sort oracle on 100 random corpora
    (N <= 1000, d = 64), ids and ties included; the rerank window property
    holds for K in {1, 5, N}."""
    t0 = time.monotonic()
    rng = np.random.default_rng(424242)

    class ScoreGateway:
        """ITM scores derived from a fixed hash so reranks genuinely reorder."""

        def itm(self, video_id, text):
            return (hash((video_id, "itm")) % 1000) / 1000.0

    for trial in range(100):
        n = int(rng.integers(2, 1001))
        d = 64
        vecs = rng.standard_normal((n, d))
        vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
        if trial % 4 == 0:
            vecs[: n // 2] = vecs[0]  # massive tie block
        ids = [f"v{int(i):04d}" for i in rng.permutation(n)]
        index = EmbeddingMatrix(
            d, [(vid, "whole") for vid in ids], vecs.astype(np.float32))
        q = rng.standard_normal(d)
        q /= np.linalg.norm(q)
        ranked = rank_cosine(q, index)
        # exhaustive oracle over float32-exact dot products
        scored = sorted(
            ((-float(vecs[i].astype(np.float32).astype(np.float64) @ q), vid)
             for i, vid in enumerate(ids)))
        assert list(ranked.ids()) == [vid for _, vid in scored]
        for k in (1, 5, n):
            if k > n:
                continue
            out = rerank_itm(ranked, "q", k, ScoreGateway())
            assert out.ids()[k:] == ranked.ids()[k:]
    elapsed = time.monotonic() - t0
    assert elapsed < 30.0
    _passline("A2", f"100 corpora exact vs oracle incl. ties, window property, "
                    f"{elapsed:.2f}s < 30s")


def test_A3_interaction_improves_retrieval(a3_world):
    """Heuristic generator with oracle answers on the ambiguous seed-7 world:
    round-0 R@1 < 30%, final R@1 >= 95%, R@5 non-decreasing. Brute-force
    confirmation: every final composed query covers the target's full truth
    token set (the separability regime of the synthetic embedding)."""
    t0 = time.monotonic()
    manifest, gateway, index = a3_world

    # ambiguity precondition: >= 20 videos share each object token
    from collections import Counter
    counts = Counter(v.truth.slot("whole", "object")[0] for v in manifest.videos)
    assert min(counts.values()) >= 20

    config = SessionConfig(generator="heuristic", answer_provider="scripted",
                           augmentations=frozenset({"AO"}), max_rounds=6)
    report = run_experiment(manifest, config, gateway, index=index)
    assert not report.failures
    round0, final = report.snapshots[0], report.snapshots[-1]
    assert round0.recall_at_1 < 30.0
    assert final.recall_at_1 >= 95.0
    r5 = [s.recall_at_5 for s in report.snapshots]
    assert all(a <= b for a, b in zip(r5, r5[1:]))

    # brute-force confirmation of the separability mechanism
    for video_id, caption in manifest.captions:
        session = start_session(caption, config, manifest=manifest, index=index,
                                gateway=gateway, target=video_id)
        record = session.run()
        composed_tokens = set(tokenize(record.query.composed, drop_stopwords=True))
        truth_tokens = set(manifest.record(video_id).truth.tokens("whole"))
        assert truth_tokens <= composed_tokens, video_id

    elapsed = time.monotonic() - t0
    assert elapsed < 120.0
    _passline("A3", f"R@1 {round0.recall_at_1:.1f}% -> {final.recall_at_1:.1f}% "
                    f"(needs <30 -> >=95), R@5 non-decreasing, all composed "
                    f"queries cover truth tokens, {elapsed:.1f}s < 120s")


def test_A4_ablation_ordering(a3_world):
    """Auto-text with AO beats Auto-text without AO at the same round budget
    on the A3 world (strict ordering, not a fixed number)."""
    t0 = time.monotonic()
    manifest, gateway, index = a3_world
    finals = {}
    for label, augs in (("with_ao", frozenset({"AO"})), ("without_ao", frozenset())):
        config = SessionConfig(generator="auto_text", answer_provider="scripted",
                               augmentations=augs, max_rounds=2)
        report = run_experiment(manifest, config, gateway, index=index)
        finals[label] = report.snapshots[-1].recall_at_1
    assert finals["with_ao"] > finals["without_ao"]
    elapsed = time.monotonic() - t0
    assert elapsed < 120.0
    _passline("A4", f"Auto-text final R@1 with AO {finals['with_ao']:.1f}% > "
                    f"without AO {finals['without_ao']:.1f}%, {elapsed:.1f}s < 120s")


def test_A5_prompt_fidelity():
    """Rendered prompts byte-match the template constants, including the
    verbatim 'unique identify' wording."""
    auto_text = render_auto_text("a man is singing")
    assert auto_text == (
        "Suppose you are given the following video descriptions a man is singing, "
        "What question would you ask to help you unique identify the video?")
    captions = CaptionSet(0, (("v1", "a dog runs"), ("v2", "a cat sleeps")))
    auto_vid = render_auto_text_vid("a pet video", captions)
    assert auto_vid == (
        "Suppose you are given the following video descriptions: "
        "a dog runs; a cat sleeps. "
        "What question would you ask to help you unique identify the video "
        "described as follows: a pet video?")
    assert "unique identify" in auto_text and "unique identify" in auto_vid
    _passline("A5", "Auto-text and Auto-text-vid prompts byte-match the constants")


def test_A6_timing_study_shape(a3_world):
    """With a 50 ms injected per-call cost over 50 videos, CAP+LM (two calls)
    lands at ~2x VideoQA (one call), tolerance +/-20%."""
    t0 = time.monotonic()
    manifest, _, _ = a3_world
    delayed = SyntheticProvider.from_manifest(manifest, call_delay_s=0.05)
    table = timing_study(manifest, 50, ["videoqa", "cap_lm"], delayed)
    vqa = table["providers"]["videoqa"]["mean_s"]
    cap = table["providers"]["cap_lm"]["mean_s"]
    ratio = cap / vqa
    assert 1.6 <= ratio <= 2.4
    elapsed = time.monotonic() - t0
    assert elapsed < 60.0
    _passline("A6", f"CAP+LM {cap * 1000:.0f}ms vs VideoQA {vqa * 1000:.0f}ms, "
                    f"ratio {ratio:.2f} in [1.6, 2.4], {elapsed:.1f}s < 60s")


def test_A7_determinism_and_replay(tmp_path):
    """`eval --seed 7` twice yields byte-identical report files, and every
    SessionRecord replays offline to identical composed queries and ranks."""
    t0 = time.monotonic()
    world_path = tmp_path / "world.json"
    runner = CliRunner()
    made = runner.invoke(cli_main, [
        "make-world", "--seed", "7", "--videos", "60", "--objects", "6",
        "--dimension", "64", "--out", str(world_path)])
    assert made.exit_code == 0, made.output
    outputs = []
    for name in ("one", "two"):
        out_dir = tmp_path / name
        result = runner.invoke(cli_main, [
            "eval", "--manifest", str(world_path), "--out", str(out_dir),
            "--provider", "synthetic", "--seed", "7", "--no-figures"])
        assert result.exit_code == 0, result.output
        outputs.append(out_dir)
    for fname in ("report.json", "report.csv"):
        assert (outputs[0] / fname).read_bytes() == (outputs[1] / fname).read_bytes()

    manifest = generate_manifest(7, 60, n_objects=6, dimension=64)
    gateway = SyntheticProvider.from_manifest(manifest)
    index = build_index(manifest, gateway)
    config = SessionConfig(generator="heuristic", answer_provider="videoqa",
                           augmentations=frozenset({"AO"}))
    for video_id, caption in manifest.captions:
        session = start_session(caption, config, manifest=manifest, index=index,
                                gateway=gateway, target=video_id)
        record = session.run()
        replayed = replay_session(record, index, gateway)
        assert replayed.trajectory == record.trajectory
        assert replayed.composed_queries[-1] == record.query.composed
    elapsed = time.monotonic() - t0
    _passline("A7", f"byte-identical CLI reports and 60/60 sessions replay "
                    f"identically, {elapsed:.1f}s")


def test_A8_noise_robustness(a3_world):
    """At VQA noise rate 0.2 the final R@1 still beats round 0 by >= 20
    absolute points on the A3 world (nearly-correct answers still help)."""
    t0 = time.monotonic()
    manifest, _, index = a3_world
    noisy = SyntheticProvider.from_manifest(manifest, noise_rate=0.2)
    config = SessionConfig(generator="heuristic", answer_provider="videoqa",
                           augmentations=frozenset({"AO"}), max_rounds=6)
    report = run_experiment(manifest, config, noisy, index=index)
    round0 = report.snapshots[0].recall_at_1
    final = report.snapshots[-1].recall_at_1
    assert final - round0 >= 20.0
    elapsed = time.monotonic() - t0
    _passline("A8", f"noise 0.2: R@1 {round0:.1f}% -> {final:.1f}% "
                    f"(gain {final - round0:.1f} >= 20 points), {elapsed:.1f}s")
