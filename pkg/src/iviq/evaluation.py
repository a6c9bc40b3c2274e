"""Batch evaluation: R@K / median-rank metrics per round, latency accounting,
and report serialization (JSON for full fidelity, CSV for the metric table).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING

from .answers import AnswerRequest, make_answer_provider
from .corpus import CorpusManifest, EmbeddingMatrix, build_index
from .errors import IviqError, ProviderError
from .heuristic import ObjectLexicon, plan_initial
from .session import SessionConfig, start_session

if TYPE_CHECKING:
    from .gateway import ModelGateway

REPORT_SCHEMA = "iviq-report/1"

CSV_HEADER = "round,R1,R5,R10,MdR"


@dataclass(frozen=True)
class MetricsSnapshot:
    round_index: int
    recall_at_1: float
    recall_at_5: float
    recall_at_10: float
    median_rank: float

    def to_json(self) -> dict:
        return {
            "round": self.round_index,
            "recall_at_1": self.recall_at_1,
            "recall_at_5": self.recall_at_5,
            "recall_at_10": self.recall_at_10,
            "median_rank": self.median_rank,
        }


def compute_metrics(ranks: list[int], corpus_size: int, *,
                    round_index: int = 0) -> MetricsSnapshot:
    """R@K as a percentage of queries with rank <= K; median rank with
    even-count averaging (so medians can be fractional)."""
    if not ranks:
        raise ValueError("cannot compute metrics over an empty rank list")
    for r in ranks:
        if not 1 <= r <= corpus_size:
            raise ValueError(f"rank {r} outside [1, {corpus_size}]")
    n = len(ranks)

    def recall(k: int) -> float:
        return 100.0 * sum(1 for r in ranks if r <= k) / n

    ordered = sorted(ranks)
    mid = n // 2
    if n % 2 == 1:
        median = float(ordered[mid])
    else:
        median = (ordered[mid - 1] + ordered[mid]) / 2.0
    return MetricsSnapshot(round_index, recall(1), recall(5), recall(10), median)


@dataclass
class ExperimentReport:
    config: dict
    corpus: dict
    snapshots: list[MetricsSnapshot]
    trajectories: list[dict]  # {"video_id", "ranks"}
    latency: dict  # provider tag -> {"mean_s", "total_s", "calls"}
    failures: list[dict] = field(default_factory=list)

    @property
    def rounds_executed(self) -> int:
        return max((len(t["ranks"]) - 1 for t in self.trajectories), default=0)

    def to_json(self) -> dict:
        return {
            "schema": REPORT_SCHEMA,
            "config": self.config,
            "corpus": self.corpus,
            "sessions": len(self.trajectories),
            "rounds_executed": self.rounds_executed,
            "metrics": [s.to_json() for s in self.snapshots],
            "trajectories": self.trajectories,
            "latency": self.latency,
            "failures": self.failures,
        }

    def serialize(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=2) + "\n"

    def to_csv(self) -> str:
        lines = [CSV_HEADER]
        for snap in self.snapshots:
            lines.append(
                f"{snap.round_index},{snap.recall_at_1:.2f},{snap.recall_at_5:.2f},"
                f"{snap.recall_at_10:.2f},{snap.median_rank:g}")
        return "\n".join(lines) + "\n"


def _corpus_descriptor(manifest: CorpusManifest, gateway: "ModelGateway") -> dict:
    descriptor = {
        "name": manifest.name,
        "videos": len(manifest.videos),
        "dimension": manifest.dimension,
        "provider": manifest.provider.get("kind"),
    }
    for attr in ("seed", "noise_rate"):
        value = getattr(gateway, attr, None)
        if value is not None:
            descriptor[attr] = value
    return descriptor


def run_experiment(manifest: CorpusManifest, config: SessionConfig,
                   gateway: "ModelGateway", *, index: EmbeddingMatrix | None = None,
                   lexicon: ObjectLexicon | None = None) -> ExperimentReport:
    """One simulated session per evaluation caption, in manifest order.

    Failed sessions are recorded and skipped, never aborting the batch.
    The report is a pure function of (manifest, config, provider), so a
    deterministic provider yields byte-identical reports across runs.
    """
    config.validate()
    if not manifest.captions:
        raise ValueError("manifest has no evaluation captions")
    if index is None:
        index = build_index(manifest, gateway)
    if lexicon is None and config.generator == "heuristic":
        lexicon = ObjectLexicon.default()

    caption_cache: dict[str, str] = {}
    trajectories: list[dict] = []
    failures: list[dict] = []
    latency_totals: dict[str, dict] = {}

    for video_id, text in manifest.captions:
        try:
            session = start_session(
                text, config, manifest=manifest, index=index, gateway=gateway,
                target=video_id, lexicon=lexicon, caption_cache=caption_cache)
            record = session.run()
        except IviqError as exc:
            failures.append({"video_id": video_id, "error": str(exc)})
            continue
        trajectories.append({"video_id": video_id, "ranks": list(record.trajectory)})
        for round_ in record.rounds:
            bucket = latency_totals.setdefault(
                round_.answer_provider, {"total_s": 0.0, "calls": 0})
            bucket["total_s"] += round_.answer_latency_s
            bucket["calls"] += 1

    latency = {
        tag: {"mean_s": bucket["total_s"] / bucket["calls"],
              "total_s": bucket["total_s"], "calls": bucket["calls"]}
        for tag, bucket in sorted(latency_totals.items())
    }

    corpus_size = len(manifest.videos)
    max_round = max((len(t["ranks"]) - 1 for t in trajectories), default=0)
    snapshots = []
    for r in range(max_round + 1):
        # sessions that stopped early keep their final ranking from then on
        ranks = [t["ranks"][min(r, len(t["ranks"]) - 1)] for t in trajectories]
        snapshots.append(compute_metrics(ranks, corpus_size, round_index=r))

    return ExperimentReport(
        config=config.to_json(),
        corpus=_corpus_descriptor(manifest, gateway),
        snapshots=snapshots,
        trajectories=trajectories,
        latency=latency,
        failures=failures,
    )


def timing_study(manifest: CorpusManifest, sample_n: int, provider_tags: list[str],
                 gateway: "ModelGateway", *, lexicon: ObjectLexicon | None = None,
                 deadline_s: float = 60.0) -> dict:
    """Mean per-answer time per provider over sample_n videos x planned questions.

    Mirrors the 50-video protocol: each sampled video is asked its full
    heuristic question plan, once per provider.
    """
    if not provider_tags:
        raise ValueError("at least one provider tag is required")
    if sample_n < 1 or sample_n > len(manifest.captions):
        raise ValueError(
            f"sample_n={sample_n} out of range; corpus has {len(manifest.captions)} captions")
    lexicon = lexicon or ObjectLexicon.default()
    truths = manifest.truths()

    cells: dict[str, dict] = {
        tag: {"total_s": 0.0, "calls": 0, "errors": []} for tag in provider_tags}
    providers = {
        tag: make_answer_provider(tag, gateway=gateway, truths=truths)
        for tag in provider_tags
    }

    for video_id, text in manifest.captions[:sample_n]:
        plan = plan_initial(text, lexicon)
        questions = list(plan.pending)
        for question in questions:
            for tag in provider_tags:
                try:
                    result = providers[tag](AnswerRequest(
                        question=question, video_id=video_id, deadline_s=deadline_s))
                except ProviderError as exc:
                    cells[tag]["errors"].append({"video_id": video_id, "error": str(exc)})
                    continue
                cells[tag]["total_s"] += result.latency_s
                cells[tag]["calls"] += 1

    table = {}
    for tag, cell in cells.items():
        table[tag] = {
            "mean_s": (cell["total_s"] / cell["calls"]) if cell["calls"] else 0.0,
            "calls": cell["calls"],
            "errors": cell["errors"],
        }
    return {"sample_n": sample_n, "providers": table}


def emit_report(report: ExperimentReport, out_dir: str | Path,
                formats: tuple[str, ...] = ("json", "csv")) -> list[Path]:
    """Write report files; returns the written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if "json" in formats:
        path = out_dir / "report.json"
        path.write_text(report.serialize(), "utf-8")
        written.append(path)
    if "csv" in formats:
        path = out_dir / "report.csv"
        path.write_text(report.to_csv(), "utf-8")
        written.append(path)
    return written
