"""Interaction state machine: the evolving query, the per-round loop, and
query composition strategies.

Each round runs generate question -> obtain answer -> compose fragment ->
re-rank. Failed rounds roll back atomically; all state snapshots are
immutable, so a failed provider call leaves the serialized session unchanged.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING, Protocol

import numpy as np

from .answers import AnswerFn, AnswerRequest, make_answer_provider
from .corpus import CorpusManifest, EmbeddingMatrix
from .errors import CapabilityError, GeneratorExhausted
from .ranking import RankedList, RankEntry, order_desc, rank_cosine, rank_of, rerank_itm
from .text import SEPARATOR

if TYPE_CHECKING:
    from .gateway import ModelGateway

SESSION_SCHEMA = "iviq-session/1"

GENERATORS = ("heuristic", "auto_text", "auto_text_vid")
COMPOSERS = ("concat_sep", "similarity_aggregation", "rank_aggregation")
ANSWER_PROVIDERS = ("scripted", "videoqa", "cap_lm", "human")
FRAGMENT_STYLES = ("question_plus_answer", "answer_only")
AUGMENTATIONS = ("AS", "AO")
SEGMENTS = ("whole", "first_half", "second_half")
QUESTION_KINDS = ("action", "scene", "object_identify", "object_inventory", "open")

MAX_ROUNDS_CAP = 10
HEURISTIC_DEFAULT_ROUNDS = 6


@dataclass(frozen=True)
class Question:
    text: str
    kind: str
    segment: str = "whole"

    def __post_init__(self):
        if not self.text:
            raise ValueError("question text must be non-empty")
        if self.kind not in QUESTION_KINDS:
            raise ValueError(f"unknown question kind {self.kind!r}")
        if self.segment not in SEGMENTS:
            raise ValueError(f"unknown segment {self.segment!r}")

    def to_json(self) -> dict:
        return {"text": self.text, "kind": self.kind, "segment": self.segment}

    @staticmethod
    def from_json(data: dict) -> "Question":
        return Question(data["text"], data["kind"], data.get("segment", "whole"))


@dataclass(frozen=True)
class QueryState:
    initial_query: str
    fragments: tuple[str, ...] = ()

    @property
    def composed(self) -> str:
        """The current query: initial query plus fragments, [SEP]-joined."""
        return SEPARATOR.join((self.initial_query, *self.fragments))

    @property
    def pieces(self) -> tuple[str, ...]:
        return (self.initial_query, *self.fragments)

    def with_fragment(self, fragment: str) -> "QueryState":
        return QueryState(self.initial_query, self.fragments + (fragment,))


@dataclass(frozen=True)
class DialogueRound:
    round_index: int
    question: Question
    answer: str
    generator: str
    answer_provider: str
    answer_latency_s: float

    def to_json(self) -> dict:
        return {
            "round_index": self.round_index,
            "question": self.question.to_json(),
            "answer": self.answer,
            "generator": self.generator,
            "answer_provider": self.answer_provider,
            "answer_latency_s": self.answer_latency_s,
        }

    @staticmethod
    def from_json(data: dict) -> "DialogueRound":
        return DialogueRound(
            data["round_index"], Question.from_json(data["question"]), data["answer"],
            data["generator"], data["answer_provider"], data["answer_latency_s"])


@dataclass(frozen=True)
class SessionConfig:
    generator: str = "heuristic"
    composer: str = "concat_sep"
    max_rounds: int | None = None
    rerank: bool = True
    rerank_k: int = 128
    caption_k: int = 5
    augmentations: frozenset[str] = frozenset()
    answer_provider: str = "scripted"
    fragment_style: str = "question_plus_answer"
    answer_deadline_s: float = 30.0

    @property
    def effective_max_rounds(self) -> int:
        if self.max_rounds is not None:
            return self.max_rounds
        return HEURISTIC_DEFAULT_ROUNDS if self.generator == "heuristic" else MAX_ROUNDS_CAP

    def problems(self) -> list[str]:
        """All config violations, for exhaustive CLI error listings."""
        issues = []
        if self.generator not in GENERATORS:
            issues.append(f"unknown generator {self.generator!r} (choose from {GENERATORS})")
        if self.composer not in COMPOSERS:
            issues.append(f"unknown composer {self.composer!r} (choose from {COMPOSERS})")
        if self.answer_provider not in ANSWER_PROVIDERS:
            issues.append(
                f"unknown answer provider {self.answer_provider!r} (choose from {ANSWER_PROVIDERS})")
        if self.fragment_style not in FRAGMENT_STYLES:
            issues.append(f"unknown fragment style {self.fragment_style!r}")
        bad_augs = set(self.augmentations) - set(AUGMENTATIONS)
        if bad_augs:
            issues.append(f"unknown augmentations {sorted(bad_augs)} (choose from {AUGMENTATIONS})")
        if self.max_rounds is not None and not 0 <= self.max_rounds <= MAX_ROUNDS_CAP:
            issues.append(f"max_rounds must be in [0, {MAX_ROUNDS_CAP}]")
        if self.caption_k < 1:
            issues.append("caption_k must be >= 1")
        if self.rerank_k < 1:
            issues.append("rerank_k must be >= 1")
        if self.answer_deadline_s <= 0:
            issues.append("answer_deadline_s must be positive")
        return issues

    def validate(self) -> None:
        issues = self.problems()
        if issues:
            raise ValueError("; ".join(issues))

    def to_json(self) -> dict:
        return {
            "generator": self.generator,
            "composer": self.composer,
            "max_rounds": self.effective_max_rounds,
            "rerank": self.rerank,
            "rerank_k": self.rerank_k,
            "caption_k": self.caption_k,
            "augmentations": sorted(self.augmentations),
            "answer_provider": self.answer_provider,
            "fragment_style": self.fragment_style,
            "answer_deadline_s": self.answer_deadline_s,
        }

    @staticmethod
    def from_json(data: dict) -> "SessionConfig":
        return SessionConfig(
            generator=data.get("generator", "heuristic"),
            composer=data.get("composer", "concat_sep"),
            max_rounds=data.get("max_rounds"),
            rerank=data.get("rerank", True),
            rerank_k=data.get("rerank_k", 128),
            caption_k=data.get("caption_k", 5),
            augmentations=frozenset(data.get("augmentations", ())),
            answer_provider=data.get("answer_provider", "scripted"),
            fragment_style=data.get("fragment_style", "question_plus_answer"),
            answer_deadline_s=data.get("answer_deadline_s", 30.0),
        )


@dataclass(frozen=True)
class SessionRecord:
    config: SessionConfig
    query: QueryState
    rounds: tuple[DialogueRound, ...] = ()
    trajectory: tuple[int, ...] = ()  # per-round rank of target, simulation mode
    target: str | None = None

    def to_json(self) -> dict:
        return {
            "schema": SESSION_SCHEMA,
            "config": self.config.to_json(),
            "target": self.target,
            "initial_query": self.query.initial_query,
            "fragments": list(self.query.fragments),
            "composed": self.query.composed,
            "rounds": [r.to_json() for r in self.rounds],
            "trajectory": list(self.trajectory),
        }

    def serialize(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    @staticmethod
    def from_json(data: dict) -> "SessionRecord":
        if data.get("schema") != SESSION_SCHEMA:
            raise ValueError(f"unsupported session schema {data.get('schema')!r}")
        return SessionRecord(
            config=SessionConfig.from_json(data["config"]),
            query=QueryState(data["initial_query"], tuple(data["fragments"])),
            rounds=tuple(DialogueRound.from_json(r) for r in data["rounds"]),
            trajectory=tuple(data["trajectory"]),
            target=data.get("target"),
        )


class QuestionGenerator(Protocol):
    tag: str

    def peek(self, session: "Session") -> Question | None: ...

    def advance(self, question: Question, answer: str) -> None: ...


def compose_fragment(question: Question, answer: str) -> str:
    """Question text (verbatim, '?' kept) + single space + trimmed answer."""
    trimmed = answer.strip()
    if not trimmed:
        raise ValueError("cannot compose a fragment from an empty answer")
    return f"{question.text} {trimmed}"


def compose_query(state: QueryState, strategy: str):
    """Ranking input for a composition strategy.

    concat_sep yields the single [SEP]-joined string; the aggregation
    strategies yield the individual pieces, scored separately downstream.
    """
    if strategy == "concat_sep":
        return state.composed
    if strategy in ("similarity_aggregation", "rank_aggregation"):
        return state.pieces
    raise ValueError(f"unknown composition strategy {strategy!r}")


def human_dialog_query(initial_query: str, answers: list[str]) -> str:
    """Human-dialog baseline: concatenate the answers only with the query
    (for corpora that ship pre-recorded dialog rounds)."""
    return SEPARATOR.join([initial_query, *[a.strip() for a in answers if a.strip()]])


def rank_for_state(state: QueryState, config: SessionConfig, index: EmbeddingMatrix,
                   gateway: "ModelGateway") -> RankedList:
    """Rank the gallery for the current query state under the configured strategy."""
    strategy = config.composer
    if strategy == "concat_sep":
        ranked = rank_cosine(gateway.embed_text(state.composed), index)
    else:
        pieces = state.pieces
        piece_vecs = np.stack([gateway.embed_text(p) for p in pieces])
        scores = piece_vecs @ index.whole_matrix.T.astype(np.float64)  # pieces x N
        mean_scores = scores.mean(axis=0)
        ids = index.whole_ids
        if strategy == "similarity_aggregation":
            order = order_desc(mean_scores, index.id_rank)
        else:  # rank_aggregation: mean of per-piece ranks, ascending wins
            n = len(ids)
            ranks = np.empty((len(pieces), n), dtype=np.float64)
            for p in range(len(pieces)):
                perm = order_desc(scores[p], index.id_rank)
                ranks[p, perm] = np.arange(1, n + 1)
            mean_ranks = ranks.mean(axis=0)
            order = np.lexsort((index.id_rank, mean_ranks))
        entries = tuple(RankEntry(ids[i], float(mean_scores[i])) for i in order)
        ranked = RankedList(entries, stage="cosine_only")
    if config.rerank and len(ranked) > 0:
        k = min(config.rerank_k, len(ranked))
        ranked = rerank_itm(ranked, state.composed, k, gateway)
    return ranked


class Session:
    """A single interactive retrieval session (single-writer)."""

    def __init__(self, record: SessionRecord, ranked: RankedList, *,
                 index: EmbeddingMatrix, gateway: "ModelGateway",
                 generator: QuestionGenerator, answer_fn: AnswerFn,
                 session_id: str | None = None):
        self.record = record
        self.ranked = ranked
        self.index = index
        self.gateway = gateway
        self.generator = generator
        self.answer_fn = answer_fn
        self.session_id = session_id

    @property
    def config(self) -> SessionConfig:
        return self.record.config

    @property
    def rounds_completed(self) -> int:
        return len(self.record.rounds)

    def peek_question(self) -> Question:
        """Next question without committing anything.

        Raises GeneratorExhausted when the round budget or the generator is
        spent - a natural stop, not a failure.
        """
        if self.rounds_completed >= self.config.effective_max_rounds:
            raise GeneratorExhausted(
                f"max_rounds={self.config.effective_max_rounds} reached")
        question = self.generator.peek(self)
        if question is None:
            raise GeneratorExhausted("question generator has nothing left to ask")
        return question

    def complete_round(self, question: Question, answer: str, latency_s: float,
                       provider_tag: str) -> DialogueRound:
        """Commit one round: compose the fragment, re-rank, append the log.

        Everything that can fail (composition, embedding, provider calls in
        the rerank) runs before any state is swapped in, so failures leave
        the session untouched.
        """
        if self.config.fragment_style == "answer_only":
            fragment = answer.strip()
            if not fragment:
                raise ValueError("cannot compose a fragment from an empty answer")
        else:
            fragment = compose_fragment(question, answer)
        new_state = self.record.query.with_fragment(fragment)
        ranked = rank_for_state(new_state, self.config, self.index, self.gateway)
        round_ = DialogueRound(
            round_index=self.rounds_completed + 1,
            question=question,
            answer=answer.strip(),
            generator=self.config.generator,
            answer_provider=provider_tag,
            answer_latency_s=latency_s,
        )
        trajectory = self.record.trajectory
        if self.record.target is not None:
            trajectory = trajectory + (rank_of(ranked, self.record.target).rank,)
        self.record = replace(
            self.record, query=new_state, rounds=self.record.rounds + (round_,),
            trajectory=trajectory)
        self.ranked = ranked
        self.generator.advance(question, round_.answer)
        return round_

    def step(self) -> DialogueRound:
        """Run one full round with the configured answer provider."""
        question = self.peek_question()
        request = AnswerRequest(
            question=question, video_id=self.record.target,
            session_id=self.session_id, deadline_s=self.config.answer_deadline_s)
        result = self.answer_fn(request)
        return self.complete_round(question, result.answer, result.latency_s,
                                   result.provider)

    def run(self) -> SessionRecord:
        """Step until the generator or the round budget is exhausted."""
        while True:
            try:
                self.step()
            except GeneratorExhausted:
                return self.record


def make_generator(config: SessionConfig, gateway: "ModelGateway", *,
                   lexicon=None, caption_cache: dict | None = None) -> QuestionGenerator:
    from .heuristic import HeuristicGenerator
    from .parametric import AutoTextGenerator, AutoTextVidGenerator

    if config.generator == "heuristic":
        return HeuristicGenerator(lexicon, config.augmentations)
    if config.generator == "auto_text":
        return AutoTextGenerator(gateway, config)
    if config.generator == "auto_text_vid":
        return AutoTextVidGenerator(gateway, config, caption_cache=caption_cache)
    raise ValueError(f"unknown generator {config.generator!r}")


def start_session(initial_query: str, config: SessionConfig, *,
                  manifest: CorpusManifest, index: EmbeddingMatrix,
                  gateway: "ModelGateway", target: str | None = None,
                  generator: QuestionGenerator | None = None,
                  answer_fn: AnswerFn | None = None,
                  session_id: str | None = None,
                  lexicon=None, caption_cache: dict | None = None,
                  relay=None) -> Session:
    """Validate the config against corpus capabilities and rank round 0."""
    if not initial_query or not initial_query.strip():
        raise ValueError("initial query must be non-empty")
    config.validate()
    if "AS" in config.augmentations and not manifest.has_halves:
        raise CapabilityError(
            "Ask Segment requires half-segment embeddings, which this corpus lacks")
    if target is not None and target not in manifest.video_ids:
        raise ValueError(f"simulation target {target!r} is not in the corpus")

    state = QueryState(initial_query.strip())
    ranked = rank_for_state(state, config, index, gateway)
    trajectory = (rank_of(ranked, target).rank,) if target is not None else ()
    record = SessionRecord(config=config, query=state, trajectory=trajectory, target=target)
    generator = generator or make_generator(
        config, gateway, lexicon=lexicon, caption_cache=caption_cache)
    answer_fn = answer_fn or make_answer_provider(
        config.answer_provider, gateway=gateway, truths=manifest.truths(), relay=relay)
    return Session(record, ranked, index=index, gateway=gateway,
                   generator=generator, answer_fn=answer_fn, session_id=session_id)


@dataclass(frozen=True)
class ReplayResult:
    composed_queries: tuple[str, ...]  # per round, starting at round 0
    trajectory: tuple[int, ...]

    def matches(self, record: SessionRecord) -> bool:
        return (self.composed_queries[-1] == record.query.composed
                and self.trajectory == record.trajectory)


def replay_session(record: SessionRecord, index: EmbeddingMatrix,
                   gateway: "ModelGateway") -> ReplayResult:
    """Recompute composed queries and rankings from the session log alone.

    The record's questions and answers are replayed through the same
    composition and ranking path; with a deterministic provider the result
    must match the live session byte for byte.
    """
    config = record.config
    state = QueryState(record.query.initial_query)
    composed = [state.composed]
    trajectory: list[int] = []
    ranked = rank_for_state(state, config, index, gateway)
    if record.target is not None:
        trajectory.append(rank_of(ranked, record.target).rank)
    for round_ in record.rounds:
        if config.fragment_style == "answer_only":
            fragment = round_.answer.strip()
        else:
            fragment = compose_fragment(round_.question, round_.answer)
        state = state.with_fragment(fragment)
        ranked = rank_for_state(state, config, index, gateway)
        composed.append(state.composed)
        if record.target is not None:
            trajectory.append(rank_of(ranked, record.target).rank)
    return ReplayResult(tuple(composed), tuple(trajectory))
