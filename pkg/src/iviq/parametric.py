"""Language-model question generation: Auto-text and Auto-text-vid.

The two prompt templates are byte-frozen constants, including their
grammatical quirks; prompt fidelity outranks grammar here. Auto-text-vid
additionally conditions on captions of the current top-k ranked videos.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

from .errors import ProviderError
from .heuristic import HALF_PREFIXES, INVENTORY_QUESTION
from .ranking import RankedList
from .session import Question, SessionConfig

if TYPE_CHECKING:
    from .gateway import ModelGateway

AUTO_TEXT_TEMPLATE = (
    "Suppose you are given the following video descriptions {Q}, "
    "What question would you ask to help you unique identify the video?"
)

AUTO_TEXT_VID_TEMPLATE = (
    "Suppose you are given the following video descriptions: {C}. "
    "What question would you ask to help you unique identify the video "
    "described as follows: {Q}?"
)

CAPTION_JOIN = "; "


@dataclass(frozen=True)
class CaptionSet:
    round_index: int
    entries: tuple[tuple[str, str], ...]  # (video_id, caption), rank order

    def __post_init__(self):
        if not self.entries:
            raise ValueError("caption set must not be empty")
        if any(not caption for _, caption in self.entries):
            raise ValueError("captions must be non-empty")

    def joined(self) -> str:
        return CAPTION_JOIN.join(caption for _, caption in self.entries)


def render_auto_text(query: str) -> str:
    if not query or not query.strip():
        raise ValueError("cannot render a prompt from an empty query")
    return AUTO_TEXT_TEMPLATE.replace("{Q}", query)


def render_auto_text_vid(query: str, captions: CaptionSet) -> str:
    if not query or not query.strip():
        raise ValueError("cannot render a prompt from an empty query")
    return AUTO_TEXT_VID_TEMPLATE.replace("{C}", captions.joined()).replace("{Q}", query)


def gather_captions(ranked: RankedList, k: int, gateway: "ModelGateway", *,
                    cache: dict[str, str] | None = None,
                    round_index: int = 0) -> CaptionSet:
    """Captions of the first k ranked videos, in rank order.

    Captions are query-independent, so a per-experiment cache is sound.
    """
    if not 1 <= k <= len(ranked):
        raise ValueError(f"caption_k={k} out of range for corpus of {len(ranked)}")
    entries = []
    for entry in ranked.entries[:k]:
        vid = entry.video_id
        caption = cache.get(vid) if cache is not None else None
        if caption is None:
            try:
                caption = gateway.caption(vid)
            except ProviderError:
                raise
            except Exception as exc:
                raise ProviderError(f"caption failed for {vid!r}: {exc}",
                                    video_id=vid) from exc
            if cache is not None:
                cache[vid] = caption
        if not caption:
            raise ProviderError(f"empty caption for {vid!r}", video_id=vid)
        entries.append((vid, caption))
    return CaptionSet(round_index, tuple(entries))


def generate_question(prompt: str, gateway: "ModelGateway", *,
                      max_tokens: int = 32) -> Question:
    """One LM call, normalized to a well-formed open question."""
    if not prompt:
        raise ValueError("prompt must be non-empty")
    text = gateway.lm_generate(prompt, max_tokens).strip()
    if not text:
        raise ProviderError("language model produced an empty generation",
                            endpoint="/v1/lm/generate")
    if not text.endswith("?"):
        text += "?"
    return Question(text, "open", "whole")


class _ParametricGenerator:
    """Shared machinery for the two LM-backed generators.

    With AO active, the fixed object-inventory question is scheduled as
    round 1, before any LM round. With AS active, each generated question is
    asked once per half (two consecutive rounds).

    ``peek`` is side-effect free apart from caching: a failed round re-peeks
    the same question, so rollback leaves no trace.
    """

    tag = "parametric"

    def __init__(self, gateway: "ModelGateway", config: SessionConfig, *,
                 caption_cache: dict[str, str] | None = None):
        self.gateway = gateway
        self.config = config
        self.caption_cache = caption_cache if caption_cache is not None else {}
        self._pending: list[Question] = []
        self._peeked: tuple[tuple, list[Question]] | None = None
        self._ao_done = False

    def _render_prompt(self, session) -> str:
        raise NotImplementedError

    def peek(self, session) -> Question | None:
        if "AO" in self.config.augmentations and not self._ao_done:
            return Question(INVENTORY_QUESTION, "object_inventory")
        if self._pending:
            return self._pending[0]
        key = (session.rounds_completed, session.record.query.composed)
        if self._peeked is not None and self._peeked[0] == key:
            return self._peeked[1][0]
        prompt = self._render_prompt(session)
        base = generate_question(prompt, self.gateway)
        if "AS" in self.config.augmentations:
            batch = [
                Question(prefix + base.text, base.kind, segment)
                for segment, prefix in HALF_PREFIXES.items()
            ]
        else:
            batch = [base]
        self._peeked = (key, batch)
        return batch[0]

    def advance(self, question: Question, answer: str) -> None:
        if question.kind == "object_inventory":
            self._ao_done = True
            return
        if self._pending and self._pending[0] == question:
            self._pending.pop(0)
            return
        if self._peeked is not None and self._peeked[1][0] == question:
            self._pending = self._peeked[1][1:]
            self._peeked = None


class AutoTextGenerator(_ParametricGenerator):
    """Questions conditioned on the composed query only."""

    tag = "auto_text"

    def _render_prompt(self, session) -> str:
        return render_auto_text(session.record.query.composed)


class AutoTextVidGenerator(_ParametricGenerator):
    """Questions conditioned on the query and captions of the current top-k."""

    tag = "auto_text_vid"

    def _render_prompt(self, session) -> str:
        captions = gather_captions(
            session.ranked, min(self.config.caption_k, len(session.ranked)),
            self.gateway, cache=self.caption_cache,
            round_index=session.rounds_completed)
        return render_auto_text_vid(session.record.query.composed, captions)
