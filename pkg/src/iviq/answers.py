"""Answer providers behind one contract: VideoQA, CAP+LM, scripted oracle, human relay.

Providers are interchangeable; swapping one for another changes no session
machinery. Latency is accounted per provider call: gateways with a virtual
per-call cost (the synthetic provider) yield deterministic latencies, real
transports are measured wall-clock.
"""

from __future__ import annotations

import re
import threading
import time
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable

from .corpus import SLOTS, AttributeTruth
from .errors import DeadlineExceededError, ProviderError, SessionStateError

if TYPE_CHECKING:
    from .gateway import ModelGateway
    from .session import Question

CAP_LM_PROMPT = ("Answer the question based on the description. "
                 "Description: {caption} Question: {question}")

_HALF_PREFIXES = (
    "in the first half of the video, ",
    "in the second half of the video, ",
)

_SLOT_QUESTION_RE = re.compile(r"what is the (\w+) in the video")


@dataclass(frozen=True)
class AnswerRequest:
    question: "Question"
    video_id: str | None = None  # simulation mode
    session_id: str | None = None  # human relay mode
    deadline_s: float = 30.0

    def __post_init__(self):
        if self.deadline_s <= 0:
            raise ValueError("deadline must be positive")


@dataclass(frozen=True)
class AnswerResult:
    answer: str
    latency_s: float
    provider: str

    def __post_init__(self):
        if not self.answer:
            raise ValueError("answer must be non-empty")
        if self.latency_s < 0:
            raise ValueError("latency must be >= 0")


AnswerFn = Callable[[AnswerRequest], AnswerResult]


def classify_question(text: str) -> tuple[str, str | None]:
    """Map free question text to (kind, slot).

    The wire protocol carries question text only, so both the synthetic VQA
    and the scripted oracle resolve kinds from the surface form. Slot-template
    questions ("what is the color in the video?") resolve to their slot.
    """
    lowered = text.strip().lower()
    for prefix in _HALF_PREFIXES:
        if lowered.startswith(prefix):
            lowered = lowered[len(prefix):]
            break
    if "what other objects" in lowered:
        return "object_inventory", None
    if "what object is in the video" in lowered:
        return "object_identify", None
    match = _SLOT_QUESTION_RE.search(lowered)
    if match and match.group(1) in SLOTS:
        return "slot", match.group(1)
    if "doing" in lowered:
        return "action", None
    if lowered.startswith("where"):
        return "scene", None
    return "open", None


def oracle_answer_parts(truth: AttributeTruth, segment: str, kind: str,
                        slot: str | None = None) -> tuple[str, list[str], str]:
    """(prefix, tokens, joiner) of the ground-truth answer for a question kind.

    Kept separate from formatting so the synthetic provider can inject token
    noise before joining.
    """
    if kind == "action":
        return "", list(truth.slot(segment, "action")), " and "
    if kind == "scene":
        return "", list(truth.slot(segment, "scene")), " and "
    if kind == "object_identify":
        objects = truth.slot(segment, "object")
        return ("a ", [objects[0]], " ") if objects else ("", [], " ")
    if kind == "object_inventory":
        objects = truth.slot(segment, "object")
        rest = list(objects[1:]) + list(truth.slot(segment, "extra_objects"))
        return "", rest, ", "
    if kind == "slot" and slot is not None:
        return "", list(truth.slot(segment, slot)), " and "
    # open: every slot token of the addressed segment
    return "", list(truth.tokens(segment)), " "


def format_answer(prefix: str, tokens: list[str], joiner: str) -> str:
    if not tokens:
        return "nothing"
    return prefix + joiner.join(tokens)


def _run_timed(gateway: "ModelGateway", n_calls: int, fn: Callable[[], str],
               provider: str, deadline_s: float) -> tuple[str, float]:
    virtual = getattr(gateway, "virtual_latency_per_call", None)
    if virtual is not None:
        value = fn()
        latency = n_calls * virtual
    else:
        t0 = time.perf_counter()
        value = fn()
        latency = time.perf_counter() - t0
    if latency > deadline_s:
        raise DeadlineExceededError(
            f"{provider} answer took {latency:.3f}s, deadline {deadline_s:.3f}s")
    return value, latency


def answer_videoqa(req: AnswerRequest, gateway: "ModelGateway") -> AnswerResult:
    """Direct VideoQA on the target video."""
    if req.video_id is None:
        raise ProviderError("videoqa provider needs a target video")
    question = req.question

    def call() -> str:
        try:
            return gateway.vqa(req.video_id, question.text, question.segment)
        except ProviderError:
            raise
        except Exception as exc:
            raise ProviderError(f"vqa failed: {exc}", endpoint="/v1/vqa",
                                video_id=req.video_id) from exc

    raw, latency = _run_timed(gateway, 1, call, "videoqa", req.deadline_s)
    answer = raw.strip().lower()
    if not answer:
        raise ProviderError("vqa returned an empty answer", endpoint="/v1/vqa",
                            video_id=req.video_id)
    return AnswerResult(answer, latency, "videoqa")


def answer_cap_lm(req: AnswerRequest, gateway: "ModelGateway") -> AnswerResult:
    """Caption the target, then answer from the caption text (two calls).

    The second hop is why this provider is the slow one in timing studies,
    and why its answers can miss details the caption skipped.
    """
    if req.video_id is None:
        raise ProviderError("cap_lm provider needs a target video")

    def call() -> str:
        try:
            caption = gateway.caption(req.video_id)
        except ProviderError:
            raise
        except Exception as exc:
            raise ProviderError(f"caption failed: {exc}", endpoint="/v1/caption",
                                video_id=req.video_id) from exc
        prompt = CAP_LM_PROMPT.format(caption=caption, question=req.question.text)
        try:
            return gateway.lm_generate(prompt)
        except ProviderError:
            raise
        except Exception as exc:
            raise ProviderError(f"lm_generate failed: {exc}", endpoint="/v1/lm/generate",
                                video_id=req.video_id) from exc

    raw, latency = _run_timed(gateway, 2, call, "cap_lm", req.deadline_s)
    answer = raw.strip().lower()
    if not answer:
        raise ProviderError("cap+lm produced an empty answer",
                            endpoint="/v1/lm/generate", video_id=req.video_id)
    return AnswerResult(answer, latency, "cap_lm")


def answer_scripted(req: AnswerRequest, truth: AttributeTruth | None) -> AnswerResult:
    """Perfect oracle answering straight from ground-truth attributes."""
    if truth is None:
        raise ProviderError(f"no ground truth for video {req.video_id!r}",
                            video_id=req.video_id)
    question = req.question
    kind, slot = question.kind, None
    if kind in ("open",):
        kind, slot = classify_question(question.text)
    prefix, tokens, joiner = oracle_answer_parts(truth, question.segment, kind, slot)
    answer = format_answer(prefix, tokens, joiner).strip().lower()
    return AnswerResult(answer, 0.0, "scripted")


class HumanRelay:
    """Bridges blocking answer requests to answers arriving over the service.

    One pending question per session; `submit` resolves the matching `ask`.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._pending: dict[str, dict] = {}

    def ask(self, session_id: str, question: "Question",
            deadline_s: float = 300.0) -> tuple[str, float]:
        slot = {"question": question, "event": threading.Event(), "answer": None,
                "detached": False}
        with self._lock:
            if session_id in self._pending:
                raise SessionStateError(
                    f"session {session_id!r} already has a pending question")
            self._pending[session_id] = slot
        t0 = time.perf_counter()
        resolved = slot["event"].wait(deadline_s)
        latency = time.perf_counter() - t0
        with self._lock:
            self._pending.pop(session_id, None)
        if slot["detached"]:
            raise ProviderError(f"session {session_id!r} detached")
        if not resolved:
            raise DeadlineExceededError(
                f"no human answer within {deadline_s:.0f}s for session {session_id!r}")
        return slot["answer"], latency

    def submit(self, session_id: str, answer: str) -> None:
        answer = answer.strip()
        if not answer:
            raise ValueError("empty answer rejected; re-prompt the user")
        with self._lock:
            slot = self._pending.get(session_id)
            if slot is None:
                raise SessionStateError(f"no pending question for session {session_id!r}")
            slot["answer"] = answer.lower()
            slot["event"].set()

    def detach(self, session_id: str) -> None:
        with self._lock:
            slot = self._pending.get(session_id)
            if slot is not None:
                slot["detached"] = True
                slot["event"].set()

    def pending_question(self, session_id: str) -> "Question | None":
        with self._lock:
            slot = self._pending.get(session_id)
            return slot["question"] if slot else None


def answer_human(req: AnswerRequest, relay: HumanRelay) -> AnswerResult:
    """Block until a human answer arrives through the service (or deadline)."""
    if req.session_id is None:
        raise ProviderError("human provider needs a session id")
    answer, latency = relay.ask(req.session_id, req.question, req.deadline_s)
    return AnswerResult(answer, latency, "human")


def make_answer_provider(tag: str, *, gateway: "ModelGateway | None" = None,
                         truths: dict[str, AttributeTruth] | None = None,
                         relay: HumanRelay | None = None) -> AnswerFn:
    """Bind an answer provider tag to its dependencies."""
    if tag == "videoqa":
        if gateway is None:
            raise ValueError("videoqa provider needs a gateway")
        return lambda req: answer_videoqa(req, gateway)
    if tag == "cap_lm":
        if gateway is None:
            raise ValueError("cap_lm provider needs a gateway")
        return lambda req: answer_cap_lm(req, gateway)
    if tag == "scripted":
        if truths is None:
            raise ValueError("scripted provider needs ground truths")
        return lambda req: answer_scripted(req, truths.get(req.video_id))
    if tag == "human":
        if relay is None:
            raise ValueError("human provider needs a relay")
        return lambda req: answer_human(req, relay)
    raise ValueError(f"unknown answer provider {tag!r}")
