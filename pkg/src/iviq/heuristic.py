"""Rule-based question planning from objects found in the query.

Living objects get an action and a scene question, non-living ones a scene
question only. When the query names no known object, a fallback question asks
the user to identify one and follow-ups are planned from the answer. At most
six questions are ever asked in one session.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

from .errors import SessionStateError
from .session import Question
from .text import tokenize

MAX_QUESTIONS = 6

ACTION_TEMPLATE = "what is the {obj} doing?"
SCENE_TEMPLATE = "where is the {obj}?"
FALLBACK_QUESTION = "what object is in the video?"
INVENTORY_QUESTION = "what other objects are in the video?"

HALF_PREFIXES = {
    "first_half": "in the first half of the video, ",
    "second_half": "in the second half of the video, ",
}


@dataclass(frozen=True)
class ObjectLexicon:
    """Noun lists for pattern-matched object extraction."""

    living: frozenset[str]
    nonliving: frozenset[str]
    stopwords: frozenset[str] = frozenset()

    def __post_init__(self):
        overlap = self.living & self.nonliving
        if overlap:
            raise ValueError(f"tokens in both living and nonliving: {sorted(overlap)[:5]}")
        for token in self.living | self.nonliving | self.stopwords:
            if not token or token != token.lower() or " " in token:
                raise ValueError(f"lexicon tokens must be lowercase single words: {token!r}")

    @staticmethod
    def from_text(text: str) -> "ObjectLexicon":
        sections: dict[str, set[str]] = {"living": set(), "nonliving": set(), "stopwords": set()}
        current: str | None = None
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if line.startswith("[") and line.endswith("]"):
                current = line[1:-1]
                if current not in sections:
                    raise ValueError(f"unknown lexicon section {line!r}")
                continue
            if current is None:
                raise ValueError(f"token {line!r} before any section header")
            sections[current].add(line)
        return ObjectLexicon(
            frozenset(sections["living"]),
            frozenset(sections["nonliving"]),
            frozenset(sections["stopwords"]),
        )

    @staticmethod
    def from_file(path: str | Path) -> "ObjectLexicon":
        return ObjectLexicon.from_text(Path(path).read_text("utf-8"))

    @staticmethod
    def default() -> "ObjectLexicon":
        text = resources.files("iviq").joinpath("data/lexicon.txt").read_text("utf-8")
        return ObjectLexicon.from_text(text)


def extract_objects(query: str, lexicon: ObjectLexicon) -> list[tuple[str, bool]]:
    """Lexicon nouns in the query, first-occurrence order, deduplicated.

    Returns (token, is_living) pairs; stopwords never match.
    """
    found: list[tuple[str, bool]] = []
    seen: set[str] = set()
    for token in tokenize(query):
        if token in seen or token in lexicon.stopwords:
            continue
        if token in lexicon.living:
            found.append((token, True))
            seen.add(token)
        elif token in lexicon.nonliving:
            found.append((token, False))
            seen.add(token)
    return found


def _object_questions(token: str, living: bool) -> list[Question]:
    # action before scene: actions discriminate hardest
    questions = []
    if living:
        questions.append(Question(ACTION_TEMPLATE.format(obj=token), "action"))
    questions.append(Question(SCENE_TEMPLATE.format(obj=token), "scene"))
    return questions


def _expand_segments(questions: list[Question], augmentations: frozenset[str]) -> list[Question]:
    if "AS" not in augmentations:
        return questions
    expanded = []
    for q in questions:
        for segment, prefix in HALF_PREFIXES.items():
            expanded.append(Question(prefix + q.text, q.kind, segment))
    return expanded


@dataclass(frozen=True)
class QuestionPlan:
    pending: tuple[Question, ...]
    emitted: int = 0
    awaiting_object: bool = False
    last_emitted: Question | None = None
    asked_keys: frozenset[tuple[str, str]] = frozenset()
    asked_objects: frozenset[str] = frozenset()
    augmentations: frozenset[str] = frozenset()
    max_questions: int = MAX_QUESTIONS

    def peek(self) -> Question | None:
        return self.pending[0] if self.pending else None

    @property
    def exhausted(self) -> bool:
        return not self.pending

    def emit(self, question: Question) -> "QuestionPlan":
        if not self.pending or self.pending[0] != question:
            raise SessionStateError("emitted question is not the next planned one")
        return replace(
            self,
            pending=self.pending[1:],
            emitted=self.emitted + 1,
            last_emitted=question,
            asked_keys=self.asked_keys | {(question.text, question.segment)},
        )

    def _enqueue(self, questions: list[Question]) -> "QuestionPlan":
        budget = self.max_questions - self.emitted - len(self.pending)
        fresh = [q for q in questions if (q.text, q.segment) not in self.asked_keys]
        # drop duplicates within the batch while keeping order
        deduped: list[Question] = []
        keys = set(self.asked_keys) | {(q.text, q.segment) for q in self.pending}
        for q in fresh:
            if (q.text, q.segment) not in keys:
                deduped.append(q)
                keys.add((q.text, q.segment))
        return replace(self, pending=self.pending + tuple(deduped[:max(budget, 0)]))


def plan_initial(query: str, lexicon: ObjectLexicon,
                 augmentations: frozenset[str] = frozenset()) -> QuestionPlan:
    """Plan the opening questions for a query."""
    objects = extract_objects(query, lexicon)
    questions: list[Question] = []
    awaiting = False
    if objects:
        for token, living in objects:
            questions.extend(_object_questions(token, living))
    else:
        questions.append(Question(FALLBACK_QUESTION, "object_identify"))
        awaiting = True
    if "AO" in augmentations:
        questions.append(Question(INVENTORY_QUESTION, "object_inventory"))
    questions = _expand_segments(questions, augmentations)
    plan = QuestionPlan(
        pending=(),
        awaiting_object=awaiting,
        asked_objects=frozenset(token for token, _ in objects),
        augmentations=augmentations,
    )
    return plan._enqueue(questions)


def on_answer(plan: QuestionPlan, question: Question, answer: str,
              lexicon: ObjectLexicon) -> QuestionPlan:
    """Fold an answer into the plan: follow up on newly named objects."""
    if plan.last_emitted != question:
        raise SessionStateError("answer is for a stale question, not the last emitted one")
    if question.kind not in ("object_identify", "object_inventory"):
        return plan
    new_objects = [
        (token, living)
        for token, living in extract_objects(answer, lexicon)
        if token not in plan.asked_objects
    ]
    follow_ups: list[Question] = []
    for token, living in new_objects:
        follow_ups.extend(_object_questions(token, living))
    follow_ups = _expand_segments(follow_ups, plan.augmentations)
    plan = replace(
        plan,
        awaiting_object=False,
        asked_objects=plan.asked_objects | {token for token, _ in new_objects},
    )
    return plan._enqueue(follow_ups)


class HeuristicGenerator:
    """Session-facing wrapper: lazily plans from the initial query."""

    tag = "heuristic"

    def __init__(self, lexicon: ObjectLexicon | None = None,
                 augmentations: frozenset[str] = frozenset()):
        self.lexicon = lexicon or ObjectLexicon.default()
        self.augmentations = augmentations
        self._plan: QuestionPlan | None = None

    def peek(self, session) -> Question | None:
        if self._plan is None:
            self._plan = plan_initial(
                session.record.query.initial_query, self.lexicon, self.augmentations)
        return self._plan.peek()

    def advance(self, question: Question, answer: str) -> None:
        if self._plan is None:
            raise SessionStateError("advance before any question was planned")
        self._plan = on_answer(self._plan.emit(question), question, answer, self.lexicon)
