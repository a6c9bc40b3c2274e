"""Model provider gateway: wire protocol plus the built-in synthetic provider.

The synthetic provider is a deterministic stand-in for the embedding, VQA,
captioning, ITM and language models. Every response is a pure function of
(seed, inputs): token vectors come from FNV-1a hashes feeding SplitMix64, so
responses are bit-exact across runs and platforms. Imperfect answering is
injectable through a seeded noise rate.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np

from .answers import classify_question, format_answer, oracle_answer_parts
from .corpus import SLOTS, AttributeTruth, CorpusManifest
from .errors import DimensionMismatchError, ProviderError
from .hashing import derive_rng_seed, fnv1a64, splitmix64, splitmix64_array, uniform01
from .text import tokenize

LM_SLOT_POOL = ("object", "action", "scene", "color", "material")
CAPTION_VISIBLE_SLOTS = ("object", "action", "scene")
LM_SLOT_QUESTION = "what is the {slot} in the video?"

_CAP_LM_ANSWER_MARK = "Answer the question based on the description."
_AUTO_TEXT_VID_MARK = "suppose you are given the following video descriptions:"


@runtime_checkable
class ModelGateway(Protocol):
    def embed_text(self, text: str) -> np.ndarray: ...

    def embed_video(self, video_id: str, segment: str = "whole") -> np.ndarray: ...

    def caption(self, video_id: str) -> str: ...

    def vqa(self, video_id: str, question: str, segment: str = "whole") -> str: ...

    def itm(self, video_id: str, text: str) -> float: ...

    def lm_generate(self, prompt: str, max_tokens: int = 32) -> str: ...


@dataclass(frozen=True)
class ProviderDescriptor:
    kind: str  # synthetic | remote
    dimension: int
    base_url: str = ""
    timeout_s: float = 30.0
    max_concurrency: int = 4
    seed: int = 0
    noise_rate: float = 0.0
    call_delay_s: float = 0.0
    retry_backoff_s: float = 0.05

    def __post_init__(self):
        if self.kind not in ("synthetic", "remote"):
            raise ValueError(f"unknown provider kind {self.kind!r}")
        if self.dimension < 8:
            raise ValueError("embedding dimension must be >= 8")
        if self.timeout_s <= 0:
            raise ValueError("timeout must be positive")
        if self.kind == "remote" and not self.base_url:
            raise ValueError("remote provider needs a base_url")

    @staticmethod
    def from_manifest(manifest: CorpusManifest, **overrides) -> "ProviderDescriptor":
        cfg = dict(manifest.provider)
        kind = cfg.pop("kind")
        cfg.setdefault("dimension", manifest.dimension)
        cfg.update({k: v for k, v in overrides.items() if v is not None})
        try:
            return ProviderDescriptor(kind=kind, **cfg)
        except TypeError as exc:
            raise ValueError(f"bad provider descriptor in manifest: {exc}") from exc


def token_unit_vector(token: str, seed: int, dimension: int) -> np.ndarray:
    """Deterministic unit vector for a token.

    Components are uniform in [-1, 1) from SplitMix64 seeded with
    fnv1a64(token) XOR seed, then L2-normalized. Only +,*,/,sqrt are used,
    so results are identical wherever IEEE-754 holds.
    """
    stream_seed = fnv1a64(token) ^ (seed & ((1 << 64) - 1))
    words = splitmix64_array(stream_seed, dimension)
    vec = uniform01(words) * 2.0 - 1.0
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:  # an all-zero draw cannot happen for dimension >= 8
        return null_vector(dimension)
    return vec / norm


def null_vector(dimension: int) -> np.ndarray:
    """Fixed unit vector for token-free text (first basis vector)."""
    vec = np.zeros(dimension, dtype=np.float64)
    vec[0] = 1.0
    return vec


class SyntheticProvider:
    """Deterministic model provider over ground-truth video attributes."""

    def __init__(self, truths: dict[str, AttributeTruth], *, seed: int,
                 dimension: int = 256, noise_rate: float = 0.0,
                 call_delay_s: float = 0.0):
        if dimension < 8:
            raise ValueError("dimension must be >= 8")
        if not 0.0 <= noise_rate <= 1.0:
            raise ValueError("noise rate must be in [0, 1]")
        self.truths = truths
        self.seed = seed
        self.dimension = dimension
        self.noise_rate = noise_rate
        self.call_delay_s = call_delay_s
        self._token_vectors: dict[str, np.ndarray] = {}
        self._distractors = self._build_distractor_pools()

    @staticmethod
    def from_manifest(manifest: CorpusManifest, *, seed: int | None = None,
                      noise_rate: float | None = None,
                      call_delay_s: float | None = None) -> "SyntheticProvider":
        cfg = manifest.provider
        if cfg.get("kind") != "synthetic":
            raise ValueError("manifest provider is not synthetic")
        truths = manifest.truths()
        missing = [v.video_id for v in manifest.videos if v.truth is None]
        if missing:
            raise ProviderError(
                f"synthetic provider needs truth for every video; missing for {missing[:3]}")
        return SyntheticProvider(
            truths,
            seed=seed if seed is not None else int(cfg.get("seed", 0)),
            dimension=manifest.dimension,
            noise_rate=noise_rate if noise_rate is not None else float(cfg.get("noise_rate", 0.0)),
            call_delay_s=call_delay_s if call_delay_s is not None else float(cfg.get("call_delay_s", 0.0)),
        )

    # -- infrastructure -----------------------------------------------------

    @property
    def virtual_latency_per_call(self) -> float:
        """Deterministic per-call cost; keeps reports byte-reproducible."""
        return self.call_delay_s

    def _truth(self, video_id: str) -> AttributeTruth:
        truth = self.truths.get(video_id)
        if truth is None:
            raise ProviderError(f"unknown video {video_id!r}", video_id=video_id)
        return truth

    def _segment_truth(self, video_id: str, segment: str) -> AttributeTruth:
        truth = self._truth(video_id)
        if segment not in truth.slots:
            raise ProviderError(
                f"video {video_id!r} has no {segment!r} segment", video_id=video_id)
        return truth

    def _token_vector(self, token: str) -> np.ndarray:
        vec = self._token_vectors.get(token)
        if vec is None:
            vec = token_unit_vector(token, self.seed, self.dimension)
            self._token_vectors[token] = vec
        return vec

    def _embed_tokens(self, tokens: list[str] | tuple[str, ...]) -> np.ndarray:
        if not tokens:
            return null_vector(self.dimension)
        total = np.zeros(self.dimension, dtype=np.float64)
        for token in tokens:
            total += self._token_vector(token)
        norm = float(np.linalg.norm(total))
        if norm == 0.0:
            return null_vector(self.dimension)
        return total / norm

    def _build_distractor_pools(self) -> dict[str, tuple[str, ...]]:
        pools: dict[str, set[str]] = {slot: set() for slot in SLOTS}
        for truth in self.truths.values():
            for slot in SLOTS:
                pools[slot].update(truth.slot("whole", slot))
        out = {slot: tuple(sorted(tokens)) for slot, tokens in pools.items()}
        out["_objects"] = tuple(sorted(set(out["object"]) | set(out["extra_objects"])))
        out["_all"] = tuple(sorted({t for pool in pools.values() for t in pool}))
        return out

    # -- the five model roles ------------------------------------------------

    def embed_text(self, text: str) -> np.ndarray:
        """Bag-of-tokens embedding: stopwords and [SEP] markers dropped,
        token vectors summed with multiplicity, L2-normalized."""
        return self._embed_tokens(tokenize(text, drop_stopwords=True))

    def embed_video(self, video_id: str, segment: str = "whole") -> np.ndarray:
        truth = self._segment_truth(video_id, segment)
        tokens = truth.tokens(segment)
        if not tokens:
            raise ProviderError(f"video {video_id!r} has no truth tokens", video_id=video_id)
        return self._embed_tokens(tokens)

    def caption(self, video_id: str) -> str:
        truth = self._truth(video_id)
        parts = [truth.slot("whole", slot) for slot in CAPTION_VISIBLE_SLOTS]
        if not all(parts):
            raise ProviderError(
                f"video {video_id!r} lacks object/action/scene for captioning",
                video_id=video_id)
        obj, action, scene = (p[0] for p in parts)
        return f"a {obj} {action} in the {scene}"

    def itm(self, video_id: str, text: str) -> float:
        """Jaccard overlap of text tokens and whole-segment truth tokens."""
        truth = self._truth(video_id)
        text_tokens = set(tokenize(text, drop_stopwords=True))
        video_tokens = set(truth.tokens("whole"))
        union = text_tokens | video_tokens
        if not union:
            return 0.0
        return len(text_tokens & video_tokens) / len(union)

    def vqa(self, video_id: str, question: str, segment: str = "whole") -> str:
        truth = self._segment_truth(video_id, segment)
        kind, slot = classify_question(question)
        prefix, tokens, joiner = oracle_answer_parts(truth, segment, kind, slot)
        tokens = self._apply_noise(tokens, kind, slot, video_id, question, segment)
        return format_answer(prefix, tokens, joiner)

    def lm_generate(self, prompt: str, max_tokens: int = 32) -> str:
        if not prompt:
            raise ProviderError("empty prompt", endpoint="/v1/lm/generate")
        if prompt.startswith(_CAP_LM_ANSWER_MARK):
            text = self._answer_from_caption(prompt)
        else:
            text = self._choose_question(prompt)
        return " ".join(text.split()[:max_tokens])

    # -- synthetic LM rules ---------------------------------------------------

    def _choose_question(self, prompt: str) -> str:
        """Pick an unasked attribute slot and ask about it.

        Asked slots are recognized by their literal template question inside
        the prompt (the composed query carries past Q/A fragments). Prompts
        that include candidate captions restrict slots to what a caption can
        surface; once everything was asked, the chooser cycles.
        """
        pool = (CAPTION_VISIBLE_SLOTS
                if _AUTO_TEXT_VID_MARK in prompt.lower() else LM_SLOT_POOL)
        lowered = prompt.lower()
        candidates = [s for s in pool
                      if LM_SLOT_QUESTION.format(slot=s) not in lowered]
        if not candidates:
            candidates = list(pool)
        slot = candidates[fnv1a64(prompt) % len(candidates)]
        return LM_SLOT_QUESTION.format(slot=slot)

    def _answer_from_caption(self, prompt: str) -> str:
        """CAP+LM simulation: answer using only what the caption text says.

        The caption template surfaces object/action/scene positionally; any
        other slot is unknowable from the caption and answers "nothing".
        """
        try:
            after = prompt.split("Description: ", 1)[1]
            caption, question = after.rsplit(" Question: ", 1)
        except (IndexError, ValueError):
            raise ProviderError("unrecognized answer prompt", endpoint="/v1/lm/generate")
        content = tokenize(caption, drop_stopwords=True)
        kind, slot = classify_question(question)
        if kind == "slot":
            kind = {"object": "object_identify", "action": "action",
                    "scene": "scene"}.get(slot, "unknown")
        if kind == "action":
            return content[1] if len(content) > 1 else "nothing"
        if kind == "scene":
            return content[2] if len(content) > 2 else "nothing"
        if kind == "object_identify":
            return f"a {content[0]}" if content else "nothing"
        if kind == "object_inventory":
            return ", ".join(content[3:]) if len(content) > 3 else "nothing"
        if kind == "open":
            return " ".join(content) if content else "nothing"
        return "nothing"

    def _apply_noise(self, tokens: list[str], kind: str, slot: str | None,
                     video_id: str, question: str, segment: str) -> list[str]:
        """Swap one answer token for a same-slot distractor at the noise rate.

        The draw is keyed by (seed, video, question, segment), so replays and
        repeated runs see identical imperfection.
        """
        if self.noise_rate <= 0.0 or not tokens:
            return tokens
        words = splitmix64(
            derive_rng_seed(self.seed, "noise", video_id, question, segment), 3)
        if (words[0] >> 11) * 2.0**-53 >= self.noise_rate:
            return tokens
        pool_key = {"action": "action", "scene": "scene", "slot": slot,
                    "object_identify": "_objects", "object_inventory": "_objects"}.get(kind, "_all")
        pool = self._distractors.get(pool_key or "_all", ())
        idx = words[1] % len(tokens)
        candidates = [t for t in pool if t != tokens[idx]]
        if not candidates:
            return tokens
        swapped = list(tokens)
        swapped[idx] = candidates[words[2] % len(candidates)]
        return swapped


class RemoteGateway:
    """Blocking JSON-over-HTTP client for the five model endpoints.

    Transport failures and 5xx responses are retried (3 attempts, exponential
    backoff); 4xx and malformed bodies surface immediately.
    """

    MAX_ATTEMPTS = 3

    def __init__(self, descriptor: ProviderDescriptor, *, client=None):
        import httpx

        if descriptor.kind != "remote":
            raise ValueError("RemoteGateway needs a remote descriptor")
        self.descriptor = descriptor
        self._client = client or httpx.Client(
            base_url=descriptor.base_url, timeout=descriptor.timeout_s)

    def close(self) -> None:
        self._client.close()

    def _post(self, path: str, payload: dict, field: str):
        import httpx

        last_error: str = ""
        for attempt in range(1, self.MAX_ATTEMPTS + 1):
            try:
                resp = self._client.post(path, json=payload)
            except httpx.HTTPError as exc:
                last_error = f"transport error: {exc}"
            else:
                if resp.status_code < 400:
                    try:
                        body = resp.json()
                    except ValueError as exc:
                        raise ProviderError(
                            f"{path}: response is not JSON: {exc}", endpoint=path)
                    if field not in body:
                        raise ProviderError(
                            f"{path}: malformed response, missing {field!r}", endpoint=path)
                    return body[field]
                message = self._error_message(resp)
                if resp.status_code < 500:
                    raise ProviderError(
                        f"{path}: HTTP {resp.status_code}: {message}",
                        endpoint=path, attempts=attempt)
                last_error = f"HTTP {resp.status_code}: {message}"
            if attempt < self.MAX_ATTEMPTS:
                time.sleep(self.descriptor.retry_backoff_s * 2 ** (attempt - 1))
        raise ProviderError(f"{path}: {last_error} (after {self.MAX_ATTEMPTS} attempts)",
                            endpoint=path, attempts=self.MAX_ATTEMPTS)

    @staticmethod
    def _error_message(resp) -> str:
        try:
            return resp.json()["error"]["message"]
        except Exception:
            return resp.text[:200]

    def _vector(self, path: str, payload: dict) -> np.ndarray:
        vec = np.asarray(self._post(path, payload, "vector"), dtype=np.float64)
        if vec.shape != (self.descriptor.dimension,):
            raise DimensionMismatchError(
                f"{path} returned {vec.shape} vector, expected ({self.descriptor.dimension},)")
        return vec

    def embed_text(self, text: str) -> np.ndarray:
        return self._vector("/v1/embed/text", {"text": text})

    def embed_video(self, video_id: str, segment: str = "whole") -> np.ndarray:
        return self._vector("/v1/embed/video", {"video_id": video_id, "segment": segment})

    def caption(self, video_id: str) -> str:
        return str(self._post("/v1/caption", {"video_id": video_id}, "caption"))

    def vqa(self, video_id: str, question: str, segment: str = "whole") -> str:
        return str(self._post(
            "/v1/vqa", {"video_id": video_id, "question": question, "segment": segment},
            "answer"))

    def itm(self, video_id: str, text: str) -> float:
        return float(self._post("/v1/itm", {"video_id": video_id, "text": text}, "score"))

    def lm_generate(self, prompt: str, max_tokens: int = 32) -> str:
        return str(self._post(
            "/v1/lm/generate", {"prompt": prompt, "max_tokens": max_tokens}, "text"))


def make_gateway(manifest: CorpusManifest, *, seed: int | None = None,
                 noise_rate: float | None = None,
                 call_delay_s: float | None = None):
    """Gateway for a manifest's provider descriptor."""
    kind = manifest.provider.get("kind")
    if kind == "synthetic":
        return SyntheticProvider.from_manifest(
            manifest, seed=seed, noise_rate=noise_rate, call_delay_s=call_delay_s)
    if kind == "remote":
        return RemoteGateway(ProviderDescriptor.from_manifest(manifest))
    raise ValueError(f"unknown provider kind {kind!r}")
