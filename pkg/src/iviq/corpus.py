"""Corpus ingestion and the on-disk embedding index.

Manifest: a single JSON document, ``schema: "iviq-manifest/1"``. Embeddings
live in a separate binary container (see :func:`save_index` for the layout).
"""

from __future__ import annotations

import json
import struct
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Mapping

import numpy as np

from .errors import ContainerError, DimensionMismatchError, ManifestError, ProviderError

if TYPE_CHECKING:
    from .gateway import ModelGateway

MANIFEST_SCHEMA = "iviq-manifest/1"

SEGMENTS = ("whole", "first_half", "second_half")
SLOTS = ("object", "action", "scene", "color", "material", "extra_objects")

_SEGMENT_CODE = {name: i for i, name in enumerate(SEGMENTS)}

_MAGIC = b"IVIQIDX\x01"


@dataclass(frozen=True)
class AttributeTruth:
    """Ground-truth attribute tokens per segment, used by the oracle answerer.

    ``slots`` maps segment -> slot -> token tuple. Tokens are lowercase,
    non-empty and whitespace-free.
    """

    slots: Mapping[str, Mapping[str, tuple[str, ...]]]

    def segment(self, segment: str) -> Mapping[str, tuple[str, ...]]:
        if segment not in self.slots:
            raise KeyError(f"segment {segment!r} not present in truth")
        return self.slots[segment]

    def slot(self, segment: str, slot: str) -> tuple[str, ...]:
        return self.segment(segment).get(slot, ())

    def tokens(self, segment: str = "whole") -> tuple[str, ...]:
        """All tokens of a segment in fixed slot order."""
        seg = self.segment(segment)
        out: list[str] = []
        for slot in SLOTS:
            out.extend(seg.get(slot, ()))
        return tuple(out)

    @staticmethod
    def from_json(data: Mapping) -> "AttributeTruth":
        slots = {
            seg: {slot: tuple(tokens) for slot, tokens in seg_slots.items()}
            for seg, seg_slots in data.items()
        }
        return AttributeTruth(slots)

    def to_json(self) -> dict:
        return {
            seg: {slot: list(tokens) for slot, tokens in seg_slots.items()}
            for seg, seg_slots in self.slots.items()
        }


@dataclass(frozen=True)
class VideoRecord:
    video_id: str
    media_uri: str = ""
    segments: tuple[str, ...] = ("whole",)
    truth: AttributeTruth | None = None


@dataclass(frozen=True)
class CorpusManifest:
    name: str
    provider: dict
    dimension: int
    videos: tuple[VideoRecord, ...]
    captions: tuple[tuple[str, str], ...]  # (video_id, initial query)
    has_halves: bool = False
    frame_sampling: str = ""

    @property
    def video_ids(self) -> tuple[str, ...]:
        return tuple(v.video_id for v in self.videos)

    def record(self, video_id: str) -> VideoRecord:
        for v in self.videos:
            if v.video_id == video_id:
                return v
        raise KeyError(video_id)

    def truths(self) -> dict[str, AttributeTruth]:
        return {v.video_id: v.truth for v in self.videos if v.truth is not None}

    def to_json(self) -> dict:
        return {
            "schema": MANIFEST_SCHEMA,
            "name": self.name,
            "provider": dict(self.provider),
            "dimension": self.dimension,
            "frame_sampling": self.frame_sampling,
            "segments": self.has_halves,
            "videos": [
                {
                    "video_id": v.video_id,
                    "media_uri": v.media_uri,
                    **({"truth": v.truth.to_json()} if v.truth is not None else {}),
                }
                for v in self.videos
            ],
            "captions": [{"video_id": vid, "text": text} for vid, text in self.captions],
        }


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ManifestError(message)


def _validate_truth(video_id: str, truth: AttributeTruth, has_halves: bool) -> None:
    allowed = set(SEGMENTS) if has_halves else {"whole"}
    _require("whole" in truth.slots, f"video {video_id!r}: truth lacks 'whole' segment")
    for seg, seg_slots in truth.slots.items():
        _require(seg in allowed, f"video {video_id!r}: segment {seg!r} not declared by manifest")
        for slot, tokens in seg_slots.items():
            _require(slot in SLOTS, f"video {video_id!r}: unknown slot {slot!r}")
            for tok in tokens:
                _require(
                    bool(tok) and tok == tok.lower() and not any(c.isspace() for c in tok),
                    f"video {video_id!r}: bad truth token {tok!r} (must be lowercase, non-empty, no whitespace)",
                )
    if has_halves and {"first_half", "second_half"} <= set(truth.slots):
        for slot in SLOTS:
            whole = set(truth.slot("whole", slot))
            union = set(truth.slot("first_half", slot)) | set(truth.slot("second_half", slot))
            _require(
                whole == union,
                f"video {video_id!r}: slot {slot!r} of 'whole' must equal the union of the halves",
            )


def parse_manifest(data: Mapping) -> CorpusManifest:
    """Validate a decoded manifest document and build a :class:`CorpusManifest`."""
    _require(isinstance(data, Mapping), "manifest root must be an object")
    _require(data.get("schema") == MANIFEST_SCHEMA,
             f"unsupported manifest schema {data.get('schema')!r} (expected {MANIFEST_SCHEMA!r})")
    dimension = data.get("dimension")
    _require(isinstance(dimension, int) and dimension >= 8, "dimension must be an integer >= 8")
    provider = data.get("provider") or {}
    _require(provider.get("kind") in ("synthetic", "remote"),
             "provider.kind must be 'synthetic' or 'remote'")
    has_halves = bool(data.get("segments", False))
    segs = SEGMENTS if has_halves else ("whole",)

    videos: list[VideoRecord] = []
    seen: set[str] = set()
    for entry in data.get("videos", ()):
        vid = entry.get("video_id")
        _require(isinstance(vid, str) and vid != "", "video_id must be a non-empty string")
        _require(vid not in seen, f"duplicate video_id {vid!r}")
        seen.add(vid)
        truth = None
        if "truth" in entry:
            truth = AttributeTruth.from_json(entry["truth"])
            _validate_truth(vid, truth, has_halves)
        videos.append(VideoRecord(vid, entry.get("media_uri", ""), segs, truth))
    _require(len(videos) > 0, "manifest declares no videos")

    captions: list[tuple[str, str]] = []
    for entry in data.get("captions", ()):
        vid, text = entry.get("video_id"), entry.get("text")
        _require(vid in seen, f"caption references unknown video_id {vid!r}")
        _require(isinstance(text, str) and text.strip() != "", f"caption for {vid!r} is empty")
        captions.append((vid, text))

    return CorpusManifest(
        name=str(data.get("name", "corpus")),
        provider=dict(provider),
        dimension=dimension,
        videos=tuple(videos),
        captions=tuple(captions),
        has_halves=has_halves,
        frame_sampling=str(data.get("frame_sampling", "")),
    )


def load_manifest(path: str | Path) -> CorpusManifest:
    path = Path(path)
    try:
        data = json.loads(path.read_text("utf-8"))
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest {path} is not valid JSON: {exc}") from exc
    return parse_manifest(data)


def save_manifest(manifest: CorpusManifest, path: str | Path) -> None:
    Path(path).write_text(json.dumps(manifest.to_json(), indent=2, sort_keys=True) + "\n", "utf-8")


class EmbeddingMatrix:
    """Immutable (video_id, segment) -> unit vector store, float32 rows.

    Safe for unlimited concurrent readers once built.
    """

    def __init__(self, dimension: int, keys: Iterable[tuple[str, str]], rows: np.ndarray):
        keys = tuple(keys)
        rows = np.ascontiguousarray(rows, dtype=np.float32)
        if rows.shape != (len(keys), dimension):
            raise DimensionMismatchError(
                f"rows shape {rows.shape} does not match {len(keys)} keys x dim {dimension}")
        self.dimension = dimension
        self.keys = keys
        self.rows = rows
        self.rows.setflags(write=False)
        self._index = {key: i for i, key in enumerate(keys)}
        self._whole_ids = tuple(vid for vid, seg in keys if seg == "whole")
        whole_rows = [i for i, (_, seg) in enumerate(keys) if seg == "whole"]
        self._whole = rows[whole_rows] if whole_rows else rows[:0]
        # lexicographic rank of each whole id, fixing the global tie order
        order = sorted(range(len(self._whole_ids)), key=lambda i: self._whole_ids[i])
        self._id_rank = np.empty(len(self._whole_ids), dtype=np.int64)
        for rank, i in enumerate(order):
            self._id_rank[i] = rank

    @property
    def whole_ids(self) -> tuple[str, ...]:
        return self._whole_ids

    @property
    def whole_matrix(self) -> np.ndarray:
        return self._whole

    @property
    def id_rank(self) -> np.ndarray:
        return self._id_rank

    def vector(self, video_id: str, segment: str = "whole") -> np.ndarray:
        try:
            return self.rows[self._index[(video_id, segment)]]
        except KeyError:
            raise KeyError(f"no embedding for ({video_id!r}, {segment!r})") from None

    def __len__(self) -> int:
        return len(self.keys)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, EmbeddingMatrix)
            and self.dimension == other.dimension
            and self.keys == other.keys
            and self.rows.tobytes() == other.rows.tobytes()
        )


def build_index(manifest: CorpusManifest, gateway: "ModelGateway", *,
                max_concurrency: int = 1) -> EmbeddingMatrix:
    """Embed every (video_id, segment) of the manifest into one matrix.

    Vectors are L2-normalized here, at ingestion time, so the ranking hot
    path is a plain dot product. Row order is canonical (manifest order x
    segment order), so the result is a pure function of manifest + provider.
    """
    keys = [(v.video_id, seg) for v in manifest.videos for seg in v.segments]

    def fetch(key: tuple[str, str]) -> np.ndarray:
        vid, seg = key
        try:
            vec = np.asarray(gateway.embed_video(vid, seg), dtype=np.float64)
        except ProviderError:
            raise
        except Exception as exc:
            raise ProviderError(f"embed_video failed for {vid!r}: {exc}", video_id=vid) from exc
        if vec.shape != (manifest.dimension,):
            raise DimensionMismatchError(
                f"provider returned {vec.shape[0] if vec.ndim == 1 else vec.shape}-dim vector "
                f"for {vid!r}/{seg}, corpus dimension is {manifest.dimension}")
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            raise ProviderError(f"zero-norm embedding for {vid!r}/{seg}", video_id=vid)
        return (vec / norm).astype(np.float32)

    if max_concurrency > 1:
        with ThreadPoolExecutor(max_workers=max_concurrency) as pool:
            vectors = list(pool.map(fetch, keys))
    else:
        vectors = [fetch(key) for key in keys]

    rows = np.stack(vectors) if vectors else np.zeros((0, manifest.dimension), np.float32)
    return EmbeddingMatrix(manifest.dimension, keys, rows)


def save_index(matrix: EmbeddingMatrix, path: str | Path) -> None:
    """Write the binary index container.

    Layout (all integers little-endian):
        magic     8 bytes  b"IVIQIDX\\x01"
        dimension u32
        row count u32
        id table  per row: u16 id length, UTF-8 id bytes, u8 segment code
                  (0=whole, 1=first_half, 2=second_half)
        rows      count x dimension float32
        checksum  u32 CRC32 of everything above
    """
    buf = bytearray()
    buf += _MAGIC
    buf += struct.pack("<II", matrix.dimension, len(matrix.keys))
    for vid, seg in matrix.keys:
        raw = vid.encode("utf-8")
        buf += struct.pack("<H", len(raw)) + raw + struct.pack("<B", _SEGMENT_CODE[seg])
    buf += matrix.rows.astype("<f4", copy=False).tobytes()
    buf += struct.pack("<I", zlib.crc32(bytes(buf)))
    Path(path).write_bytes(bytes(buf))


def load_index(path: str | Path) -> EmbeddingMatrix:
    raw = Path(path).read_bytes()
    if len(raw) < len(_MAGIC) + 12:
        raise ContainerError("index container truncated")
    if raw[: len(_MAGIC)] != _MAGIC:
        raise ContainerError("bad magic; not an index container")
    body, (checksum,) = raw[:-4], struct.unpack("<I", raw[-4:])
    if zlib.crc32(body) != checksum:
        raise ContainerError("checksum mismatch; container corrupt")
    try:
        dimension, count = struct.unpack_from("<II", raw, len(_MAGIC))
        offset = len(_MAGIC) + 8
        keys: list[tuple[str, str]] = []
        for _ in range(count):
            (id_len,) = struct.unpack_from("<H", raw, offset)
            offset += 2
            vid = raw[offset:offset + id_len].decode("utf-8")
            offset += id_len
            (seg_code,) = struct.unpack_from("<B", raw, offset)
            offset += 1
            keys.append((vid, SEGMENTS[seg_code]))
        rows_bytes = body[offset:]
        expected = count * dimension * 4
        if len(rows_bytes) != expected:
            raise ContainerError(
                f"row payload is {len(rows_bytes)} bytes, header declares {expected}")
        rows = np.frombuffer(rows_bytes, dtype="<f4").reshape(count, dimension)
    except (struct.error, IndexError, ValueError) as exc:
        raise ContainerError(f"corrupt index container: {exc}") from exc
    return EmbeddingMatrix(dimension, keys, rows)
