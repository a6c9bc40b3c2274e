"""Interactive text-to-video retrieval with question/answer query refinement."""

from .corpus import (
    AttributeTruth,
    CorpusManifest,
    EmbeddingMatrix,
    VideoRecord,
    build_index,
    load_index,
    load_manifest,
    save_index,
)
from .errors import (
    CapabilityError,
    ContainerError,
    DimensionMismatchError,
    GeneratorExhausted,
    IviqError,
    ManifestError,
    ProviderError,
    SessionStateError,
)
from .evaluation import ExperimentReport, MetricsSnapshot, compute_metrics, run_experiment
from .gateway import ModelGateway, RemoteGateway, SyntheticProvider, make_gateway
from .ranking import RankedList, RankEntry, rank_cosine, rank_of, rerank_itm
from .session import (
    DialogueRound,
    Question,
    QueryState,
    Session,
    SessionConfig,
    SessionRecord,
    compose_fragment,
    replay_session,
    start_session,
)

__version__ = "0.1.0"

__all__ = [
    "AttributeTruth", "CorpusManifest", "EmbeddingMatrix", "VideoRecord",
    "build_index", "load_index", "load_manifest", "save_index",
    "CapabilityError", "ContainerError", "DimensionMismatchError",
    "GeneratorExhausted", "IviqError", "ManifestError", "ProviderError",
    "SessionStateError",
    "ExperimentReport", "MetricsSnapshot", "compute_metrics", "run_experiment",
    "ModelGateway", "RemoteGateway", "SyntheticProvider", "make_gateway",
    "RankedList", "RankEntry", "rank_cosine", "rank_of", "rerank_itm",
    "DialogueRound", "Question", "QueryState", "Session", "SessionConfig",
    "SessionRecord", "compose_fragment", "replay_session", "start_session",
    "__version__",
]
