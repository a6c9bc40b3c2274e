import pytest

from iviq.corpus import build_index, parse_manifest
from iviq.gateway import SyntheticProvider
from iviq.worldgen import generate_manifest


def tiny_manifest_dict(**overrides) -> dict:
    """A hand-written two-video manifest used across modules."""
    data = {
        "schema": "iviq-manifest/1",
        "name": "tiny",
        "provider": {"kind": "synthetic", "seed": 11},
        "dimension": 16,
        "segments": True,
        "videos": [
            {
                "video_id": "v1",
                "media_uri": "file:///v1.mp4",
                "truth": {
                    "whole": {
                        "object": ["man", "guitar", "microphone"],
                        "action": ["singing"],
                        "scene": ["street"],
                    },
                    "first_half": {
                        "object": ["man", "guitar"],
                        "action": ["singing"],
                        "scene": [],
                    },
                    "second_half": {
                        "object": ["man", "microphone"],
                        "action": [],
                        "scene": ["street"],
                    },
                },
            },
            {
                "video_id": "v2",
                "media_uri": "file:///v2.mp4",
                "truth": {
                    "whole": {
                        "object": ["dog"],
                        "action": ["running"],
                        "scene": ["park"],
                    },
                    "first_half": {
                        "object": ["dog"],
                        "action": ["running"],
                        "scene": [],
                    },
                    "second_half": {
                        "object": ["dog"],
                        "action": [],
                        "scene": ["park"],
                    },
                },
            },
        ],
        "captions": [
            {"video_id": "v1", "text": "a man is singing"},
            {"video_id": "v2", "text": "a dog"},
        ],
    }
    data.update(overrides)
    return data


@pytest.fixture
def tiny_manifest():
    return parse_manifest(tiny_manifest_dict())


@pytest.fixture
def tiny_gateway(tiny_manifest):
    return SyntheticProvider.from_manifest(tiny_manifest)


@pytest.fixture
def tiny_index(tiny_manifest, tiny_gateway):
    return build_index(tiny_manifest, tiny_gateway)


@pytest.fixture(scope="session")
def small_world():
    """30 videos over 3 objects: ambiguous captions, full slot profile."""
    return generate_manifest(3, 30, n_objects=3, dimension=64)


@pytest.fixture(scope="session")
def small_gateway(small_world):
    return SyntheticProvider.from_manifest(small_world)


@pytest.fixture(scope="session")
def small_index(small_world, small_gateway):
    return build_index(small_world, small_gateway)
