"""Deterministic synthetic corpora for desk-scale experiments.

Worlds are built so that the object-only initial captions are ambiguous
(many videos share each object) while the full attribute profile singles
out every video: actions and scenes are distinct within an object group and
extra-object pairs are globally unique.
"""

from __future__ import annotations

import random

from .corpus import CorpusManifest, parse_manifest

# all living: every video's subject supports both the action and the scene
# question of the heuristic planner
OBJECTS = (
    "man", "woman", "boy", "girl", "dog", "cat", "horse", "monkey",
    "clown", "chef", "dancer", "singer", "bird", "cow", "sheep", "goat",
    "pig", "bear", "lion", "tiger",
)

ACTIONS = (
    "singing", "dancing", "running", "cooking", "jumping", "reading",
    "swimming", "drawing", "climbing", "typing", "juggling", "skating",
    "fishing", "painting", "driving", "laughing", "marching", "knitting",
    "boxing", "surfing", "diving", "drumming", "waving", "stretching",
    "rowing", "sliding", "spinning", "kicking", "throwing", "sleeping",
)

SCENES = (
    "street", "kitchen", "park", "beach", "stadium", "library", "garage",
    "forest", "rooftop", "classroom", "bridge", "desert", "harbor", "museum",
    "office", "garden", "tunnel", "market", "theater", "mountain",
    "ballroom", "barn", "alley", "plaza", "courtyard", "pier", "meadow",
    "cellar", "balcony", "arena",
)

COLORS = ("red", "blue", "green", "yellow", "purple", "orange", "black", "white")

MATERIALS = ("wood", "metal", "plastic", "glass", "fabric", "leather", "stone", "paper")

EXTRAS = (
    "balloon", "umbrella", "ladder", "bucket", "candle", "mirror", "helmet",
    "backpack", "skateboard", "kite", "drum", "trumpet", "flute",
    "microphone", "football", "basketball", "frisbee", "surfboard",
    "bottle", "cup", "plate", "bowl", "spoon", "fork", "knife", "pan",
    "kettle", "oven", "television", "laptop", "phone", "camera", "clock",
    "watch", "book", "newspaper", "pen", "pencil", "brush", "canvas",
    "doll", "puzzle", "flag", "banner", "sign", "bench", "swing",
    "fountain", "statue", "lantern", "rope", "net", "hammer", "shovel",
    "rake", "broom", "cake", "pizza", "sandwich", "apple", "banana",
    "flower", "tree", "basket", "crate", "barrel", "wheel", "tent",
    "suitcase", "telescope",
)


OPTIONAL_SLOTS = ("color", "material", "extra_objects")


def generate_manifest(seed: int, n_videos: int, *, dimension: int = 256,
                      n_objects: int = 20, extras_per_video: int = 2,
                      extra_slots: tuple[str, ...] = OPTIONAL_SLOTS,
                      halves: bool = True, noise_rate: float = 0.0,
                      name: str | None = None) -> CorpusManifest:
    """Build a synthetic corpus manifest with one evaluation caption per video.

    ``extra_slots`` selects which attribute slots exist beyond the core
    object/action/scene triple.
    """
    unknown = set(extra_slots) - set(OPTIONAL_SLOTS)
    if unknown:
        raise ValueError(f"unknown extra slots {sorted(unknown)}")
    if not 1 <= n_objects <= len(OBJECTS):
        raise ValueError(f"n_objects must be in [1, {len(OBJECTS)}]")
    group_size = -(-n_videos // n_objects)  # ceil
    if group_size > len(ACTIONS) or group_size > len(SCENES):
        raise ValueError(
            f"{n_videos} videos over {n_objects} objects needs groups of {group_size}, "
            f"but only {len(ACTIONS)} distinct actions/scenes are available")

    rng = random.Random(seed)
    object_of = [OBJECTS[i % n_objects] for i in range(n_videos)]
    group_indices: dict[str, list[int]] = {}
    for i, obj in enumerate(object_of):
        group_indices.setdefault(obj, []).append(i)

    action_of: list[str] = [""] * n_videos
    scene_of: list[str] = [""] * n_videos
    for obj in OBJECTS[:n_objects]:
        members = group_indices.get(obj, [])
        actions = rng.sample(ACTIONS, len(members))
        scenes = rng.sample(SCENES, len(members))
        for member, action, scene in zip(members, actions, scenes):
            action_of[member] = action
            scene_of[member] = scene

    with_color = "color" in extra_slots
    with_material = "material" in extra_slots
    with_extras = "extra_objects" in extra_slots and extras_per_video > 0

    used_extras: set[tuple[str, ...]] = set()
    videos: list[dict] = []
    captions: list[dict] = []
    for i in range(n_videos):
        vid = f"v{i:04d}"
        color = rng.choice(COLORS) if with_color else None
        material = rng.choice(MATERIALS) if with_material else None
        extras: tuple[str, ...] = ()
        if with_extras:
            while True:
                extras = tuple(sorted(rng.sample(EXTRAS, extras_per_video)))
                if extras not in used_extras:
                    used_extras.add(extras)
                    break
        whole = {
            "object": [object_of[i]],
            "action": [action_of[i]],
            "scene": [scene_of[i]],
        }
        if with_color:
            whole["color"] = [color]
        if with_material:
            whole["material"] = [material]
        if with_extras:
            whole["extra_objects"] = list(extras)
        truth = {"whole": whole}
        if halves:
            first = {"object": [object_of[i]], "action": [action_of[i]], "scene": []}
            second = {"object": [object_of[i]], "action": [], "scene": [scene_of[i]]}
            if with_color:
                first["color"], second["color"] = [color], []
            if with_material:
                first["material"], second["material"] = [], [material]
            if with_extras:
                first["extra_objects"] = [extras[0]]
                second["extra_objects"] = list(extras[1:])
            truth["first_half"] = first
            truth["second_half"] = second
        videos.append({
            "video_id": vid,
            "media_uri": f"synthetic://{vid}",
            "truth": truth,
        })
        captions.append({"video_id": vid, "text": f"a {object_of[i]}"})

    name = name or f"synthetic-s{seed}-n{n_videos}"
    return parse_manifest({
        "schema": "iviq-manifest/1",
        "name": name,
        "provider": {"kind": "synthetic", "seed": seed, "noise_rate": noise_rate},
        "dimension": dimension,
        "frame_sampling": "8 uniform frames per video (provider concern; recorded only)",
        "segments": halves,
        "videos": videos,
        "captions": captions,
    })
