"""Prompt template bank: several paraphrases per family, seeded choice.

A template file is JSON: {"version": int, "families": {family: {format:
[template, ...]}}}.  "free-form" templates phrase the question;
"true-false" templates phrase a declarative statement (the True/False
suffix is appended by the synthesizer); MCQ reuses the free-form
question with an option block.  Placeholders are named; the synthesizer
formats each template with the fields listed per family below.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

TEMPLATE_VERSION = 1

# placeholders by family:
#   point_querying      u, v, stated (tf)
#   depth_ordering      u1, v1, u2, v2
#   object_orientation  ref, stated (tf)
#   object_size         ref, dimension, stated (tf)
#   object_localization ref, stated (tf)
#   relative_direction  a, b, choice ("left or right" etc.), stated (tf)
#   relative_distance   a, b, component_phrase, stated (tf)
#   relational_comparison  listing, superlative / low, high, stated (tf)
#   perspective_taking  anchor, target, choice, stated (tf)
#   spatial_counting    category, relation_phrase, anchor, stated (tf)
DEFAULT_TEMPLATES: dict[str, dict[str, list[str]]] = {
    "point_querying": {
        "free-form": [
            "What are the 3D coordinates, in meters, of the point at pixel ({u}, {v})?",
            "Give the camera-frame 3D position of the image point at pixel ({u}, {v}).",
            "Report the metric 3D coordinates of the point shown at pixel ({u}, {v}).",
        ],
        "true-false": [
            "The point at pixel ({u}, {v}) is located at {stated}.",
        ],
    },
    "depth_ordering": {
        "free-form": [
            "Of the two pixels ({u1}, {v1}) and ({u2}, {v2}), which one shows the point closer to the camera? Answer 'first' or 'second'.",
            "Compare the depths at pixel ({u1}, {v1}) and pixel ({u2}, {v2}): is the first or the second closer to the camera?",
        ],
        "true-false": [
            "Of the pixels ({u1}, {v1}) and ({u2}, {v2}), the {stated} one shows the point closer to the camera.",
        ],
    },
    "object_orientation": {
        "free-form": [
            "Which direction is {ref} facing?",
            "From the camera's viewpoint, what direction does {ref} face?",
        ],
        "true-false": [
            "{ref} is facing {stated}.",
        ],
    },
    "object_size": {
        "free-form": [
            "What is the {dimension} of {ref}?",
            "Estimate the {dimension} of {ref} in metric units.",
            "How large is the {dimension} of {ref}?",
        ],
        "true-false": [
            "The {dimension} of {ref} is {stated}.",
        ],
    },
    "object_localization": {
        "free-form": [
            "What are the 3D coordinates of the center of {ref}?",
            "Give the camera-frame position of {ref} in meters.",
        ],
        "true-false": [
            "The center of {ref} is located at {stated}.",
        ],
    },
    "object_camera_distance": {
        # phrasing variant of object_localization (aspect camera-distance)
        "free-form": [
            "How far is {ref} from the camera?",
            "What is the distance between the camera and {ref}?",
        ],
        "true-false": [
            "{ref} is {stated} away from the camera.",
        ],
    },
    "relative_direction": {
        "free-form": [
            "Is {b} {choice} of {a}?",
            "Relative to {a}, is {b} {choice}?",
        ],
        "true-false": [
            "{b} is {stated} {a}.",
        ],
    },
    "relative_direction_precise": {
        "free-form": [
            "What is the unit direction vector, in the camera frame, pointing from {a} to {b}?",
            "Give the camera-frame unit vector from {a} toward {b}.",
        ],
    },
    "relative_distance": {
        "free-form": [
            "What is the {component_phrase} between {a} and {b}?",
            "How large is the {component_phrase} separating {a} and {b}?",
        ],
        "true-false": [
            "The {component_phrase} between {a} and {b} is {stated}.",
        ],
    },
    "relational_comparison": {
        "free-form": [
            "Among {listing}, which one is {superlative}?",
            "Consider {listing}: which of them is {superlative}?",
        ],
        "true-false": [
            "Among {listing}, {stated} is {superlative}.",
        ],
    },
    "relational_order": {
        "free-form": [
            "Order the following from {low} to {high}: {listing}.",
        ],
        "true-false": [
            "Ordered from {low} to {high}, the sequence is: {stated}.",
        ],
    },
    "orientation_consistency": {
        "free-form": [
            "How do the facing directions of {a} and {b} compare: similar, orthogonal, or opposite?",
        ],
        "true-false": [
            "The facing directions of {a} and {b} are {stated}.",
        ],
    },
    "perspective_taking": {
        "free-form": [
            "Imagine standing at {anchor} and facing the way it faces. Is {target} {choice} from that viewpoint?",
            "From the viewpoint of {anchor} (looking along its facing direction), is {target} {choice}?",
        ],
        "true-false": [
            "Seen from {anchor}, facing its way, {target} is {stated}.",
        ],
    },
    "perspective_distance": {
        "free-form": [
            "Imagine standing at {anchor}. How far away is {target}?",
        ],
        "true-false": [
            "Standing at {anchor}, {target} is {stated} away.",
        ],
    },
    "spatial_counting": {
        "free-form": [
            "How many {category}s are {relation_phrase} {anchor}?",
            "Count the {category}s that are {relation_phrase} {anchor}.",
        ],
        "true-false": [
            "There are {stated} {category}s {relation_phrase} {anchor}.",
        ],
    },
}

TF_SUFFIX = " True or False?"
MCQ_INSTRUCTION = "Answer with the letter of the correct option."


class TemplateBank:
    def __init__(self, templates: dict, version: int = TEMPLATE_VERSION):
        self.templates = templates
        self.version = version

    def pick(self, rng: np.random.Generator, key: str, fmt: str) -> str:
        group = self.templates.get(key)
        if not group or fmt not in group:
            raise KeyError(f"no template for {key!r} / {fmt!r}")
        options = group[fmt]
        return options[int(rng.integers(0, len(options)))]


def load_templates(path: str | Path | None = None) -> TemplateBank:
    """Default bank, or a versioned JSON template file override."""
    if path is None:
        return TemplateBank(DEFAULT_TEMPLATES)
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return TemplateBank(data["families"], version=data.get("version", 0))
