"""Deterministic problem-generator responses for hermetic pipeline runs.

Stands in for the external reasoning model: given a scene digest it
fabricates multi-step question candidates whose checks the pipeline can
validate, with stated values jittered inside the acceptance tolerance.
The fabrication is keyed off the digest content, so recording and replay
agree byte-for-byte.
"""

from __future__ import annotations

import hashlib

import numpy as np

from ..qa.problem import evaluate_check

MIN_NUMERIC_VALUE = 0.3  # meters; keeps stated-vs-true gaps meaningful


def _digest_rng(digest: dict) -> np.random.Generator:
    blob = digest["image_id"] + ":" + str(len(digest["objects"]))
    seed = int.from_bytes(hashlib.sha256(blob.encode()).digest()[:8], "little")
    return np.random.default_rng(seed)


def problem_fixture_response(digest: dict) -> dict:
    """Candidate list mimicking an external generator's output."""
    objects = digest["objects"]
    rng = _digest_rng(digest)
    candidates = []

    if len(objects) >= 2:
        a, b = objects[0], objects[1]
        check = {"op": "distance", "a": a["id"], "b": b["id"]}
        true = evaluate_check(check, digest)
        if true >= MIN_NUMERIC_VALUE:
            jitter = float(rng.uniform(-0.15, 0.15))
            candidates.append({
                "kind": "numeric",
                "question": (
                    f"Starting at {a['reference']}, how far would you have "
                    f"to travel in a straight line to reach {b['reference']}?"
                ),
                "value": round(true * (1.0 + jitter), 4),
                "unit": "m",
                "check": check,
            })
        check = {"op": "add", "args": [
            {"op": "size", "object": a["id"], "dimension": "height"},
            {"op": "size", "object": b["id"], "dimension": "height"},
        ]}
        true = evaluate_check(check, digest)
        if true >= MIN_NUMERIC_VALUE:
            jitter = float(rng.uniform(-0.15, 0.15))
            candidates.append({
                "kind": "numeric",
                "question": (
                    f"If {a['reference']} were stacked on top of "
                    f"{b['reference']}, how tall would the stack be?"
                ),
                "value": round(true * (1.0 + jitter), 4),
                "unit": "m",
                "check": check,
            })
        check = {"op": "gt", "args": [
            {"op": "volume", "object": a["id"]},
            {"op": "volume", "object": b["id"]},
        ]}
        candidates.append({
            "kind": "judgement",
            "question": (
                f"Does {a['reference']} take up more space than "
                f"{b['reference']}? Answer yes or no."
            ),
            "answer": evaluate_check(check, digest),
            "check": check,
        })
    elif len(objects) == 1:
        a = objects[0]
        check = {"op": "camera_distance", "object": a["id"]}
        true = evaluate_check(check, digest)
        jitter = float(rng.uniform(-0.15, 0.15))
        candidates.append({
            "kind": "numeric",
            "question": (
                f"A robot drives straight from the camera to "
                f"{a['reference']}. How far does it travel?"
            ),
            "value": round(true * (1.0 + jitter), 4),
            "unit": "m",
            "check": check,
        })
    return {"candidates": candidates}
