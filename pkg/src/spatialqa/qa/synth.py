"""Scene-level QA synthesis across the four task levels.

Given a scene (objects with references, gravity frame, point map), the
synthesizer enumerates guard-passing question candidates per family,
picks formats and paraphrases with a seeded generator, and emits items
whose provenance is rich enough for an independent oracle to recompute
every answer.  Output is deterministic for a fixed (seed, scene).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..geometry import CameraIntrinsics, GravityFrame
from ..pmap import PointMap
from ..quantity import format_point, format_quantity, format_unit_vector
from ..references import ObjectReference
from ..relations import (
    GuardConfig,
    SceneObject,
    depth_order,
    orientation_consistency,
    orientation_label,
    perspective_transform,
    relational_comparison,
    relative_direction,
    relative_distance,
    spatial_count,
)
from .items import Payload, QAItem
from .mcq import DIRECTION_LABELS, ORIENTATION_LABELS, make_mcq, render_options
from .problem import ValidatedProblem
from .templates import MCQ_INSTRUCTION, TF_SUFFIX, TemplateBank, load_templates


@dataclass
class Scene:
    """Everything the synthesizer needs for one image."""

    image_id: str
    objects: list[SceneObject]
    refs: dict[str, ObjectReference]
    gf: GravityFrame
    gravity: np.ndarray
    pm: PointMap | None = None
    intrinsics: CameraIntrinsics | None = None

    def ref_text(self, object_id: str) -> str:
        return self.refs[object_id].text


@dataclass
class SynthConfig:
    """Candidate caps and guard bands for scene synthesis."""

    guards: GuardConfig = field(default_factory=GuardConfig)
    n_point_queries: int = 3
    n_depth_pairs: int = 2
    max_pairs: int = 6
    max_comparisons: int = 4
    max_consistency: int = 2
    max_perspective: int = 4
    max_counting: int = 3
    size_dimensions: tuple[str, ...] = ("width", "height", "depth")
    template_path: str | None = None


TF_MULTIPLIERS = (0.5, 1.5, 2.5)

_AXIS_CHOICE_CAMERA = {
    "x": "to the left or to the right of",
    "y": "above or below",
    "z": "in front of (farther along the viewing direction) or behind",
}
_AXIS_CHOICE_ANCHOR = {
    "x": "to your left or to your right",
    "y": "above you or below you",
    "z": "in front of you or behind you",
}
_RELATION_PHRASE = {
    "left": "to the left of", "right": "to the right of",
    "above": "above", "below": "below",
    "front": "in front of (farther than)", "behind": "behind (nearer than)",
}
_ANCHOR_PHRASE = {
    "left": "to its left", "right": "to its right",
    "above": "above it", "below": "below it",
    "front": "in front of it", "behind": "behind it",
}
_OPPOSITE_DIRECTION = {
    "left": "right", "right": "left", "above": "below", "below": "above",
    "front": "behind", "behind": "front",
}
_COMPONENT_PHRASE = {
    "euclidean": "straight-line distance",
    "vertical": "vertical distance",
    "horizontal": "horizontal (left-right) distance",
    "depthwise": "depth-wise distance",
}
_SUPERLATIVE = {
    ("camera-distance", "extreme-min"): "closest to the camera",
    ("camera-distance", "extreme-max"): "farthest from the camera",
    ("width", "extreme-min"): "the narrowest",
    ("width", "extreme-max"): "the widest",
    ("height", "extreme-min"): "the shortest",
    ("height", "extreme-max"): "the tallest",
    ("volume", "extreme-min"): "the smallest",
    ("volume", "extreme-max"): "the largest",
}
_ORDER_WORDS = {
    "camera-distance": ("nearest", "farthest"),
    "width": ("narrowest", "widest"),
    "height": ("shortest", "tallest"),
    "volume": ("smallest", "largest"),
}
_DIM_INDEX = {"width": 0, "height": 1, "depth": 2}


def _listing(texts: list[str]) -> str:
    if len(texts) == 2:
        return f"{texts[0]} and {texts[1]}"
    return ", ".join(texts[:-1]) + f", and {texts[-1]}"


class _SceneSynthesizer:
    def __init__(self, scene: Scene, config: SynthConfig, seed: int,
                 bank: TemplateBank):
        self.scene = scene
        self.config = config
        self.rng = np.random.default_rng(seed)
        self.bank = bank
        self.items: list[QAItem] = []
        self._seq = 0
        self.objects = sorted(scene.objects, key=lambda o: o.object_id)

    # -- emission machinery -------------------------------------------------

    def _answer_text(self, payload: Payload) -> str:
        if payload.kind == "quantity":
            return format_quantity(float(payload.value))
        if payload.kind == "vector3":
            return format_point(payload.value)
        if payload.kind == "unit-vector":
            return format_unit_vector(payload.value)
        if payload.kind == "count":
            return str(int(payload.value))
        return str(payload.value)

    def _corrupt(self, payload: Payload, label_pool: list[str] | None):
        """A clearly-false stated value for a negative True/False item."""
        rng = self.rng
        if payload.kind == "quantity":
            m = TF_MULTIPLIERS[int(rng.integers(0, len(TF_MULTIPLIERS)))]
            return float(payload.value) * m
        if payload.kind == "vector3":
            m = TF_MULTIPLIERS[int(rng.integers(0, len(TF_MULTIPLIERS)))]
            return [float(v) * m for v in payload.value]
        if payload.kind == "count":
            truth = int(payload.value)
            delta = int(rng.integers(1, 3))
            return truth + delta if truth == 0 or rng.random() < 0.5 \
                else max(0, truth - delta)
        if payload.kind == "label":
            pool = [p for p in (label_pool or []) if p != payload.value]
            if not pool:
                return None
            return pool[int(rng.integers(0, len(pool)))]
        return None

    def _stated_text(self, payload_kind: str, stated) -> str:
        if payload_kind == "quantity":
            return format_quantity(float(stated))
        if payload_kind == "vector3":
            return format_point(stated)
        if payload_kind == "count":
            return str(int(stated))
        return str(stated)

    def _emit(self, family: str, template_key: str, fmt_args: dict,
              payload: Payload, params: dict,
              label_pool: list[str] | None = None,
              tf_pool: list[str] | None = None,
              stated_phrase=None,
              formats: tuple[str, ...] | None = None) -> None:
        """Emit one item, choosing the format and paraphrase by seeded rng.

        ``label_pool`` feeds MCQ distractors; ``tf_pool`` (defaulting to
        the label pool) restricts False statements to labels that are
        unambiguously wrong; ``stated_phrase`` maps a stated label to its
        in-sentence phrasing.
        """
        available = ["free-form"]
        tf_possible = ("true-false" in self.bank.templates.get(template_key, {})
                       and payload.kind != "unit-vector")
        if tf_possible:
            available.append("true-false")
        mcq = None
        if payload.kind in ("quantity", "count", "label"):
            mcq = make_mcq(payload, self.rng, label_pool=label_pool)
            if mcq is not None:
                available.append("mcq")
        if formats is not None:
            available = [f for f in available if f in formats]
            if not available:
                return

        fmt = available[int(self.rng.integers(0, len(available)))]
        self._seq += 1
        item_id = f"{self.scene.image_id}:{family}:{self._seq:04d}"

        if fmt == "free-form":
            prompt = self.bank.pick(self.rng, template_key, "free-form")
            prompt = prompt.format(**fmt_args)
            item = QAItem(item_id=item_id, image_id=self.scene.image_id,
                          family=family, format="free-form", prompt=prompt,
                          answer_text=self._answer_text(payload),
                          payload=payload, provenance=dict(params))
        elif fmt == "mcq":
            options, letter = mcq
            prompt = self.bank.pick(self.rng, template_key, "free-form")
            prompt = prompt.format(**fmt_args)
            prompt = f"{prompt}\n{render_options(options)}\n{MCQ_INSTRUCTION}"
            item = QAItem(item_id=item_id, image_id=self.scene.image_id,
                          family=family, format="mcq", prompt=prompt,
                          answer_text=letter, payload=payload,
                          options=options, provenance=dict(params))
        else:
            truth_stated = self.rng.random() < 0.5
            if truth_stated:
                stated = payload.value
            else:
                pool = tf_pool if tf_pool is not None else label_pool
                stated = self._corrupt(payload, pool)
                if stated is None:
                    truth_stated, stated = True, payload.value
            stated_text = self._stated_text(payload.kind, stated)
            if payload.kind == "label" and stated_phrase is not None:
                stated_text = stated_phrase(str(stated))
            template = self.bank.pick(self.rng, template_key, "true-false")
            statement = template.format(stated=stated_text, **fmt_args)
            prov = dict(params)
            prov["stated"] = stated
            item = QAItem(item_id=item_id, image_id=self.scene.image_id,
                          family=family, format="true-false",
                          prompt=statement + TF_SUFFIX,
                          answer_text="True" if truth_stated else "False",
                          payload=payload, provenance=prov)
        self.items.append(item)

    def _sample(self, pool: list, cap: int) -> list:
        if len(pool) <= cap:
            return pool
        idx = self.rng.choice(len(pool), size=cap, replace=False)
        return [pool[i] for i in sorted(idx)]

    # -- level 0 -------------------------------------------------------------

    def level0(self) -> None:
        pm = self.scene.pm
        if pm is None or pm.valid_count == 0:
            return
        rows, cols = np.nonzero(pm.valid)
        n_pix = len(rows)

        for _ in range(self.config.n_point_queries):
            k = int(self.rng.integers(0, n_pix))
            u, v = int(cols[k]), int(rows[k])
            point = [float(c) for c in pm.point_at(u, v)]
            self._emit(
                "point_querying", "point_querying", {"u": u, "v": v},
                Payload(kind="vector3", value=point, unit="m"),
                {"u": u, "v": v},
            )

        margin = self.config.guards.depth_tie_margin_m
        emitted = 0
        for _ in range(self.config.n_depth_pairs * 8):
            if emitted >= self.config.n_depth_pairs:
                break
            k1 = int(self.rng.integers(0, n_pix))
            k2 = int(self.rng.integers(0, n_pix))
            p1 = (int(cols[k1]), int(rows[k1]))
            p2 = (int(cols[k2]), int(rows[k2]))
            if p1 == p2:
                continue
            order = depth_order(pm, p1, p2, margin_m=margin)
            if order == "tie":
                continue
            emitted += 1
            self._emit(
                "depth_ordering", "depth_ordering",
                {"u1": p1[0], "v1": p1[1], "u2": p2[0], "v2": p2[1]},
                Payload(kind="label", value=order),
                {"p1": list(p1), "p2": list(p2), "margin_m": margin},
                label_pool=["first", "second"],
            )

    # -- level 1 -------------------------------------------------------------

    def level1(self) -> None:
        gf = self.scene.gf
        for obj in self.objects:
            ref = self.scene.ref_text(obj.object_id)
            self._emit(
                "object_localization", "object_localization", {"ref": ref},
                Payload(kind="vector3",
                        value=[float(c) for c in obj.center], unit="m"),
                {"object": obj.object_id, "aspect": "center"},
            )
            self._emit(
                "object_localization", "object_camera_distance", {"ref": ref},
                Payload(kind="quantity", value=obj.camera_distance, unit="m"),
                {"object": obj.object_id, "aspect": "camera-distance"},
            )
            for dim in self.config.size_dimensions:
                self._emit(
                    "object_size", "object_size", {"ref": ref, "dimension": dim},
                    Payload(kind="quantity",
                            value=float(obj.size[_DIM_INDEX[dim]]), unit="m"),
                    {"object": obj.object_id, "dimension": dim},
                )
            if obj.yaw_deg is not None:
                label = orientation_label(obj, gf, self.config.guards)
                if label is not None:
                    self._emit(
                        "object_orientation", "object_orientation", {"ref": ref},
                        Payload(kind="label", value=label),
                        {"object": obj.object_id},
                        label_pool=list(ORIENTATION_LABELS),
                    )

    # -- level 2 -------------------------------------------------------------

    def _direction_pool(self, rel, axis: str) -> list[str]:
        """MCQ distractor pool for a single-axis direction label; labels of
        other cleared axes are excluded since they are also true."""
        banned = {rel.labels[a] for a in rel.labels if a != axis}
        return [lab for lab in DIRECTION_LABELS
                if lab not in banned]

    def _direction_tf_pool(self, rel) -> list[str]:
        """Unambiguously false labels: opposites of every cleared axis."""
        return [_OPPOSITE_DIRECTION[rel.labels[a]] for a in sorted(rel.labels)]

    def level2(self) -> None:
        gf = self.scene.gf
        guards = self.config.guards
        n = len(self.objects)
        pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
        for i, j in self._sample(pairs, self.config.max_pairs):
            a, b = self.objects[i], self.objects[j]
            ta, tb = self.scene.ref_text(a.object_id), self.scene.ref_text(b.object_id)
            rel = relative_direction(a, b, gf, guards)
            axes = sorted(rel.labels)
            if axes:
                axis = axes[int(self.rng.integers(0, len(axes)))]
                self._emit(
                    "relative_direction", "relative_direction",
                    {"a": ta, "b": tb, "choice": _AXIS_CHOICE_CAMERA[axis]},
                    Payload(kind="label", value=rel.labels[axis]),
                    {"a": a.object_id, "b": b.object_id, "axis": axis},
                    label_pool=self._direction_pool(rel, axis),
                    tf_pool=self._direction_tf_pool(rel),
                    stated_phrase=_RELATION_PHRASE.get,
                )
            self._emit(
                "relative_direction", "relative_direction_precise",
                {"a": ta, "b": tb},
                Payload(kind="unit-vector",
                        value=[float(v) for v in rel.vector]),
                {"a": a.object_id, "b": b.object_id, "precise": True},
            )
            dist = relative_distance(a, b, gf)
            components = [c for c in ("euclidean", "vertical", "horizontal",
                                      "depthwise")
                          if dist.component(c) >= guards.distance_floor_m]
            if components:
                comp = components[int(self.rng.integers(0, len(components)))]
                self._emit(
                    "relative_distance", "relative_distance",
                    {"a": ta, "b": tb,
                     "component_phrase": _COMPONENT_PHRASE[comp]},
                    Payload(kind="quantity", value=dist.component(comp),
                            unit="m"),
                    {"a": a.object_id, "b": b.object_id, "component": comp},
                )

        if n >= 2:
            self._comparisons()
            self._consistency()

    def _comparisons(self) -> None:
        guards = self.config.guards
        candidates = []
        for attribute in ("camera-distance", "width", "height", "volume"):
            for mode in ("extreme-min", "extreme-max", "full-order"):
                result = relational_comparison(self.objects, attribute, mode,
                                               guards)
                if result is not None:
                    candidates.append(result)
        for result in self._sample(candidates, self.config.max_comparisons):
            ordered_texts = [self.scene.ref_text(oid) for oid in result.ordering]
            listing_order = self.rng.permutation(len(ordered_texts))
            listing = _listing([ordered_texts[k] for k in listing_order])
            ids = result.ordering
            texts = {oid: self.scene.ref_text(oid) for oid in ids}
            if result.mode == "full-order":
                answer = ", ".join(ordered_texts)
                low, high = _ORDER_WORDS[result.attribute]
                self._emit(
                    "relational_comparison", "relational_order",
                    {"listing": listing, "low": low, "high": high},
                    Payload(kind="label", value=answer),
                    {"objects": ids, "attribute": result.attribute,
                     "mode": result.mode, "texts": texts},
                    label_pool=self._order_pool(ordered_texts),
                )
            else:
                superl = _SUPERLATIVE[(result.attribute, result.mode)]
                selected_text = self.scene.ref_text(result.selected)
                self._emit(
                    "relational_comparison", "relational_comparison",
                    {"listing": listing, "superlative": superl},
                    Payload(kind="label", value=selected_text),
                    {"objects": ids, "attribute": result.attribute,
                     "mode": result.mode, "texts": texts},
                    label_pool=ordered_texts,
                )

    def _order_pool(self, ordered_texts: list[str]) -> list[str]:
        """Wrong orderings for TF statements: adjacent swaps of the truth."""
        pool = []
        for k in range(len(ordered_texts) - 1):
            swapped = list(ordered_texts)
            swapped[k], swapped[k + 1] = swapped[k + 1], swapped[k]
            pool.append(", ".join(swapped))
        return pool

    def _consistency(self) -> None:
        guards = self.config.guards
        yawed = [o for o in self.objects if o.yaw_deg is not None]
        candidates = []
        for i in range(len(yawed)):
            for j in range(i + 1, len(yawed)):
                rel = orientation_consistency(yawed[i], yawed[j], guards)
                if rel is not None:
                    candidates.append((yawed[i], yawed[j], rel))
        for a, b, rel in self._sample(candidates, self.config.max_consistency):
            self._emit(
                "relational_comparison", "orientation_consistency",
                {"a": self.scene.ref_text(a.object_id),
                 "b": self.scene.ref_text(b.object_id)},
                Payload(kind="label", value=rel),
                {"a": a.object_id, "b": b.object_id,
                 "attribute": "orientation"},
                label_pool=["similar", "orthogonal", "opposite"],
            )

    # -- level 3 -------------------------------------------------------------

    def level3(self, problems: list[ValidatedProblem]) -> None:
        self._perspective()
        self._counting()
        for problem in problems:
            self._seq += 1
            item_id = f"{self.scene.image_id}:problem_solving:{self._seq:04d}"
            if problem.kind == "numeric":
                payload = Payload(kind="quantity",
                                  value=float(problem.answer_value), unit="m")
                answer = format_quantity(float(problem.answer_value))
            else:
                payload = Payload(kind="label", value=str(problem.answer_value))
                answer = str(problem.answer_value)
            self.items.append(QAItem(
                item_id=item_id, image_id=self.scene.image_id,
                family="problem_solving", format="free-form",
                prompt=problem.question, answer_text=answer, payload=payload,
                provenance={"check": problem.check, "kind": problem.kind},
            ))

    def _perspective(self) -> None:
        guards = self.config.guards
        anchors = [o for o in self.objects if o.yaw_deg is not None]
        combos = [(a, t) for a in anchors for t in self.objects
                  if t.object_id != a.object_id]
        for anchor, target in self._sample(combos, self.config.max_perspective):
            direction, distance = perspective_transform(anchor, target,
                                                        self.scene.gf, guards)
            ta = self.scene.ref_text(anchor.object_id)
            tt = self.scene.ref_text(target.object_id)
            axes = sorted(direction.labels)
            if axes:
                axis = axes[int(self.rng.integers(0, len(axes)))]
                self._emit(
                    "perspective_taking", "perspective_taking",
                    {"anchor": ta, "target": tt,
                     "choice": _AXIS_CHOICE_ANCHOR[axis]},
                    Payload(kind="label", value=direction.labels[axis]),
                    {"anchor": anchor.object_id, "target": target.object_id,
                     "axis": axis},
                    label_pool=self._direction_pool(direction, axis),
                    tf_pool=self._direction_tf_pool(direction),
                    stated_phrase=_ANCHOR_PHRASE.get,
                )
            if distance.euclidean >= guards.distance_floor_m:
                self._emit(
                    "perspective_taking", "perspective_distance",
                    {"anchor": ta, "target": tt},
                    Payload(kind="quantity", value=distance.euclidean,
                            unit="m"),
                    {"anchor": anchor.object_id,
                     "target": target.object_id, "aspect": "distance"},
                )

    def _counting(self) -> None:
        guards = self.config.guards
        categories = sorted({o.category for o in self.objects})
        candidates = []
        for category in categories:
            anchors = [o for o in self.objects if o.category != category]
            members = [o for o in self.objects if o.category == category]
            if not members:
                continue
            for anchor in anchors:
                for label in ("left", "right", "front", "behind",
                              "above", "below"):
                    count = spatial_count(self.objects, category, anchor,
                                          label, self.scene.gf, guards)
                    if count is not None:
                        candidates.append((category, anchor, label, count))
        for category, anchor, label, count in self._sample(
                candidates, self.config.max_counting):
            self._emit(
                "spatial_counting", "spatial_counting",
                {"category": category,
                 "relation_phrase": _RELATION_PHRASE[label],
                 "anchor": self.scene.ref_text(anchor.object_id)},
                Payload(kind="count", value=count),
                {"category": category, "anchor": anchor.object_id,
                 "label": label},
            )


def synthesize_scene_qa(scene: Scene, config: SynthConfig, seed: int,
                        problems: list[ValidatedProblem] | None = None
                        ) -> list[QAItem]:
    """All QA items for one scene; deterministic for fixed seed and scene.

    A scene without a single valid object yields an empty stream (not an
    error): images where detection produced nothing carry no supervision.
    """
    if not scene.objects:
        return []
    bank = load_templates(config.template_path)
    synth = _SceneSynthesizer(scene, config, seed, bank)
    synth.level0()
    synth.level1()
    synth.level2()
    synth.level3(problems or [])
    return synth.items
