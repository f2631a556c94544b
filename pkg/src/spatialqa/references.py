"""Unique natural-language references for scene objects.

Reference kinds, in selection priority order:

  textual          externally generated caption that passed grounding
                   verification (exactly one grounder box, IoU > 0.7)
  category         "the sofa" - sole instance of its category
  linear-order     "the second chair from the left" - same-category centers
                   in a near-linear arrangement (PCA ratio test)
  positional       "the leftmost bowl", "the second closest table to the
                   camera" - rank along a world axis or camera distance
  size-comparison  "the widest sofa", "the tallest door"
  box-fallback     "the chair (highlighted by red box)" plus a pixel box

Every emitted reference resolves back to exactly one object under
``resolve_reference``; rank-based references are only produced when
adjacent ranked values clear a 10% guard.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import GravityFrame
from .relations import DEFAULT_GUARDS, GuardConfig, SceneObject

FALLBACK_PALETTE = ("red", "green", "blue", "yellow",
                    "magenta", "cyan", "orange", "purple")
PCA_LINEAR_RATIO = 0.15
AXIS_AMBIGUITY_DEG = 10.0
TEXTUAL_IOU_THRESHOLD = 0.7

_ORDINALS = ("first", "second", "third", "fourth", "fifth", "sixth",
             "seventh", "eighth", "ninth", "tenth")


def ordinal_word(n: int) -> str:
    """1 -> "first", 2 -> "second", ...; falls back to "11th" style."""
    if 1 <= n <= len(_ORDINALS):
        return _ORDINALS[n - 1]
    return f"{n}th"


@dataclass
class ObjectReference:
    object_id: str
    kind: str       # textual | category | linear-order | positional |
    #                 size-comparison | box-fallback
    text: str
    params: dict = field(default_factory=dict)
    color: str | None = None          # box-fallback only
    pixel_box: list | None = None     # box-fallback only

    def to_dict(self) -> dict:
        d = {"object_id": self.object_id, "kind": self.kind, "text": self.text}
        if self.params:
            d["params"] = self.params
        if self.color:
            d["color"] = self.color
        if self.pixel_box is not None:
            d["pixel_box"] = list(self.pixel_box)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ObjectReference":
        return cls(object_id=d["object_id"], kind=d["kind"], text=d["text"],
                   params=d.get("params", {}), color=d.get("color"),
                   pixel_box=d.get("pixel_box"))


# ---------------------------------------------------------------------------
# Textual verification and fallback
# ---------------------------------------------------------------------------

def verify_textual_reference(grounded_boxes: list, gt_iou: float) -> bool:
    """A caption is valid iff the grounder returned exactly one box with
    IoU strictly above the threshold."""
    if len(grounded_boxes) != 1:
        return False
    return gt_iou > TEXTUAL_IOU_THRESHOLD


def fallback_color(palette_index: int) -> str:
    """Deterministic color name; cycles add a disambiguating ordinal."""
    color = FALLBACK_PALETTE[palette_index % len(FALLBACK_PALETTE)]
    cycle = palette_index // len(FALLBACK_PALETTE)
    if cycle == 0:
        return color
    return f"{ordinal_word(cycle + 1)} {color}"


def fallback_reference(object_id: str, category: str, palette_index: int,
                       pixel_box: list | None = None) -> ObjectReference:
    color = fallback_color(palette_index)
    return ObjectReference(
        object_id=object_id, kind="box-fallback",
        text=f"the {category} (highlighted by {color} box)",
        params={"palette_index": palette_index},
        color=color, pixel_box=pixel_box,
    )


# ---------------------------------------------------------------------------
# Linear ordering (PCA)
# ---------------------------------------------------------------------------

_AXIS_SIDE = {0: ("left", "left-right"), 1: ("top", "top-bottom"),
              2: ("front", "front-back")}


def linear_order_reference(objs: list[SceneObject], gf: GravityFrame,
                           ratio: float = PCA_LINEAR_RATIO,
                           use_variance_ratio: bool = False
                           ) -> list[ObjectReference] | None:
    """Ordinal references along the dominant axis of a near-linear group.

    Principal components come from the SVD of the centered world-frame
    centers; the group is linear when the second singular value is below
    ``ratio`` of the first (set ``use_variance_ratio`` to compare
    variances instead).  Returns None when the group is not linear or the
    dominant direction is ambiguous between two world axes.
    """
    if len(objs) < 3:
        return None
    centers = np.stack([gf.to_world(o.center.astype(float)) for o in objs])
    centered = centers - centers.mean(axis=0)
    _, svals, vt = np.linalg.svd(centered, full_matrices=False)
    s0, s1 = float(svals[0]), float(svals[1])
    if s0 <= 0:
        return None
    measure = (s1 / s0) ** 2 if use_variance_ratio else s1 / s0
    if measure >= ratio:
        return None

    pc1 = vt[0]
    cosines = np.abs(pc1)
    angles = np.degrees(np.arccos(np.clip(cosines, 0.0, 1.0)))
    order = np.argsort(angles)
    if angles[order[1]] - angles[order[0]] < AXIS_AMBIGUITY_DEG:
        return None
    axis = int(order[0])
    if pc1[axis] < 0:
        pc1 = -pc1
    side, axis_name = _AXIS_SIDE[axis]

    proj = centered @ pc1
    ranking = np.argsort(proj, kind="stable")
    category = objs[0].category
    refs = []
    for rank, idx in enumerate(ranking):
        obj = objs[int(idx)]
        refs.append(ObjectReference(
            object_id=obj.object_id, kind="linear-order",
            text=f"the {ordinal_word(rank + 1)} {category} from the {side}",
            params={"axis": axis_name, "rank": rank, "side": side},
        ))
    return refs


# ---------------------------------------------------------------------------
# Positional and size ranks
# ---------------------------------------------------------------------------

# metric -> (low side name, high side name, low text, high text, mid pattern)
_POSITIONAL_SURFACE = {
    "x": ("left", "right", "the leftmost {cat}", "the rightmost {cat}",
          "the {ord} {cat} from the left"),
    "y": ("top", "bottom", "the highest {cat}", "the lowest {cat}",
          "the {ord} highest {cat}"),
    "z": ("front", "back", "the frontmost {cat}", "the rearmost {cat}",
          "the {ord} {cat} from the front"),
}

_SIZE_SURFACE = {
    "width": ("the narrowest {cat}", "the widest {cat}",
              "the {ord} widest {cat}"),
    "height": ("the shortest {cat}", "the tallest {cat}",
               "the {ord} tallest {cat}"),
    "volume": ("the smallest {cat}", "the largest {cat}",
               "the {ord} largest {cat}"),
}


def _coordinate_gaps_ok(values: list[float], guards: GuardConfig) -> bool:
    for lo, hi in zip(values, values[1:]):
        gap = hi - lo
        if gap < max(guards.comparison_ratio * max(abs(lo), abs(hi)),
                     guards.coordinate_gap_floor_m):
            return False
    return True


def _ratio_gaps_ok(values: list[float], guards: GuardConfig) -> bool:
    return all(hi >= lo * (1.0 + guards.comparison_ratio)
               for lo, hi in zip(values, values[1:]))


def positional_reference(objs: list[SceneObject], gf: GravityFrame,
                         guards: GuardConfig = DEFAULT_GUARDS
                         ) -> dict[str, list[ObjectReference]]:
    """Rank-based positional references for a same-category group.

    Returns candidates per object id; empty lists where no metric clears
    its guard.  Camera distance uses the 10% ratio guard; signed world
    coordinates additionally require an absolute gap floor.
    """
    out: dict[str, list[ObjectReference]] = {o.object_id: [] for o in objs}
    if len(objs) < 2:
        return out
    category = objs[0].category
    n = len(objs)

    centers = {o.object_id: gf.to_world(o.center.astype(float)) for o in objs}

    for axis_i, axis in enumerate(("x", "y", "z")):
        ranked = sorted(objs, key=lambda o: float(centers[o.object_id][axis_i]))
        values = [float(centers[o.object_id][axis_i]) for o in ranked]
        if not _coordinate_gaps_ok(values, guards):
            continue
        low_txt, high_txt, mid_txt = _POSITIONAL_SURFACE[axis][2:]
        for rank, obj in enumerate(ranked):
            if rank == 0:
                text = low_txt.format(cat=category)
            elif rank == n - 1:
                text = high_txt.format(cat=category)
            else:
                text = mid_txt.format(ord=ordinal_word(rank + 1), cat=category)
            out[obj.object_id].append(ObjectReference(
                object_id=obj.object_id, kind="positional", text=text,
                params={"metric": axis, "rank": rank},
            ))

    ranked = sorted(objs, key=lambda o: o.camera_distance)
    values = [o.camera_distance for o in ranked]
    if _ratio_gaps_ok(values, guards):
        for rank, obj in enumerate(ranked):
            if n == 2:
                text = (f"the closer {category}" if rank == 0
                        else f"the farther {category}")
            elif rank == 0:
                text = f"the closest {category} to the camera"
            elif rank == n - 1:
                text = f"the farthest {category} from the camera"
            else:
                text = (f"the {ordinal_word(rank + 1)} closest "
                        f"{category} to the camera")
            out[obj.object_id].append(ObjectReference(
                object_id=obj.object_id, kind="positional", text=text,
                params={"metric": "camera-distance", "rank": rank},
            ))
    return out


def size_reference(objs: list[SceneObject], dimension: str,
                   guards: GuardConfig = DEFAULT_GUARDS
                   ) -> dict[str, list[ObjectReference]]:
    """Size-rank references ("the widest sofa") for a same-category group."""
    if dimension not in _SIZE_SURFACE:
        raise ValueError(f"unknown size dimension {dimension!r}")
    out: dict[str, list[ObjectReference]] = {o.object_id: [] for o in objs}
    if len(objs) < 2:
        return out
    category = objs[0].category
    getter = {"width": lambda o: o.width, "height": lambda o: o.height,
              "volume": lambda o: o.volume}[dimension]
    ranked = sorted(objs, key=getter)
    values = [getter(o) for o in ranked]
    if not _ratio_gaps_ok(values, guards):
        return out
    low_txt, high_txt, mid_txt = _SIZE_SURFACE[dimension]
    n = len(objs)
    for rank, obj in enumerate(ranked):
        if rank == n - 1:
            text = high_txt.format(cat=category)
        elif rank == 0:
            text = low_txt.format(cat=category)
        else:
            # rank from the large end, matching the "second widest" reading
            text = mid_txt.format(ord=ordinal_word(n - rank), cat=category)
        out[obj.object_id].append(ObjectReference(
            object_id=obj.object_id, kind="size-comparison", text=text,
            params={"dimension": dimension, "rank": rank},
        ))
    return out


# ---------------------------------------------------------------------------
# Selection and resolution
# ---------------------------------------------------------------------------

_KIND_PRIORITY = {"textual": 0, "category": 1, "linear-order": 2,
                  "positional": 3, "size-comparison": 4, "box-fallback": 5}


def select_reference(candidates: list[ObjectReference]) -> ObjectReference:
    """First candidate of the simplest kind that was produced."""
    if not candidates:
        raise ValueError("no reference candidates to select from")
    return min(enumerate(candidates),
               key=lambda t: (_KIND_PRIORITY[t[1].kind], t[0]))[1]


def assign_references(objs: list[SceneObject], gf: GravityFrame,
                      verified_captions: dict[str, str] | None = None,
                      boxes2d: dict[str, list] | None = None,
                      guards: GuardConfig = DEFAULT_GUARDS,
                      use_variance_ratio: bool = False
                      ) -> dict[str, ObjectReference]:
    """One unique reference per object, picking the simplest passing kind."""
    verified_captions = verified_captions or {}
    boxes2d = boxes2d or {}
    by_category: dict[str, list[SceneObject]] = {}
    for o in objs:
        by_category.setdefault(o.category, []).append(o)

    candidates: dict[str, list[ObjectReference]] = {o.object_id: [] for o in objs}
    for oid, caption in verified_captions.items():
        if oid in candidates:
            candidates[oid].append(ObjectReference(
                object_id=oid, kind="textual", text=caption))

    for category, group in by_category.items():
        if len(group) == 1:
            obj = group[0]
            candidates[obj.object_id].append(ObjectReference(
                object_id=obj.object_id, kind="category",
                text=f"the {category}"))
            continue
        linear = linear_order_reference(group, gf,
                                        use_variance_ratio=use_variance_ratio)
        if linear:
            for ref in linear:
                candidates[ref.object_id].append(ref)
        for oid, refs in positional_reference(group, gf, guards).items():
            candidates[oid].extend(refs)
        for dimension in ("width", "height", "volume"):
            for oid, refs in size_reference(group, dimension, guards).items():
                candidates[oid].extend(refs)

    result: dict[str, ObjectReference] = {}
    fallback_index = 0
    for o in objs:
        cands = candidates[o.object_id]
        if cands:
            result[o.object_id] = select_reference(cands)
        else:
            result[o.object_id] = fallback_reference(
                o.object_id, o.category, fallback_index,
                pixel_box=boxes2d.get(o.object_id))
            fallback_index += 1
    return result


def resolve_reference(ref: ObjectReference, objs: list[SceneObject],
                      gf: GravityFrame, guards: GuardConfig = DEFAULT_GUARDS
                      ) -> SceneObject | None:
    """Re-resolve a non-textual reference against the scene.

    Returns the unique matching object, or None when the reference no
    longer resolves (used by tests to prove uniqueness).
    """
    if ref.kind == "textual":
        return None  # resolution lives in the external grounder
    if ref.kind == "box-fallback":
        matches = [o for o in objs if o.object_id == ref.object_id]
        return matches[0] if len(matches) == 1 else None

    category = _category_of(ref, objs)
    group = [o for o in objs if o.category == category]
    if ref.kind == "category":
        return group[0] if len(group) == 1 else None
    if ref.kind == "linear-order":
        refs = linear_order_reference(group, gf)
        if not refs:
            return None
        for r in refs:
            if r.params["rank"] == ref.params["rank"] and r.text == ref.text:
                return _by_id(r.object_id, objs)
        return None
    if ref.kind == "positional":
        table = positional_reference(group, gf, guards)
        for oid, refs in table.items():
            for r in refs:
                if r.params == ref.params and r.text == ref.text:
                    return _by_id(oid, objs)
        return None
    if ref.kind == "size-comparison":
        table = size_reference(group, ref.params["dimension"], guards)
        for oid, refs in table.items():
            for r in refs:
                if r.params == ref.params and r.text == ref.text:
                    return _by_id(oid, objs)
        return None
    raise ValueError(f"unknown reference kind {ref.kind!r}")


def _category_of(ref: ObjectReference, objs: list[SceneObject]) -> str:
    for o in objs:
        if o.object_id == ref.object_id:
            return o.category
    raise ValueError(f"reference object {ref.object_id!r} not in scene")


def _by_id(oid: str, objs: list[SceneObject]) -> SceneObject | None:
    for o in objs:
        if o.object_id == oid:
            return o
    return None
