"""Geometric relations behind the hierarchical QA tasks.

Level 0 operates on point-map pixels, level 1 on single objects, level 2
on object pairs and groups, level 3 adds anchor-centric viewpoints and
constrained counting.

Qualitative outputs are guard-banded: a label is only produced when the
underlying quantity clears a configurable margin from the bin boundary,
so every emitted answer is unambiguous.  Functions return None where a
guard suppresses the output; precondition violations raise.

Direction labels are observer-centric: "front" is along the observer's
facing direction (the camera's forward axis for camera-frame questions),
"right" is the observer's right, "below" is along gravity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Box3D, GravityFrame, facing_vector
from .pmap import PointMap


class RelationError(Exception):
    pass


class NoGeometryError(RelationError):
    """Pixel query on an invalid or out-of-bounds pixel."""


@dataclass(frozen=True)
class GuardConfig:
    """Margins a qualitative answer must clear before a QA item is emitted."""

    orientation_deg: float = 30.0        # yaw distance to a canonical facing
    direction_deg: float = 30.0          # min angle from axis plane boundary
    comparison_ratio: float = 0.10       # min gap between compared values
    consistency_deg: float = 15.0        # similar/orthogonal/opposite bins
    depth_tie_margin_m: float = 0.15     # depth-order tie window
    coordinate_gap_floor_m: float = 0.05  # absolute floor for coordinate ranks
    distance_floor_m: float = 0.20       # min component distance for QA emission

    @property
    def direction_component(self) -> float:
        """Minimum |unit-vector component| for an axis label."""
        return math.sin(math.radians(self.direction_deg))


DEFAULT_GUARDS = GuardConfig()

AXIS_LABELS = {
    "x": ("left", "right"),    # negative, positive world/anchor x
    "y": ("above", "below"),   # y points along gravity (down)
    "z": ("behind", "front"),  # z points along the observer's facing
}
AXIS_OF_LABEL = {lab: ax for ax, (neg, pos) in AXIS_LABELS.items()
                 for lab in (neg, pos)}
OPPOSITE_LABEL = {neg: pos for neg, pos in AXIS_LABELS.values()}
OPPOSITE_LABEL.update({pos: neg for neg, pos in AXIS_LABELS.values()})

ORIENTATION_LABELS = ("front", "right", "back", "left")  # yaw 0/90/180/270


@dataclass
class SceneObject:
    """One object with its gravity-aligned box and optional facing yaw.

    ``yaw_deg`` is the semantic facing direction (mod 360) supplied by an
    annotation or an orientation estimator; the box's own fitted yaw is a
    mod-90 footprint orientation and never stands in for it.
    """

    object_id: str
    category: str
    box: Box3D
    yaw_deg: float | None = None
    pitch_deg: float | None = None

    @property
    def center(self) -> np.ndarray:
        return self.box.center

    @property
    def size(self) -> np.ndarray:
        return self.box.size

    @property
    def camera_distance(self) -> float:
        return float(np.linalg.norm(self.box.center))

    @property
    def width(self) -> float:
        return float(self.box.size[0])

    @property
    def height(self) -> float:
        return float(self.box.size[1])

    @property
    def depth(self) -> float:
        return float(self.box.size[2])

    @property
    def volume(self) -> float:
        return self.box.volume


@dataclass(frozen=True)
class ObserverPose:
    """Explicit observer for observer-centric perspective taking."""

    position: np.ndarray  # camera frame, meters
    yaw_deg: float        # facing, same convention as SceneObject yaw


@dataclass
class DirectionResult:
    vector: np.ndarray            # unit vector in `frame`
    frame: str                    # "camera" or "anchor"
    components: np.ndarray        # unit vector in the labeling frame
    labels: dict[str, str] = field(default_factory=dict)
    margins_deg: dict[str, float] = field(default_factory=dict)

    @property
    def label_text(self) -> str:
        ordered = [self.labels[a] for a in ("x", "y", "z") if a in self.labels]
        return " and ".join(ordered)


@dataclass
class DistanceResult:
    euclidean: float
    vertical: float
    horizontal: float      # single left-right world component
    depthwise: float
    horizontal_planar: float  # 2D norm in the horizontal plane

    def component(self, name: str) -> float:
        return getattr(self, name)


# ---------------------------------------------------------------------------
# Level 0
# ---------------------------------------------------------------------------

def query_point(pm: PointMap, u: int, v: int) -> np.ndarray:
    """Stored camera-frame point at pixel (u, v); raises on invalid pixels."""
    if not (0 <= u < pm.width and 0 <= v < pm.height):
        raise NoGeometryError(f"pixel ({u},{v}) outside {pm.width}x{pm.height}")
    if not pm.is_valid(u, v):
        raise NoGeometryError(f"pixel ({u},{v}) has no valid geometry")
    return pm.point_at(u, v).astype(float)


def depth_order(pm: PointMap, p1: tuple[int, int], p2: tuple[int, int],
                margin_m: float = DEFAULT_GUARDS.depth_tie_margin_m) -> str:
    """Which pixel is closer in depth: "first", "second" or "tie"."""
    z1 = query_point(pm, *p1)[2]
    z2 = query_point(pm, *p2)[2]
    if abs(z1 - z2) <= margin_m:
        return "tie"
    return "first" if z1 < z2 else "second"


# ---------------------------------------------------------------------------
# Level 1
# ---------------------------------------------------------------------------

def object_position(obj: SceneObject) -> tuple[np.ndarray, float]:
    """Camera-frame center and Euclidean object-to-camera distance."""
    return obj.center.astype(float), obj.camera_distance


def orientation_label(obj: SceneObject, gf: GravityFrame,
                      guards: GuardConfig = DEFAULT_GUARDS) -> str | None:
    """Canonical facing label from yaw (and optional pitch), guard-banded.

    Returns None when the facing is not within the guard band of any
    canonical direction.  Raises when the object has no yaw.
    """
    if obj.yaw_deg is None:
        raise RelationError(f"object {obj.object_id!r} has no yaw")
    pitch = obj.pitch_deg
    vertical = None
    if pitch is not None and abs(pitch) >= guards.orientation_deg:
        if abs(pitch) > 90.0 - guards.orientation_deg:
            return "up" if pitch > 0 else "down"
        vertical = "up" if pitch > 0 else "down"

    yaw = obj.yaw_deg % 360.0
    best_i, best_d = None, 360.0
    for i, canonical in enumerate((0.0, 90.0, 180.0, 270.0)):
        d = abs((yaw - canonical + 180.0) % 360.0 - 180.0)
        if d < best_d:
            best_i, best_d = i, d
    if best_d > guards.orientation_deg:
        return None
    label = ORIENTATION_LABELS[best_i]
    return f"{label}-{vertical}" if vertical else label


# ---------------------------------------------------------------------------
# Level 2
# ---------------------------------------------------------------------------

def _label_components(unit: np.ndarray, guards: GuardConfig):
    labels: dict[str, str] = {}
    margins: dict[str, float] = {}
    for i, axis in enumerate(("x", "y", "z")):
        comp = float(unit[i])
        margins[axis] = math.degrees(math.asin(min(abs(comp), 1.0))) \
            - guards.direction_deg
        if abs(comp) >= guards.direction_component:
            neg, pos = AXIS_LABELS[axis]
            labels[axis] = pos if comp > 0 else neg
    return labels, margins


def relative_direction(a: SceneObject, b: SceneObject, gf: GravityFrame,
                       guards: GuardConfig = DEFAULT_GUARDS) -> DirectionResult:
    """Direction from a to b: camera-frame unit vector plus per-axis labels.

    Labels are evaluated on the gravity-aligned world components and only
    emitted for axes where the component clears the guard band.
    """
    delta = b.center.astype(float) - a.center.astype(float)
    norm = float(np.linalg.norm(delta))
    if norm < 1e-9:
        raise RelationError(
            f"objects {a.object_id!r} and {b.object_id!r} have coincident centers"
        )
    vec_cam = delta / norm
    comp = gf.to_world(delta) / norm
    labels, margins = _label_components(comp, guards)
    return DirectionResult(vector=vec_cam, frame="camera", components=comp,
                           labels=labels, margins_deg=margins)


def relative_distance(a: SceneObject, b: SceneObject,
                      gf: GravityFrame) -> DistanceResult:
    """Distance decomposition of b - a in the gravity-aligned world frame."""
    delta_w = gf.to_world(b.center.astype(float) - a.center.astype(float))
    return DistanceResult(
        euclidean=float(np.linalg.norm(delta_w)),
        vertical=abs(float(delta_w[1])),
        horizontal=abs(float(delta_w[0])),
        depthwise=abs(float(delta_w[2])),
        horizontal_planar=float(math.hypot(delta_w[0], delta_w[2])),
    )


COMPARISON_ATTRIBUTES = ("camera-distance", "width", "height", "volume")

_ATTRIBUTE_GETTERS = {
    "camera-distance": lambda o: o.camera_distance,
    "width": lambda o: o.width,
    "height": lambda o: o.height,
    "volume": lambda o: o.volume,
}


@dataclass
class ComparisonResult:
    attribute: str
    mode: str                      # "extreme-min" | "extreme-max" | "full-order"
    ordering: list[str]            # object ids, ascending attribute value
    values: dict[str, float]
    selected: str | None = None    # for extreme modes


def relational_comparison(objs: list[SceneObject], attribute: str, mode: str,
                          guards: GuardConfig = DEFAULT_GUARDS
                          ) -> ComparisonResult | None:
    """Order or select objects by an attribute; None when the guard fails.

    Extreme modes require the 10% gap only next to the selected extreme;
    a full order requires every consecutive gap, making the emitted order
    strict.
    """
    if attribute not in _ATTRIBUTE_GETTERS:
        raise RelationError(f"unknown attribute {attribute!r}")
    if mode not in ("extreme-min", "extreme-max", "full-order"):
        raise RelationError(f"unknown mode {mode!r}")
    if len(objs) < 2:
        raise RelationError("comparison needs at least two objects")
    getter = _ATTRIBUTE_GETTERS[attribute]
    pairs = sorted(((getter(o), o.object_id) for o in objs))
    values = [p[0] for p in pairs]

    def gap_ok(lo: float, hi: float) -> bool:
        return hi >= lo * (1.0 + guards.comparison_ratio)

    if mode == "full-order":
        if not all(gap_ok(values[i], values[i + 1]) for i in range(len(values) - 1)):
            return None
        selected = None
    elif mode == "extreme-min":
        if not gap_ok(values[0], values[1]):
            return None
        selected = pairs[0][1]
    else:
        if not gap_ok(values[-2], values[-1]):
            return None
        selected = pairs[-1][1]
    return ComparisonResult(
        attribute=attribute, mode=mode,
        ordering=[p[1] for p in pairs],
        values={p[1]: p[0] for p in pairs},
        selected=selected,
    )


def orientation_consistency(a: SceneObject, b: SceneObject,
                            guards: GuardConfig = DEFAULT_GUARDS) -> str | None:
    """similar / orthogonal / opposite yaw relation, or None in the gaps."""
    if a.yaw_deg is None or b.yaw_deg is None:
        raise RelationError("both objects need a yaw for consistency")
    delta = abs((a.yaw_deg - b.yaw_deg + 180.0) % 360.0 - 180.0)
    if delta <= guards.consistency_deg:
        return "similar"
    if abs(delta - 90.0) <= guards.consistency_deg:
        return "orthogonal"
    if delta >= 180.0 - guards.consistency_deg:
        return "opposite"
    return None


# ---------------------------------------------------------------------------
# Level 3
# ---------------------------------------------------------------------------

def _anchor_frame(anchor: SceneObject | ObserverPose, gf: GravityFrame
                  ) -> tuple[np.ndarray, np.ndarray]:
    """(rotation rows right/down/forward in world coords, position world)."""
    if isinstance(anchor, ObserverPose):
        yaw = anchor.yaw_deg
        pos_cam = np.asarray(anchor.position, dtype=float)
    else:
        if anchor.yaw_deg is None:
            raise RelationError(
                f"anchor {anchor.object_id!r} has no yaw for perspective taking"
            )
        yaw = anchor.yaw_deg
        pos_cam = anchor.center.astype(float)
    forward = facing_vector(yaw)
    down = np.array([0.0, 1.0, 0.0])
    right = np.cross(down, forward)
    rot = np.stack([right, down, forward])
    return rot, gf.to_world(pos_cam)


def perspective_transform(anchor: SceneObject | ObserverPose,
                          target: SceneObject, gf: GravityFrame,
                          guards: GuardConfig = DEFAULT_GUARDS
                          ) -> tuple[DirectionResult, DistanceResult]:
    """Direction and distances of target in the anchor-centric frame.

    The anchor frame has forward along the anchor facing (projected
    horizontal), down along gravity, right completing the frame, so the
    axis labels read as the anchor's left/right/front/behind.
    """
    rot, anchor_pos_w = _anchor_frame(anchor, gf)
    target_w = gf.to_world(target.center.astype(float))
    delta = rot @ (target_w - anchor_pos_w)
    norm = float(np.linalg.norm(delta))
    if norm < 1e-9:
        raise RelationError("target coincides with the anchor")
    unit = delta / norm
    labels, margins = _label_components(unit, guards)
    direction = DirectionResult(vector=unit, frame="anchor", components=unit,
                                labels=labels, margins_deg=margins)
    distance = DistanceResult(
        euclidean=norm,
        vertical=abs(float(delta[1])),
        horizontal=abs(float(delta[0])),
        depthwise=abs(float(delta[2])),
        horizontal_planar=float(math.hypot(delta[0], delta[2])),
    )
    return direction, distance


def camera_pose() -> ObserverPose:
    """The camera itself as an observer (origin, facing its forward axis)."""
    return ObserverPose(position=np.zeros(3), yaw_deg=180.0)


def spatial_count(objs: list[SceneObject], category: str,
                  anchor: SceneObject, label: str, gf: GravityFrame,
                  guards: GuardConfig = DEFAULT_GUARDS) -> int | None:
    """Count category members with the given directional relation to anchor.

    Returns None when any member's relation along the queried axis is
    guard-suppressed: a human reader could not count such a scene
    unambiguously, so the question itself is withheld.
    """
    if label not in AXIS_OF_LABEL:
        raise RelationError(f"unknown direction label {label!r}")
    axis = AXIS_OF_LABEL[label]
    members = [o for o in objs
               if o.category == category and o.object_id != anchor.object_id]
    count = 0
    for member in members:
        rel = relative_direction(anchor, member, gf, guards)
        if axis not in rel.labels:
            return None
        if rel.labels[axis] == label:
            count += 1
    return count
