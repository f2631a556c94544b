"""Oracle dataset writer: scenes to PMAP files, masks and manifests.

Produces exactly the input formats the generation pipeline consumes,
plus a scenes.jsonl with the exact ground-truth layouts for independent
answer checking.  Objects that render too few pixels are dropped from
both the manifest and the saved ground truth, keeping the two views of
the scene consistent.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..clients import record_fixture
from ..manifest import ImageManifest, ObjectAnnotation, write_manifest
from ..pmap import write_pointmap
from .fixtures import problem_fixture_response
from .render import prune_occluded, render_scene
from .scene import OracleScene, SceneSamplerConfig, sample_scene, write_scenes

MIN_OBJECT_PIXELS = 30


@dataclass
class DatasetPaths:
    root: Path
    manifest: Path
    scenes: Path
    fixtures: Path | None = None

    @classmethod
    def under(cls, out_dir: str | Path,
              with_fixtures: bool = False) -> "DatasetPaths":
        root = Path(out_dir)
        return cls(root=root, manifest=root / "manifest.jsonl",
                   scenes=root / "scenes.jsonl",
                   fixtures=root / "fixtures" if with_fixtures else None)


def _mask_box(mask: np.ndarray) -> list[float]:
    rows, cols = np.nonzero(mask)
    return [float(cols.min()), float(rows.min()),
            float(cols.max() + 1), float(rows.max() + 1)]


def scene_to_files(scene: OracleScene, paths: DatasetPaths,
                   gt_boxes: bool, rng: np.random.Generator,
                   min_visible_fraction: float = 0.85
                   ) -> tuple[ImageManifest, OracleScene]:
    """Render one scene and write its pmap + masks; returns the manifest
    entry and the visibility-filtered ground truth."""
    scene = prune_occluded(scene, min_visible_fraction)
    pm, masks, _depth = render_scene(scene, rng=rng)
    pmap_rel = f"pmaps/{scene.scene_id}.pmap"
    pmap_path = paths.root / pmap_rel
    pmap_path.parent.mkdir(parents=True, exist_ok=True)
    write_pointmap(pm, pmap_path)

    annotations = []
    visible = []
    for obj in scene.objects:
        mask = masks[obj.object_id]
        if int(mask.sum()) < MIN_OBJECT_PIXELS:
            continue
        visible.append(obj)
        mask_rel = f"masks/{scene.scene_id}-{obj.object_id}.npy"
        mask_path = paths.root / mask_rel
        mask_path.parent.mkdir(parents=True, exist_ok=True)
        np.save(mask_path, mask, allow_pickle=False)
        ann = ObjectAnnotation(
            object_id=obj.object_id, category=obj.category,
            box2d=_mask_box(mask), mask=mask_rel, yaw_deg=obj.yaw_deg,
        )
        if gt_boxes:
            ann.box3d = {
                "center": [float(c) for c in obj.center],
                "size": [float(s) for s in obj.size],
                "yaw_deg": float(obj.yaw_deg),
            }
        annotations.append(ann)

    entry = ImageManifest(
        image_id=scene.scene_id, width=scene.width, height=scene.height,
        pointmap=pmap_rel, gravity=[float(g) for g in scene.gravity],
        intrinsics=scene.intrinsics,
        pixel_stats={"white": 0.0, "black": 0.0, "invalid_depth": 0.0},
        objects=annotations,
    )
    filtered = OracleScene(
        scene_id=scene.scene_id, width=scene.width, height=scene.height,
        intrinsics=scene.intrinsics, gravity=scene.gravity,
        objects=visible, noise_sigma=scene.noise_sigma,
        background_depth=scene.background_depth,
    )
    return entry, filtered


@dataclass
class GenerateResult:
    manifest_path: Path
    scenes_path: Path
    fixture_dir: Path | None
    n_scenes: int = 0
    n_objects: int = 0
    extras: dict = field(default_factory=dict)


def generate_dataset(seeds: range, out_dir: str | Path, sigma: float = 0.0,
                     gt_boxes: bool = True,
                     sampler: SceneSamplerConfig | None = None,
                     problem_fixtures: bool = False) -> GenerateResult:
    """Sample, render and persist a batch of oracle scenes."""
    paths = DatasetPaths.under(out_dir, with_fixtures=problem_fixtures)
    paths.root.mkdir(parents=True, exist_ok=True)
    entries = []
    truths = []
    for seed in seeds:
        scene = sample_scene(seed, config=sampler, noise_sigma=sigma)
        render_rng = np.random.default_rng(seed + 1_000_003)
        entry, truth = scene_to_files(scene, paths, gt_boxes, render_rng)
        entries.append(entry)
        truths.append(truth)
    write_manifest(entries, paths.manifest)
    write_scenes(truths, paths.scenes)

    if problem_fixtures:
        _write_problem_fixtures(paths, entries)

    return GenerateResult(
        manifest_path=paths.manifest, scenes_path=paths.scenes,
        fixture_dir=paths.fixtures, n_scenes=len(entries),
        n_objects=sum(len(e.objects) for e in entries),
    )


def _write_problem_fixtures(paths: DatasetPaths,
                            entries: list[ImageManifest]) -> None:
    """Record generator responses for the digests the pipeline will build.

    Runs the pipeline's own scene assembly (ground-truth boxes mode) so
    the recorded request keys match the later replay exactly.
    """
    from ..config import PipelineConfig
    from ..pipeline import build_scene
    from ..qa.problem import scene_digest

    config = PipelineConfig()
    for entry in entries:
        scene = build_scene(entry, paths.manifest, config)
        if not scene.objects:
            continue
        digest = scene_digest(scene)
        record_fixture(paths.fixtures, "problem-generator", digest,
                       problem_fixture_response(digest))
