"""Batch orchestration: manifests in, corpus and reports out.

Generation processes images independently (work pool over the manifest),
persists one part file per image via write-then-rename, and assembles
the corpus in manifest order at the end.  Per-image seeds derive from
(corpus seed, image id), so the corpus bytes are independent of worker
count, scheduling, and interruption; a rerun skips images whose part
files already exist.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .assignment import box_iou
from .clients import Client, ClientError, build_clients
from .config import PipelineConfig, config_from_dict
from .dbscan import dbscan_largest_cluster, default_eps, default_min_pts
from .evalharness import Report, render_report, report, score_item
from .filters import heuristic_image_filter, tag_vote_filter
from .geometry import (
    Box3D,
    EmptyObjectError,
    GeometryError,
    IDENTITY_GRAVITY,
    extract_object_points,
    fit_box3d,
    gravity_frame,
)
from .manifest import ImageManifest, ManifestError, read_manifest, resolve_path
from .pmap import PmapError, read_pointmap
from .qa.items import QAItem, canonical_json, derive_seed
from .qa.problem import scene_digest, validate_candidates
from .qa.synth import Scene, synthesize_scene_qa
from .references import assign_references, verify_textual_reference
from .relations import SceneObject


class SceneSkipped(Exception):
    """Image filtered out or not processable; carries the reason."""


@dataclass
class RunLedger:
    statuses: dict[str, dict] = field(default_factory=dict)
    family_counts: dict[str, int] = field(default_factory=dict)
    wall_seconds: float = 0.0

    def add(self, image_id: str, status: str, reason: str | None = None):
        entry = {"status": status}
        if reason:
            entry["reason"] = reason
        self.statuses[image_id] = entry

    @property
    def summary(self) -> dict:
        counts: dict[str, int] = {}
        for entry in self.statuses.values():
            counts[entry["status"]] = counts.get(entry["status"], 0) + 1
        return counts

    def to_dict(self) -> dict:
        return {"statuses": self.statuses, "summary": self.summary,
                "family_counts": self.family_counts,
                "wall_seconds": round(self.wall_seconds, 3)}


# ---------------------------------------------------------------------------
# Scene construction from one manifest entry
# ---------------------------------------------------------------------------

def _apply_filters(entry: ImageManifest, config: PipelineConfig) -> None:
    if entry.pixel_stats is not None:
        stats = entry.pixel_stats
        decision = heuristic_image_filter(
            float(stats.get("white", 0.0)), float(stats.get("black", 0.0)),
            float(stats.get("invalid_depth", 0.0)))
        if not decision.keep:
            raise SceneSkipped("; ".join(decision.reasons))
    if entry.tags is not None and (config.tag_include or config.tag_exclude):
        decision = tag_vote_filter(entry.tags, config.tag_include,
                                   config.tag_exclude)
        if not decision.keep:
            raise SceneSkipped(decision.reasons[0])


def _estimate_object(entry: ImageManifest, ann, pm, gf,
                     manifest_path) -> SceneObject | None:
    if ann.box3d is not None:
        # ground-truth annotation: the estimation pipeline is skipped
        box = Box3D.from_dict(ann.box3d)
        yaw = ann.yaw_deg if ann.yaw_deg is not None \
            else float(ann.box3d["yaw_deg"])
        return SceneObject(object_id=ann.object_id, category=ann.category,
                           box=box, yaw_deg=yaw, pitch_deg=ann.pitch_deg)
    if ann.mask is None:
        return None
    mask = np.load(resolve_path(manifest_path, ann.mask),
                   allow_pickle=False)
    try:
        cloud = extract_object_points(pm, mask, object_id=ann.object_id)
        cloud = dbscan_largest_cluster(
            cloud, eps=default_eps(cloud.points),
            min_pts=default_min_pts(len(cloud)))
        box = fit_box3d(cloud, gf, yaw_hint_deg=ann.yaw_deg)
    except EmptyObjectError:
        return None
    return SceneObject(object_id=ann.object_id, category=ann.category,
                       box=box, yaw_deg=ann.yaw_deg, pitch_deg=ann.pitch_deg)


def _verified_captions(entry: ImageManifest, objects: list[SceneObject],
                       grounder: Client | None) -> dict[str, str]:
    """Simplest caption per object that survives grounding verification.

    Grounder boxes come from precomputed manifest `grounding` records when
    present, otherwise from the grounder client; objects with neither are
    left for the spatial/fallback reference kinds.
    """
    by_id = {ann.object_id: ann for ann in entry.objects}
    verified: dict[str, str] = {}
    for obj in objects:
        ann = by_id.get(obj.object_id)
        if ann is None or not ann.captions:
            continue
        for i, caption in enumerate(ann.captions):
            if ann.grounding is not None:
                if i >= len(ann.grounding):
                    break
                boxes = ann.grounding[i].get("boxes", [])
            elif grounder is not None:
                boxes = grounder.call(
                    {"image_id": entry.image_id, "caption": caption}
                ).get("boxes", [])
            else:
                break
            iou = box_iou(boxes[0], ann.box2d) if len(boxes) == 1 else 0.0
            if verify_textual_reference(boxes, iou):
                verified[obj.object_id] = caption
                break
    return verified


def build_scene(entry: ImageManifest, manifest_path: str | Path,
                config: PipelineConfig,
                clients: dict[str, Client] | None = None) -> Scene:
    """Manifest entry -> Scene: filters, geometry, references."""
    clients = clients or {}
    _apply_filters(entry, config)
    pm = read_pointmap(resolve_path(manifest_path, entry.pointmap))
    gravity = np.asarray(entry.gravity, dtype=float) \
        if entry.gravity is not None else IDENTITY_GRAVITY.copy()
    gf = gravity_frame(gravity)

    objects: list[SceneObject] = []
    boxes2d: dict[str, list] = {}
    for ann in entry.objects:
        obj = _estimate_object(entry, ann, pm, gf, manifest_path)
        if obj is not None:
            objects.append(obj)
            boxes2d[obj.object_id] = list(ann.box2d)

    captions = _verified_captions(entry, objects, clients.get("grounder"))
    refs = assign_references(objects, gf, verified_captions=captions,
                             boxes2d=boxes2d, guards=config.synth.guards)
    return Scene(image_id=entry.image_id, objects=objects, refs=refs,
                 gf=gf, gravity=gravity, pm=pm,
                 intrinsics=entry.intrinsics)


def process_image(entry: ImageManifest, manifest_path: str | Path,
                  config: PipelineConfig,
                  clients: dict[str, Client] | None = None) -> list[QAItem]:
    """Full per-image flow: scene, problems via client, QA synthesis."""
    clients = clients or {}
    scene = build_scene(entry, manifest_path, config, clients)
    problems = []
    generator = clients.get("problem-generator")
    if generator is not None and scene.objects:
        digest = scene_digest(scene)
        response = generator.call(digest)
        problems, _rejected = validate_candidates(
            digest, response.get("candidates", []))
    seed = derive_seed(config.seed, entry.image_id)
    return synthesize_scene_qa(scene, config.synth, seed, problems=problems)


# ---------------------------------------------------------------------------
# Parallel, resumable generation
# ---------------------------------------------------------------------------

def _part_path(parts_dir: Path, image_id: str) -> Path:
    return parts_dir / f"{image_id}.json"


def _write_part(parts_dir: Path, image_id: str, status: str,
                reason: str | None, items: list[QAItem]) -> dict:
    part = {
        "image_id": image_id,
        "status": status,
        "reason": reason,
        "families": {},
        "lines": [item.to_json() for item in items],
    }
    for item in items:
        part["families"][item.family] = part["families"].get(item.family, 0) + 1
    path = _part_path(parts_dir, image_id)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(canonical_json(part), encoding="utf-8")
    tmp.replace(path)
    return part


def _process_entry_to_part(entry_dict: dict, manifest_path: str,
                           config_dict: dict, parts_dir: str) -> dict:
    """Worker body: one image to one part file (picklable inputs)."""
    entry = ImageManifest.from_dict(entry_dict)
    config = config_from_dict(config_dict)
    clients = build_clients(config.clients, cache_dir=config.cache_dir)
    parts = Path(parts_dir)
    try:
        items = process_image(entry, manifest_path, config, clients)
    except SceneSkipped as e:
        return _write_part(parts, entry.image_id, "skipped", str(e), [])
    except (PmapError, ManifestError, ClientError, GeometryError,
            OSError, ValueError, KeyError) as e:
        return _write_part(parts, entry.image_id, "failed",
                           f"{type(e).__name__}: {e}", [])
    return _write_part(parts, entry.image_id, "done", None, items)


def run_generate(manifest_path: str | Path, config: PipelineConfig,
                 out_dir: str | Path,
                 limit: int | None = None) -> RunLedger:
    """Generate the corpus for a manifest; resumable and order-stable.

    Returns the run ledger; writes corpus.jsonl, ledger.json and
    parts/*.json under out_dir.
    """
    start = time.monotonic()
    manifest_path = str(manifest_path)
    out = Path(out_dir)
    parts_dir = out / "parts"
    parts_dir.mkdir(parents=True, exist_ok=True)
    entries = read_manifest(manifest_path)
    ledger = RunLedger()

    selected = entries if limit is None else entries[:limit]
    for entry in entries[len(selected):]:
        ledger.add(entry.image_id, "skipped", "beyond --limit")

    todo = []
    for entry in selected:
        part_path = _part_path(parts_dir, entry.image_id)
        if part_path.exists():
            part = json.loads(part_path.read_text(encoding="utf-8"))
            if part.get("status") == "done":
                ledger.add(entry.image_id, "skipped", "already done")
                continue
        todo.append(entry)

    config_dict = config.to_dict()
    if config.workers <= 1 or len(todo) <= 1:
        results = [
            _process_entry_to_part(e.to_dict(), manifest_path, config_dict,
                                   str(parts_dir))
            for e in todo
        ]
    else:
        results = []
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            futures = [
                pool.submit(_process_entry_to_part, e.to_dict(),
                            manifest_path, config_dict, str(parts_dir))
                for e in todo
            ]
            for future in as_completed(futures):
                results.append(future.result())

    for part in results:
        ledger.add(part["image_id"], part["status"], part.get("reason"))

    corpus_path = out / "corpus.jsonl"
    family_counts: dict[str, int] = {}
    with open(corpus_path, "w", encoding="utf-8") as f:
        for entry in entries:
            part_path = _part_path(parts_dir, entry.image_id)
            if not part_path.exists():
                continue
            part = json.loads(part_path.read_text(encoding="utf-8"))
            if part.get("status") != "done":
                continue
            for line in part["lines"]:
                f.write(line + "\n")
            for family, count in part.get("families", {}).items():
                family_counts[family] = family_counts.get(family, 0) + count

    ledger.family_counts = family_counts
    ledger.wall_seconds = time.monotonic() - start
    (out / "ledger.json").write_text(
        json.dumps(ledger.to_dict(), sort_keys=True, indent=1),
        encoding="utf-8")
    return ledger


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def read_corpus(path: str | Path) -> list[dict]:
    items = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                items.append(json.loads(line))
            except json.JSONDecodeError as e:
                raise ManifestError(f"corpus line {lineno}: {e}") from e
    return items


def read_responses(path: str | Path) -> dict[str, str]:
    responses = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                responses[record["item_id"]] = record["response"]
            except (json.JSONDecodeError, KeyError, TypeError) as e:
                raise ManifestError(f"responses line {lineno}: {e}") from e
    return responses


def run_evaluate(corpus_path: str | Path, responses_path: str | Path,
                 config: PipelineConfig, out_dir: str | Path) -> Report:
    """Join corpus with responses, score, and write report files."""
    items = read_corpus(corpus_path)
    responses = read_responses(responses_path)
    clients = build_clients(config.clients, cache_dir=config.cache_dir)
    judge = clients.get("judge")

    records = []
    for item in items:
        response = responses.get(item["item_id"])
        verdict = None
        if (judge is not None and response is not None
                and item["family"] == "problem_solving"
                and item["payload"]["kind"] == "label"):
            verdict = judge.call({
                "item_id": item["item_id"], "question": item["prompt"],
                "answer": item["answer"], "response": response,
            }).get("verdict")
        records.append(score_item(item, response, judge_verdict=verdict,
                                  band=config.band))

    rep = report(records)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(
        json.dumps(rep.to_dict(), sort_keys=True, indent=1), encoding="utf-8")
    (out / "report.txt").write_text(render_report(rep), encoding="utf-8")
    with open(out / "records.jsonl", "w", encoding="utf-8") as f:
        for record in records:
            f.write(canonical_json(record.to_dict()) + "\n")
    return rep
