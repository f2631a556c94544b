"""Batch generation and evaluation orchestration."""

import json
from pathlib import Path

import pytest

from spatialqa.clients import record_fixture
from spatialqa.config import PipelineConfig
from spatialqa.manifest import read_manifest
from spatialqa.oracle.gen import generate_dataset
from spatialqa.pipeline import (
    RunLedger,
    SceneSkipped,
    build_scene,
    read_corpus,
    run_evaluate,
    run_generate,
)


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("ds")
    result = generate_dataset(range(0, 6), out, sigma=0.0, gt_boxes=True)
    return result


class TestBuildScene:
    def test_scene_objects_and_refs(self, dataset):
        entries = read_manifest(dataset.manifest_path)
        config = PipelineConfig()
        scene = build_scene(entries[0], dataset.manifest_path, config)
        assert scene.pm is not None
        assert len(scene.objects) == len(entries[0].objects)
        assert set(scene.refs) == {o.object_id for o in scene.objects}

    def test_pixel_stats_filter_skips(self, dataset):
        entries = read_manifest(dataset.manifest_path)
        entry = entries[0]
        entry.pixel_stats = {"white": 0.5, "black": 0.0, "invalid_depth": 0.0}
        with pytest.raises(SceneSkipped, match="pure-pixel"):
            build_scene(entry, dataset.manifest_path, PipelineConfig())

    def test_tag_filter_skips(self, dataset):
        entries = read_manifest(dataset.manifest_path)
        entry = entries[0]
        entry.tags = ["chart", "chart", "chart", "photo", "photo"]
        config = PipelineConfig(tag_include=["photo"], tag_exclude=["chart"])
        with pytest.raises(SceneSkipped, match="tag vote"):
            build_scene(entry, dataset.manifest_path, config)

    def test_manifest_grounding_records_skip_client(self, dataset):
        entries = read_manifest(dataset.manifest_path)
        entry = entries[0]
        ann = entry.objects[0]
        ann.captions = ["an ambiguous thing", "a very specific thing"]
        ann.grounding = [
            {"boxes": [[0, 0, 5, 5], [5, 5, 9, 9]]},   # ambiguous
            {"boxes": [list(ann.box2d)]},               # exact match
        ]
        # no grounder client configured: records alone drive verification
        scene = build_scene(entry, dataset.manifest_path, PipelineConfig())
        assert scene.refs[ann.object_id].kind == "textual"
        assert scene.refs[ann.object_id].text == "a very specific thing"

    def test_grounder_verification_flow(self, dataset, tmp_path):
        entries = read_manifest(dataset.manifest_path)
        entry = entries[0]
        ann = entry.objects[0]
        ann.captions = ["an ambiguous thing", "a very specific thing"]
        # first caption: two boxes (ambiguous); second: one box, high IoU
        record_fixture(tmp_path, "grounder",
                       {"image_id": entry.image_id,
                        "caption": "an ambiguous thing"},
                       {"boxes": [[0, 0, 5, 5], [5, 5, 9, 9]]})
        record_fixture(tmp_path, "grounder",
                       {"image_id": entry.image_id,
                        "caption": "a very specific thing"},
                       {"boxes": [list(ann.box2d)]})
        config = PipelineConfig(
            clients={"grounder": {"fixture_dir": str(tmp_path)}})
        from spatialqa.clients import build_clients
        scene = build_scene(entry, dataset.manifest_path, config,
                            build_clients(config.clients))
        assert scene.refs[ann.object_id].kind == "textual"
        assert scene.refs[ann.object_id].text == "a very specific thing"


class TestRunGenerate:
    def test_worker_counts_agree_byte_for_byte(self, dataset, tmp_path):
        config1 = PipelineConfig(workers=1, seed=0)
        config2 = PipelineConfig(workers=4, seed=0)
        run_generate(dataset.manifest_path, config1, tmp_path / "w1")
        run_generate(dataset.manifest_path, config2, tmp_path / "w4")
        c1 = (tmp_path / "w1" / "corpus.jsonl").read_bytes()
        c4 = (tmp_path / "w4" / "corpus.jsonl").read_bytes()
        assert c1 == c4
        assert len(c1) > 0

    def test_resume_reproduces_uninterrupted_corpus(self, dataset, tmp_path):
        config = PipelineConfig(workers=1, seed=0)
        run_generate(dataset.manifest_path, config, tmp_path / "full")
        ledger1 = run_generate(dataset.manifest_path, config,
                               tmp_path / "resumed", limit=3)
        assert ledger1.summary.get("done") == 3
        ledger2 = run_generate(dataset.manifest_path, config,
                               tmp_path / "resumed")
        assert ledger2.summary.get("skipped") == 3
        assert ledger2.summary.get("done") == 3
        full = (tmp_path / "full" / "corpus.jsonl").read_bytes()
        resumed = (tmp_path / "resumed" / "corpus.jsonl").read_bytes()
        assert full == resumed

    def test_ledger_partitions_manifest(self, dataset, tmp_path):
        config = PipelineConfig(workers=1, seed=0)
        ledger = run_generate(dataset.manifest_path, config, tmp_path / "o",
                              limit=2)
        entries = read_manifest(dataset.manifest_path)
        assert len(ledger.statuses) == len(entries)
        total = sum(ledger.summary.values())
        assert total == len(entries)

    def test_corrupt_pointmap_isolated(self, dataset, tmp_path):
        # copy the dataset, truncate one pmap file
        import shutil
        broken = tmp_path / "broken"
        shutil.copytree(Path(dataset.manifest_path).parent, broken)
        entries = read_manifest(broken / "manifest.jsonl")
        victim = entries[1]
        pmap_path = broken / victim.pointmap
        pmap_path.write_bytes(pmap_path.read_bytes()[:40])
        config = PipelineConfig(workers=1, seed=0)
        ledger = run_generate(broken / "manifest.jsonl", config,
                              tmp_path / "out")
        assert ledger.statuses[victim.image_id]["status"] == "failed"
        assert "offset" in ledger.statuses[victim.image_id]["reason"]
        done = [s for s in ledger.statuses.values() if s["status"] == "done"]
        assert len(done) == len(entries) - 1

    def test_ledger_counts_match_corpus(self, dataset, tmp_path):
        config = PipelineConfig(workers=1, seed=0)
        ledger = run_generate(dataset.manifest_path, config, tmp_path / "o2")
        items = read_corpus(tmp_path / "o2" / "corpus.jsonl")
        assert sum(ledger.family_counts.values()) == len(items)


class TestRunEvaluate:
    def _respond(self, corpus_path, responses_path, skip=()):
        items = read_corpus(corpus_path)
        with open(responses_path, "w") as f:
            for item in items:
                if item["item_id"] in skip:
                    continue
                f.write(json.dumps({"item_id": item["item_id"],
                                    "response": item["answer"]}) + "\n")
        return items

    def test_full_join(self, dataset, tmp_path):
        config = PipelineConfig(workers=1, seed=0)
        run_generate(dataset.manifest_path, config, tmp_path / "g")
        corpus = tmp_path / "g" / "corpus.jsonl"
        responses = tmp_path / "responses.jsonl"
        items = self._respond(corpus, responses)
        rep = run_evaluate(corpus, responses, config, tmp_path / "r")
        assert rep.overall["n"] == len(items)
        assert rep.overall["accuracy"] == 1.0
        assert (tmp_path / "r" / "report.json").exists()
        assert (tmp_path / "r" / "report.txt").exists()

    def test_missing_responses_counted(self, dataset, tmp_path):
        config = PipelineConfig(workers=1, seed=0)
        run_generate(dataset.manifest_path, config, tmp_path / "g2")
        corpus = tmp_path / "g2" / "corpus.jsonl"
        items = read_corpus(corpus)
        skip = {items[0]["item_id"], items[1]["item_id"]}
        responses = tmp_path / "responses2.jsonl"
        self._respond(corpus, responses, skip=skip)
        rep = run_evaluate(corpus, responses, config, tmp_path / "r2")
        assert rep.missing == 2
        assert rep.overall["correct"] == len(items) - 2

    def test_judge_verdicts_cached_and_reused(self, dataset, tmp_path):
        # craft a judgement problem item manually
        corpus = tmp_path / "corpus.jsonl"
        item = {
            "schema_version": 1, "item_id": "img:problem_solving:0001",
            "image_id": "img", "level": 3, "family": "problem_solving",
            "format": "free-form", "prompt": "Is it?", "answer": "yes",
            "payload": {"kind": "label", "value": "yes"}, "provenance": {},
        }
        corpus.write_text(json.dumps(item) + "\n")
        responses = tmp_path / "resp.jsonl"
        responses.write_text(json.dumps(
            {"item_id": item["item_id"], "response": "definitely"}) + "\n")
        fixtures = tmp_path / "fx"
        record_fixture(fixtures, "judge",
                       {"item_id": item["item_id"], "question": "Is it?",
                        "answer": "yes", "response": "definitely"},
                       {"verdict": "match"})
        config = PipelineConfig(
            clients={"judge": {"fixture_dir": str(fixtures)}},
            cache_dir=str(tmp_path / "cache"))
        rep1 = run_evaluate(corpus, responses, config, tmp_path / "rj")
        assert rep1.overall["correct"] == 1
        # remove the fixture: the cached verdict must still drive scoring
        for f in (fixtures / "judge").glob("*.json"):
            f.unlink()
        rep2 = run_evaluate(corpus, responses, config, tmp_path / "rj2")
        assert rep2.overall["correct"] == 1

    def test_bad_responses_schema_raises(self, dataset, tmp_path):
        corpus = tmp_path / "c.jsonl"
        corpus.write_text("")
        bad = tmp_path / "bad.jsonl"
        bad.write_text("not json\n")
        from spatialqa.manifest import ManifestError
        with pytest.raises(ManifestError):
            run_evaluate(corpus, bad, PipelineConfig(), tmp_path / "rr")


class TestLedger:
    def test_summary(self):
        ledger = RunLedger()
        ledger.add("a", "done")
        ledger.add("b", "failed", "boom")
        ledger.add("c", "skipped", "already done")
        assert ledger.summary == {"done": 1, "failed": 1, "skipped": 1}
        d = ledger.to_dict()
        assert d["statuses"]["b"]["reason"] == "boom"
