"""Scoring of model responses and benchmark report generation.

Rules, all boundaries inclusive:

  ratio-tight     pred/gt in [0.75, 1.25]
  ratio-wide      pred/gt in [0.5, 2.0]
  direction-30deg angle(pred, gt) <= 30 degrees between unit vectors
  problem-25pct   numeric problem answers within 25% (the same ratio band
                  as ratio-tight); judgement answers by judge verdict when
                  cached, else normalized exact match
  mcq             option letter or full option text after normalization
  true-false      True/False after normalization
  label-exact     normalized label match (the truth token must appear)
  count-exact     integer equality
  vector-relative relative Euclidean error of a 3D point <= 25%

Parse failures and missing responses are incorrect but tracked separately
so report consumers can distinguish them.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .quantity import parse_quantity, parse_triple

TIGHT_BAND = (0.75, 1.25)
WIDE_BAND = (0.5, 2.0)
DIRECTION_LIMIT_DEG = 30.0
PROBLEM_TOLERANCE = 0.25
VECTOR_TOLERANCE = 0.25

_ARTICLES = re.compile(r"\b(a|an|the)\b")
_NON_ALNUM = re.compile(r"[^a-z0-9\s.-]")
_WS = re.compile(r"\s+")


class EvalError(Exception):
    pass


@dataclass
class EvalRecord:
    item_id: str
    raw_response: str | None
    rule: str
    correct: bool
    parsed: float | str | list | None = None
    error: float | None = None          # ratio, degrees or relative error
    family: str | None = None
    level: int | None = None
    format: str | None = None
    note: str | None = None

    def to_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if v is not None
                or k in ("raw_response", "correct")}


def normalize_text(text: str) -> str:
    t = text.strip().lower()
    t = _NON_ALNUM.sub(" ", t)
    t = _ARTICLES.sub(" ", t)
    return _WS.sub(" ", t).strip()


def _light_normalize(text: str) -> str:
    """Lowercase and strip punctuation but keep articles (an MCQ letter
    "a" would otherwise vanish)."""
    t = text.strip().lower()
    t = _NON_ALNUM.sub(" ", t)
    return _WS.sub(" ", t).strip()


# ---------------------------------------------------------------------------
# Scoring primitives
# ---------------------------------------------------------------------------

def parse_numeric(response: str) -> float | None:
    """Final numeric quantity in the response, normalized to meters."""
    return parse_quantity(response)


def score_ratio(pred: float, gt: float, band: str = "tight") -> tuple[bool, float]:
    """(correct, pred/gt ratio); boundaries inclusive."""
    if gt <= 0:
        raise EvalError(f"ratio scoring requires positive ground truth, got {gt}")
    lo, hi = TIGHT_BAND if band == "tight" else WIDE_BAND
    ratio = pred / gt
    return lo <= ratio <= hi, ratio


def score_direction(pred, gt) -> tuple[bool, float]:
    """(correct, angular error in degrees); 30 degrees inclusive."""
    p = np.asarray(pred, dtype=float)
    g = np.asarray(gt, dtype=float)
    pn, gn = np.linalg.norm(p), np.linalg.norm(g)
    if pn == 0 or gn == 0:
        return False, 180.0
    cos = float(np.clip(np.dot(p / pn, g / gn), -1.0, 1.0))
    angle = math.degrees(math.acos(cos))
    return angle <= DIRECTION_LIMIT_DEG, angle


def score_problem_numeric(pred: float, gt: float) -> tuple[bool, float]:
    ok, ratio = score_ratio(pred, gt, band="tight")
    return ok, ratio


def score_mcq(response: str, gt_letter: str,
              options: list[str] | None = None) -> bool:
    """Extract the chosen option letter or match full option text.

    Tries, in order: a leading letter ("B", "(b) ..."), an announced
    letter ("the answer is B"), a unique standalone letter anywhere, and
    finally the option text itself.
    """
    light = _light_normalize(response)
    if not light:
        return False
    gt = gt_letter.lower()
    m = re.match(r"^\(?([a-d])\)?(?![a-z0-9])", light)
    if m:
        return m.group(1) == gt
    m = re.search(r"(?:answer|option|choice)(?:\s+is)?\s*:?\s*\(?([a-d])\)?"
                  r"(?![a-z0-9])", light)
    if m:
        return m.group(1) == gt
    standalone = set(re.findall(r"(?:^|\s)\(?([a-d])\)?(?![a-z0-9])", light))
    if len(standalone) == 1:
        return standalone.pop() == gt
    if options:
        norm = normalize_text(response)
        correct_text = normalize_text(options["ABCD".index(gt_letter)])
        if correct_text and (norm == correct_text or correct_text in norm):
            others = [normalize_text(o) for i, o in enumerate(options)
                      if "ABCD"[i] != gt_letter]
            if not any(o in norm for o in others if o):
                return True
    return False


def score_tf(response: str, gt: str) -> bool:
    norm = normalize_text(response)
    truthy = bool(re.search(r"\b(?:true|yes|correct)\b", norm)) or norm == "t"
    falsy = bool(re.search(r"\b(?:false|no|incorrect)\b", norm)) or norm == "f"
    if truthy == falsy:
        return False
    return truthy if gt == "True" else falsy


def score_label(response: str, gt: str) -> bool:
    norm = normalize_text(response)
    gt_norm = normalize_text(gt)
    if norm == gt_norm:
        return True
    return bool(re.search(rf"(?:^|\s){re.escape(gt_norm)}(?:$|\s)", norm))


# ---------------------------------------------------------------------------
# Item-level dispatch
# ---------------------------------------------------------------------------

def score_item(item: dict, response: str | None,
               judge_verdict: str | None = None,
               band: str = "tight") -> EvalRecord:
    """Score one response against a corpus item (QAItem dict form)."""
    meta = {"family": item.get("family"), "level": item.get("level"),
            "format": item.get("format")}
    if response is None:
        return EvalRecord(item_id=item["item_id"], raw_response=None,
                          rule="missing", correct=False, note="missing",
                          **meta)

    fmt = item["format"]
    payload = item["payload"]
    if fmt == "mcq":
        ok = score_mcq(response, item["answer"], item.get("options"))
        return EvalRecord(item_id=item["item_id"], raw_response=response,
                          rule="mcq", correct=ok, **meta)
    if fmt == "true-false":
        ok = score_tf(response, item["answer"])
        return EvalRecord(item_id=item["item_id"], raw_response=response,
                          rule="true-false", correct=ok, **meta)

    kind = payload["kind"]
    if item.get("family") == "problem_solving":
        return _score_problem(item, response, judge_verdict, meta)
    if kind == "quantity":
        pred = parse_numeric(response)
        if pred is None:
            return EvalRecord(item_id=item["item_id"], raw_response=response,
                              rule=f"ratio-{band}", correct=False,
                              note="parse-failure", **meta)
        ok, ratio = score_ratio(pred, float(payload["value"]), band)
        return EvalRecord(item_id=item["item_id"], raw_response=response,
                          rule=f"ratio-{band}", correct=ok, parsed=pred,
                          error=ratio, **meta)
    if kind == "unit-vector":
        pred = parse_triple(response)
        if pred is None:
            return EvalRecord(item_id=item["item_id"], raw_response=response,
                              rule="direction-30deg", correct=False,
                              note="parse-failure", **meta)
        ok, angle = score_direction(pred, payload["value"])
        return EvalRecord(item_id=item["item_id"], raw_response=response,
                          rule="direction-30deg", correct=ok,
                          parsed=list(pred), error=angle, **meta)
    if kind == "vector3":
        pred = parse_triple(response)
        if pred is None:
            return EvalRecord(item_id=item["item_id"], raw_response=response,
                              rule="vector-relative", correct=False,
                              note="parse-failure", **meta)
        gt = np.asarray(payload["value"], dtype=float)
        err = float(np.linalg.norm(np.asarray(pred) - gt))
        rel = err / max(float(np.linalg.norm(gt)), 1e-9)
        return EvalRecord(item_id=item["item_id"], raw_response=response,
                          rule="vector-relative",
                          correct=rel <= VECTOR_TOLERANCE,
                          parsed=list(pred), error=rel, **meta)
    if kind == "count":
        m = re.search(r"-?\d+", response)
        ok = m is not None and int(m.group(0)) == int(payload["value"])
        return EvalRecord(item_id=item["item_id"], raw_response=response,
                          rule="count-exact", correct=ok,
                          parsed=int(m.group(0)) if m else None, **meta)
    ok = score_label(response, str(payload["value"]))
    return EvalRecord(item_id=item["item_id"], raw_response=response,
                      rule="label-exact", correct=ok, **meta)


def _score_problem(item: dict, response: str,
                   judge_verdict: str | None, meta: dict) -> EvalRecord:
    payload = item["payload"]
    if payload["kind"] == "quantity":
        pred = parse_numeric(response)
        if pred is None:
            return EvalRecord(item_id=item["item_id"], raw_response=response,
                              rule="problem-25pct", correct=False,
                              note="parse-failure", **meta)
        ok, ratio = score_problem_numeric(pred, float(payload["value"]))
        return EvalRecord(item_id=item["item_id"], raw_response=response,
                          rule="problem-25pct", correct=ok, parsed=pred,
                          error=ratio, **meta)
    if judge_verdict is not None:
        ok = judge_verdict.strip().lower() == "match"
        return EvalRecord(item_id=item["item_id"], raw_response=response,
                          rule="problem-25pct", correct=ok,
                          note="judge-verdict", **meta)
    ok = score_label(response, str(payload["value"]))
    return EvalRecord(item_id=item["item_id"], raw_response=response,
                      rule="problem-25pct", correct=ok, **meta)


# ---------------------------------------------------------------------------
# Reporting
# ---------------------------------------------------------------------------

@dataclass
class Report:
    overall: dict = field(default_factory=dict)
    groups: dict[str, dict] = field(default_factory=dict)   # axis -> table
    missing: int = 0

    def to_dict(self) -> dict:
        return {"overall": self.overall, "groups": self.groups,
                "missing": self.missing}


def _accuracy(records: list[EvalRecord]) -> dict:
    n = len(records)
    correct = sum(1 for r in records if r.correct)
    entry = {"n": n, "correct": correct}
    entry["accuracy"] = correct / n if n else None
    return entry


def report(records: list[EvalRecord],
           groupings: tuple[str, ...] = ("family", "level", "format", "rule")
           ) -> Report:
    """Accuracy per group; groups with n=0 are simply absent, and overall
    accuracy is None (undefined marker) when no records exist."""
    rep = Report()
    rep.overall = _accuracy(records)
    rep.missing = sum(1 for r in records if r.rule == "missing")
    for axis in groupings:
        table: dict[str, dict] = {}
        for rec in records:
            key = getattr(rec, axis)
            if key is None:
                continue
            table.setdefault(str(key), []).append(rec)
        rep.groups[axis] = {k: _accuracy(v) for k, v in sorted(table.items())}
    return rep


def render_report(rep: Report) -> str:
    lines = []
    overall = rep.overall
    acc = overall.get("accuracy")
    acc_text = f"{acc * 100:.2f}%" if acc is not None else "n/a (n=0)"
    lines.append(f"overall  n={overall.get('n', 0)}  accuracy={acc_text}")
    if rep.missing:
        lines.append(f"missing responses: {rep.missing}")
    for axis, table in rep.groups.items():
        lines.append("")
        lines.append(f"by {axis}:")
        width = max((len(k) for k in table), default=0)
        for key, entry in table.items():
            acc = entry["accuracy"]
            acc_text = f"{acc * 100:6.2f}%" if acc is not None else "   n/a"
            lines.append(f"  {key:<{width}}  n={entry['n']:<6d} "
                         f"correct={entry['correct']:<6d} {acc_text}")
    return "\n".join(lines) + "\n"
