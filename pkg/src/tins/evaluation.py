"""Average precision, mAP, pooled ground truth, and report files.

AP uses the full-recall denominator (the size of the relevant set, not the
cutoff), matching trec_eval semantics; relevant shots never retrieved
within the cutoff contribute zero.  Pooled ground truth rebuilds the
relevance judgments from the runs themselves: per topic, the union over
runs of truly relevant shots appearing within the pooling depth.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import DataError

DEFAULT_CUTOFF = 300


@dataclass
class GroundTruth:
    """Per-topic relevant shot sets, tagged with how they were obtained."""

    relevant: dict[str, set[str]]
    provenance: str = "true"  # true | pooled

    def topics(self) -> list[str]:
        return sorted(self.relevant)


def average_precision(ranked_shots: Sequence[str], relevant: set[str],
                      cutoff: int = DEFAULT_CUTOFF) -> float:
    """AP of one ranked shot list against a non-empty relevant set."""
    if not relevant:
        raise ValueError("relevant set is empty; AP is undefined")
    if cutoff < 1:
        raise ValueError(f"cutoff must be >= 1, got {cutoff}")
    hits = 0
    total = 0.0
    for rank, shot in enumerate(ranked_shots[:cutoff], start=1):
        if shot in relevant:
            hits += 1
            total += hits / rank
    return total / len(relevant)


def mean_ap(per_topic: Mapping[str, float]) -> float:
    if not per_topic:
        raise ValueError("no topics to average")
    return sum(per_topic.values()) / len(per_topic)


@dataclass
class EvalReport:
    per_topic: dict[str, float]
    map: float
    cutoff: int
    config: dict = field(default_factory=dict)  # r, w, k, voting, nprobe, ...
    skipped: list[str] = field(default_factory=list)


def evaluate_run(run: Mapping[str, Sequence[str]], truth: GroundTruth,
                 cutoff: int = DEFAULT_CUTOFF, config: dict | None = None
                 ) -> EvalReport:
    """Per-topic AP and mAP of a run against ground truth.

    Topics whose relevant set is empty are excluded from the mean with a
    warning.  Topics absent from the run score zero.
    """
    per_topic: dict[str, float] = {}
    skipped: list[str] = []
    for topic in truth.topics():
        relevant = truth.relevant[topic]
        if not relevant:
            skipped.append(topic)
            warnings.warn(f"topic {topic!r} has an empty relevant set; excluded from mAP")
            continue
        per_topic[topic] = average_precision(run.get(topic, ()), relevant, cutoff)
    return EvalReport(per_topic=per_topic, map=mean_ap(per_topic), cutoff=cutoff,
                      config=dict(config or {}), skipped=skipped)


def pooled_ground_truth(runs: Iterable[Mapping[str, Sequence[str]]],
                        truth: GroundTruth, depth: int = DEFAULT_CUTOFF,
                        known_shots: set[str] | None = None) -> GroundTruth:
    """Judge only the top `depth` shots of every run, per topic.

    A shot enters the pool iff some run ranks it within `depth` and the
    oracle (`truth`) marks it relevant, so the pool is always a subset of
    the true relevant sets.
    """
    pooled: dict[str, set[str]] = {topic: set() for topic in truth.relevant}
    for run in runs:
        for topic, ranked in run.items():
            if topic not in truth.relevant:
                raise DataError(f"run topic {topic!r} unknown to the oracle")
            for shot in ranked[:depth]:
                if known_shots is not None and shot not in known_shots:
                    raise DataError(f"run references unknown shot {shot!r}")
                if shot in truth.relevant[topic]:
                    pooled[topic].add(shot)
    return GroundTruth(relevant=pooled, provenance="pooled")


@dataclass
class DeltaReport:
    per_topic: dict[str, float]  # b - a
    delta_map: float
    relative: float  # delta_map / a.map (nan when a.map == 0)


def delta_report(a: EvalReport, b: EvalReport) -> DeltaReport:
    """Signed AP differences b - a over a shared topic set."""
    if set(a.per_topic) != set(b.per_topic):
        raise ValueError("reports cover different topic sets")
    per_topic = {t: b.per_topic[t] - a.per_topic[t] for t in sorted(a.per_topic)}
    delta = b.map - a.map
    relative = delta / a.map if a.map != 0 else float("nan")
    return DeltaReport(per_topic=per_topic, delta_map=delta, relative=relative)


# --- files ------------------------------------------------------------------

def read_ground_truth(path, provenance: str = "true") -> GroundTruth:
    """Lines of `<topic> <shot_id>`."""
    relevant: dict[str, set[str]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise DataError(f"line {lineno}: expected '<topic> <shot_id>'")
            relevant.setdefault(parts[0], set()).add(parts[1])
    return GroundTruth(relevant=relevant, provenance=provenance)


def write_ground_truth(truth: GroundTruth, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for topic in truth.topics():
            for shot in sorted(truth.relevant[topic]):
                fh.write(f"{topic} {shot}\n")


def write_report(report: EvalReport, path) -> None:
    """JSON-lines report: one record per topic, then a summary record."""
    with open(path, "w", encoding="utf-8") as fh:
        for topic in sorted(report.per_topic):
            fh.write(json.dumps({"topic": topic, "ap": report.per_topic[topic]},
                                separators=(",", ":")) + "\n")
        summary = {"map": report.map}
        for key in ("r", "w", "k", "voting", "nprobe"):
            summary[key] = report.config.get(key)
        summary["cutoff"] = report.cutoff
        fh.write(json.dumps(summary, separators=(",", ":")) + "\n")
