"""Score fusion: merge per-example ranked lists into one shot ranking.

Two schemes.  The two-step scheme treats the lists of one tracked cue as
dependent: max-pool their frame scores first, map frames to shots, then
average the per-shot scores across the given examples.  The one-step
scheme treats every list (given and tracked alike) as independent and
averages over all of them directly.  Absent frames are skipped by the max;
absent shots contribute zero to the mean, whose divisor is fixed at the
number of inputs.  With no tracking both schemes are the same computation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from .dataset import Dataset, FrameRef
from .errors import DataError
from .index import RankedList

# frame ref -> score for one given example after max-pooling its cue
FusedFrameScores = dict[FrameRef, float]


@dataclass(eq=True)
class ShotRanking:
    """(shot_id, score) descending by score, ties ascending by shot_id."""

    entries: list[tuple[str, float]]

    def shot_ids(self) -> list[str]:
        return [shot for shot, _ in self.entries]

    def truncated(self, top_n: int) -> "ShotRanking":
        return ShotRanking(self.entries[:top_n])

    def __len__(self) -> int:
        return len(self.entries)


def merge_cue(lists: Sequence[RankedList]) -> FusedFrameScores:
    """Per-frame maximum over one cue's ranked lists."""
    if not lists:
        raise ValueError("merge_cue needs at least one ranked list")
    merged: FusedFrameScores = {}
    for ranked in lists:
        for ref, score in ranked.entries:
            prev = merged.get(ref)
            if prev is None or score > prev:
                merged[ref] = score
    return merged


def frames_to_shots(dataset: Dataset, frame_scores: Mapping[FrameRef, float]
                    ) -> dict[str, float]:
    """Per-shot maximum over the scored frames falling in each shot."""
    shot_scores: dict[str, float] = {}
    for (video_id, frame_index), score in frame_scores.items():
        shot_id = dataset.shot_of(video_id, frame_index)
        prev = shot_scores.get(shot_id)
        if prev is None or score > prev:
            shot_scores[shot_id] = score
    return shot_scores


def combine_examples(shot_score_maps: Sequence[Mapping[str, float]]) -> ShotRanking:
    """Mean per shot over the input maps, absent shots counting as zero.

    math.fsum keeps the mean exact, so the result is invariant under any
    permutation of the inputs.
    """
    if not shot_score_maps:
        raise ValueError("combine_examples needs at least one score map")
    k = len(shot_score_maps)
    shots: set[str] = set()
    for scores in shot_score_maps:
        shots.update(scores)
    combined = {
        shot: math.fsum(scores.get(shot, 0.0) for scores in shot_score_maps) / k
        for shot in shots
    }
    entries = sorted(combined.items(), key=lambda kv: (-kv[1], kv[0]))
    return ShotRanking(entries)


def vosc1(dataset: Dataset,
          lists_per_example: Sequence[Sequence[RankedList]]) -> ShotRanking:
    """Two-step fusion: max-pool each cue, then mean across given examples."""
    per_example = [
        frames_to_shots(dataset, merge_cue(lists))
        for lists in lists_per_example
    ]
    return combine_examples(per_example)


def vosc2(dataset: Dataset,
          lists_per_example: Sequence[Sequence[RankedList]]) -> ShotRanking:
    """One-step fusion: every list counts as an independent example."""
    per_list = [
        frames_to_shots(dataset, dict(ranked.entries))
        for lists in lists_per_example
        for ranked in lists
    ]
    return combine_examples(per_list)


VOTING_SCHEMES = {"vosc1": vosc1, "vosc2": vosc2}


# --- TREC run files ---------------------------------------------------------

def write_run_file(rankings: Mapping[str, ShotRanking], path, tag: str = "tins",
                   top_n: int | None = None) -> None:
    """One line per retrieved shot: `<topic> Q0 <shot> <rank> <score> <tag>`."""
    with open(path, "w", encoding="utf-8") as fh:
        for topic in sorted(rankings):
            entries = rankings[topic].entries
            if top_n is not None:
                entries = entries[:top_n]
            for rank, (shot, score) in enumerate(entries, start=1):
                fh.write(f"{topic} Q0 {shot} {rank} {score:.6f} {tag}\n")


def read_run_file(path) -> dict[str, list[tuple[str, float]]]:
    """Per topic, the (shot, score) pairs in rank order."""
    runs: dict[str, list[tuple[str, float]]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 6 or parts[1] != "Q0":
                raise DataError(f"line {lineno}: malformed run line")
            topic, _, shot, rank_str, score_str, _tag = parts
            entries = runs.setdefault(topic, [])
            try:
                rank = int(rank_str)
                score = float(score_str)
            except ValueError:
                raise DataError(f"line {lineno}: bad rank or score") from None
            if rank != len(entries) + 1:
                raise DataError(
                    f"line {lineno}: rank {rank} out of sequence for topic {topic!r}")
            entries.append((shot, score))
    return runs
