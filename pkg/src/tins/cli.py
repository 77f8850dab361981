"""Command-line front end and batch pipeline.

Subcommands: synth (generate a synthetic corpus), build (IVF-PQ index),
run (track + search + fuse one configuration into a TREC run file), eval
(AP/mAP of a run against ground truth), sweep (mAP over a grid of window,
rate, example-count, and voting-scheme settings, emitted as CSV).

Exit codes: 0 success, 1 usage/configuration error, 2 data error.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from dataclasses import dataclass

from . import dataset as ds
from . import evaluation as ev
from . import fusion
from . import index as ix
from . import synthgen
from . import tracking
from .errors import ConfigError, DataError

DATASET_FILE = "dataset.jsonl"
QUERY_FILE = "queries.jsonl"
TRUTH_FILE = "groundtruth.txt"

SearchCache = dict[tuple[bytes, int, int], list]


def _cached_search(index: ix.Index, embedding, top_n: int, nprobe: int,
                   cache: SearchCache | None):
    if cache is None:
        return ix.search(index, embedding, top_n, nprobe).entries
    key = (embedding.tobytes(), top_n, nprobe)
    entries = cache.get(key)
    if entries is None:
        entries = ix.search(index, embedding, top_n, nprobe).entries
        cache[key] = entries
    return entries


def execute_run(dataset: ds.Dataset, index: ix.Index,
                queries: dict[str, list[tracking.QueryExample]], *,
                window: int, rate: int, threshold: float, voting: str,
                examples: int, top_n: int, nprobe: int,
                cache: SearchCache | None = None) -> dict[str, fusion.ShotRanking]:
    """Track, search, and fuse every topic; rankings truncated to top_n."""
    try:
        fuse = fusion.VOTING_SCHEMES[voting]
    except KeyError:
        raise ConfigError(f"unknown voting scheme {voting!r}") from None
    if examples < 1:
        raise ConfigError(f"examples must be >= 1, got {examples}")
    track_config = tracking.TrackConfig(window=window, rate=rate, threshold=threshold)
    for topic in queries:
        if examples > len(queries[topic]):
            raise DataError(
                f"topic {topic!r} provides {len(queries[topic])} examples, "
                f"{examples} requested")

    rankings: dict[str, fusion.ShotRanking] = {}
    for topic in sorted(queries):
        lists_per_example = []
        for k, given in enumerate(queries[topic][:examples]):
            cue = tracking.track(dataset, given, track_config)
            lists = [
                ix.RankedList(_cached_search(index, ex.embedding, top_n, nprobe, cache),
                              example_index=k, offset=ex.offset)
                for ex in cue.examples()
            ]
            lists_per_example.append(lists)
        rankings[topic] = fuse(dataset, lists_per_example).truncated(top_n)
    return rankings


@dataclass(frozen=True)
class SweepSpec:
    windows: tuple[int, ...] = (0, 1, 2, 3, 4, 5)
    rates: tuple[int, ...] = (1, 2, 5, 20)
    example_counts: tuple[int, ...] = (1, 2, 4)
    voting: tuple[str, ...] = ("vosc1", "vosc2")

    def __post_init__(self):
        for name in ("windows", "rates", "example_counts", "voting"):
            if not getattr(self, name):
                raise ConfigError(f"sweep {name} list is empty")
        for scheme in self.voting:
            if scheme not in fusion.VOTING_SCHEMES:
                raise ConfigError(f"unknown voting scheme {scheme!r}")

    def cells(self):
        for w in self.windows:
            for r in self.rates:
                for k in self.example_counts:
                    for scheme in self.voting:
                        yield w, r, k, scheme


def execute_sweep(dataset: ds.Dataset, index: ix.Index,
                  queries: dict[str, list[tracking.QueryExample]],
                  truth: ev.GroundTruth, spec: SweepSpec, *,
                  threshold: float = 1.0, top_n: int = 300, nprobe: int = 8,
                  cutoff: int = ev.DEFAULT_CUTOFF):
    """mAP per grid cell; returns (rows, runs) with runs keyed by (w, r, k, voting).

    One shared search cache serves the whole grid: the index never changes
    across cells, only tracking and fusion do.
    """
    cache: SearchCache = {}
    rows = []
    runs: dict[tuple[int, int, int, str], dict[str, fusion.ShotRanking]] = {}
    for w, r, k, scheme in spec.cells():
        rankings = execute_run(dataset, index, queries, window=w, rate=r,
                               threshold=threshold, voting=scheme, examples=k,
                               top_n=top_n, nprobe=nprobe, cache=cache)
        report = ev.evaluate_run(
            {topic: ranking.shot_ids() for topic, ranking in rankings.items()},
            truth, cutoff)
        rows.append({"w": w, "r": r, "k": k, "voting": scheme, "map": report.map})
        runs[(w, r, k, scheme)] = rankings
    return rows, runs


def write_sweep_csv(rows, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["w", "r", "k", "voting", "map"])
        for row in rows:
            writer.writerow([row["w"], row["r"], row["k"], row["voting"],
                             f"{row['map']:.6f}"])


# --- commands ---------------------------------------------------------------

def cmd_synth(args) -> int:
    config = synthgen.SynthConfig(
        seed=args.seed,
        dimension=args.dimension,
        num_identities=args.identities,
        num_videos=args.videos,
        shots_per_video=args.shots_per_video,
        frames_per_shot=args.frames_per_shot,
        faces_per_frame=args.faces_per_frame,
        identity_noise=args.identity_noise,
        drift_per_frame=args.drift,
        distractor_rate=args.distractor_rate,
        topics=args.topics,
        examples_per_topic=args.examples_per_topic,
    )
    result = synthgen.generate(config)
    os.makedirs(args.out, exist_ok=True)
    dataset_path = os.path.join(args.out, DATASET_FILE)
    query_path = os.path.join(args.out, QUERY_FILE)
    truth_path = os.path.join(args.out, TRUTH_FILE)
    ds.save(result.dataset, dataset_path)
    tracking.write_query_file(result.queries, query_path)
    ev.write_ground_truth(result.truth, truth_path)
    print(f"dataset: {dataset_path} ({len(result.dataset)} frames, "
          f"{result.dataset.num_faces()} faces, {len(result.dataset.shots)} shots)")
    print(f"queries: {query_path} ({len(result.queries)} topics)")
    print(f"ground truth: {truth_path}")
    return 0


def cmd_build(args) -> int:
    config = ix.IndexConfig(
        num_clusters=args.clusters,
        nprobe=min(args.nprobe, args.clusters),
        num_subspaces=args.subspaces,
        kmeans_iters=args.kmeans_iters,
        seed=args.seed,
        exact_mode=args.exact,
    )
    dataset = ds.ingest(args.dataset)
    index = ix.build(dataset, config)
    ix.save_index(index, args.out)
    print(f"index: {args.out} ({index.num_entries()} faces in "
          f"{index.num_clusters} clusters, exact_mode={index.config.exact_mode})")
    return 0


def cmd_run(args) -> int:
    dataset = ds.ingest(args.dataset)
    index = ix.load_index(args.index)
    queries = tracking.resolve_queries(dataset, tracking.read_query_file(args.queries))
    nprobe = min(args.nprobe, index.num_clusters)
    rankings = execute_run(dataset, index, queries, window=args.window,
                           rate=args.rate, threshold=args.threshold,
                           voting=args.voting, examples=args.examples,
                           top_n=args.topn, nprobe=nprobe)
    fusion.write_run_file(rankings, args.out, tag=args.tag)
    total = sum(len(r) for r in rankings.values())
    print(f"run: {args.out} ({len(rankings)} topics, {total} lines)")
    return 0


def cmd_eval(args) -> int:
    run = fusion.read_run_file(args.run)
    truth = ev.read_ground_truth(args.gt)
    ranked = {topic: [shot for shot, _ in entries] for topic, entries in run.items()}
    report = ev.evaluate_run(ranked, truth, cutoff=args.cutoff)
    for topic in sorted(report.per_topic):
        print(f"AP {topic} {report.per_topic[topic]:.6f}")
    print(f"mAP {report.map:.6f}")
    if args.out:
        ev.write_report(report, args.out)
    return 0


def cmd_sweep(args) -> int:
    spec = SweepSpec(windows=tuple(args.windows), rates=tuple(args.rates),
                     example_counts=tuple(args.examples), voting=tuple(args.voting))
    dataset = ds.ingest(args.dataset)
    index = ix.load_index(args.index)
    queries = tracking.resolve_queries(dataset, tracking.read_query_file(args.queries))
    truth = ev.read_ground_truth(args.gt)
    nprobe = min(args.nprobe, index.num_clusters)
    rows, runs = execute_sweep(dataset, index, queries, truth, spec,
                               threshold=args.threshold, top_n=args.topn,
                               nprobe=nprobe, cutoff=args.cutoff)
    write_sweep_csv(rows, args.out)
    print(f"sweep: {args.out} ({len(rows)} rows)")
    if args.pooled_out:
        pooled = ev.pooled_ground_truth(
            ({topic: ranking.shot_ids() for topic, ranking in run.items()}
             for run in runs.values()),
            truth, depth=args.cutoff, known_shots=set(dataset.shots))
        ev.write_ground_truth(pooled, args.pooled_out)
        print(f"pooled ground truth: {args.pooled_out}")
    return 0


# --- argument parsing -------------------------------------------------------

class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _int_range(text: str) -> tuple[int, int]:
    lo, sep, hi = text.partition(":")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected LO:HI, got {text!r}")
    return int(lo), int(hi)


def _int_list(text: str) -> list[int]:
    return [int(part) for part in text.split(",") if part]


def _str_list(text: str) -> list[str]:
    return [part for part in text.split(",") if part]


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tins", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--out", required=True, help="output directory")
    p.add_argument("--dimension", type=int, default=128)
    p.add_argument("--identities", type=int, default=20)
    p.add_argument("--videos", type=int, default=8)
    p.add_argument("--shots-per-video", type=int, default=40)
    p.add_argument("--frames-per-shot", type=_int_range, default=(8, 30),
                   metavar="LO:HI")
    p.add_argument("--faces-per-frame", type=_int_range, default=(0, 3),
                   metavar="LO:HI")
    p.add_argument("--identity-noise", type=float, default=0.05)
    p.add_argument("--drift", type=float, default=0.03)
    p.add_argument("--distractor-rate", type=float, default=0.5)
    p.add_argument("--topics", type=int, default=10)
    p.add_argument("--examples-per-topic", type=int, default=4)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("build", help="build the IVF-PQ index")
    p.add_argument("--dataset", required=True)
    p.add_argument("-o", "--out", required=True, help="index file")
    p.add_argument("--clusters", type=int, default=64)
    p.add_argument("--nprobe", type=int, default=8)
    p.add_argument("--subspaces", type=int, default=8)
    p.add_argument("--kmeans-iters", type=int, default=25)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--exact", action="store_true",
                   help="store raw embeddings and search exactly")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("run", help="produce a TREC run file for one configuration")
    p.add_argument("--dataset", required=True)
    p.add_argument("--index", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("-o", "--out", required=True, help="run file")
    p.add_argument("--window", type=int, default=0)
    p.add_argument("--rate", type=int, default=1)
    p.add_argument("--threshold", type=float, default=1.0)
    p.add_argument("--voting", choices=sorted(fusion.VOTING_SCHEMES), default="vosc1")
    p.add_argument("--examples", type=int, default=1, metavar="K")
    p.add_argument("--topn", type=int, default=300)
    p.add_argument("--nprobe", type=int, default=8)
    p.add_argument("--tag", default="tins")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval", help="score a run file against ground truth")
    p.add_argument("--run", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--cutoff", type=int, default=ev.DEFAULT_CUTOFF)
    p.add_argument("-o", "--out", help="optional JSON-lines report")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="mAP over a (window, rate, K, voting) grid")
    p.add_argument("--dataset", required=True)
    p.add_argument("--index", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("-o", "--out", required=True, help="CSV output")
    p.add_argument("--windows", type=_int_list, default=[0, 1, 2, 3, 4, 5])
    p.add_argument("--rates", type=_int_list, default=[1, 2, 5, 20])
    p.add_argument("--examples", type=_int_list, default=[1, 2, 4])
    p.add_argument("--voting", type=_str_list, default=["vosc1", "vosc2"])
    p.add_argument("--threshold", type=float, default=1.0)
    p.add_argument("--topn", type=int, default=300)
    p.add_argument("--nprobe", type=int, default=8)
    p.add_argument("--cutoff", type=int, default=ev.DEFAULT_CUTOFF)
    p.add_argument("--pooled-out", help="write pooled ground truth over all runs")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, IsADirectoryError, NotADirectoryError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
