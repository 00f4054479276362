"""Command line entry points.

  streamsieve synth     generate a paired synthetic stream + pipeline config
  streamsieve ingest    replay a file into a staging store journal
  streamsieve hc-events run the event rules over staged high-confidence data
  streamsieve run       execute the full pipeline from a config file
  streamsieve compare   compare an adaptive run directory against a baseline

Exit status is 0 only on clean completion.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .events import EventTable, RuleConfig, evaluate_rules, share_locations, FULL
from .ingest import FileStreamer, HCRecord
from .locations import Gazetteer
from .pipeline import compare_runs, run_pipeline
from .staging import ManualClock, MetadataStore, StagingStore
from .synth import SynthConfig, generate

PIPELINE_TEMPLATE = """\
topic = "{topic}"
keywords = ["landslide", "mudslide", "rockslide"]
seed = {seed}
mode = "adaptive"
window_seconds = {window_seconds}
n_windows = {n_windows}
start_time = {start_time}

[inputs]
social = "social.jsonl"
hc = "hc.jsonl"
truth = "truth.jsonl"

[filters]
schedule = "user"
"""


def _cmd_synth(args) -> int:
    config = SynthConfig(
        seed=args.seed,
        n_windows=args.windows,
        posts_per_window=args.posts_per_window,
        events_per_window=args.events_per_window,
        drift_window=args.drift_at,
    )
    result = generate(config, args.out)
    config_path = Path(args.out) / "pipeline.toml"
    config_path.write_text(
        PIPELINE_TEMPLATE.format(
            topic=args.topic,
            seed=args.seed,
            window_seconds=config.window_seconds,
            n_windows=config.n_windows,
            start_time=config.start_time,
        ),
        encoding="utf-8",
    )
    print(json.dumps(result.counts, sort_keys=True))
    print(f"wrote {result.social_path}, {result.hc_path}, {result.truth_path}")
    print(f"pipeline config template: {config_path}")
    return 0


def _cmd_ingest(args) -> int:
    store = StagingStore(Path(args.store) / "staging.journal")
    streamer = FileStreamer(args.file, args.role, args.topic)
    direction = "ss" if args.role == "social" else "rs"
    store.register_template(f"{args.role}-streamer", "export", f"{direction}:*:{args.topic}:*:*:*:*")
    published = 0
    for key, payload in streamer:
        store.publish(key, payload)
        published += 1
    if args.rejects and streamer.rejects:
        with Path(args.rejects).open("w", encoding="utf-8") as fh:
            for rej in streamer.rejects:
                fh.write(
                    json.dumps(
                        {"text": rej.text, "reason": rej.reason, "approx_t": rej.approx_t, "src": rej.src},
                        sort_keys=True,
                    )
                    + "\n"
                )
    store.close()
    print(f"published {published} records, rejected {len(streamer.rejects)}")
    return 0


def _cmd_hc_events(args) -> int:
    config = load_config(args.config) if args.config else None
    rules = config.rules if config else RuleConfig()
    gazetteer = Gazetteer.from_tsv(args.gazetteer) if args.gazetteer else Gazetteer.bundled()
    store = StagingStore(Path(args.store) / "staging.journal")
    topic = args.topic or (config.topic if config else "landslides")
    reg = store.register_template("hcproc", "import", f"rs:*:{topic}:*:*:*:*")
    records = [HCRecord.from_json(rec.value) for rec in store.poll_unprocessed(reg, 10**9)]
    stats: dict[str, int] = {}
    matches = evaluate_rules(records, rules, gazetteer=gazetteer, stats=stats)
    table = EventTable(args.out)
    mstore = MetadataStore(clock=ManualClock(0), journal_path=Path(args.store) / "mstore.journal")
    persisted = sum(
        1 for m in matches if m.match == FULL and table.persist_event(m.event, m.rule_id) >= 0
    )
    shared = share_locations(matches, mstore)
    for rec in store.poll_unprocessed(reg, 10**9):
        store.ack(reg, rec.key)
    store.close()
    mstore.close()
    print(f"evaluated {len(records)} records: {persisted} events persisted, {shared} locations shared")
    return 0


def _cmd_run(args) -> int:
    try:
        config = load_config(args.config, mode=args.mode)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        out = run_pipeline(config, args.out)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"pipeline failed: {exc}", file=sys.stderr)
        return 1
    summary = json.loads((out / "summary.json").read_text(encoding="utf-8"))
    print(json.dumps({"out": str(out), "clean": summary["clean"]}, sort_keys=True))
    return 0 if summary.get("clean") else 1


def _cmd_compare(args) -> int:
    report = compare_runs(args.a, args.b, out_path=args.out)
    brief = {
        "fscore_mean_adaptive": report["fscore_mean_adaptive"],
        "fscore_mean_frozen": report["fscore_mean_frozen"],
        "fscore_variance_adaptive": report["fscore_variance_adaptive"],
        "fscore_variance_frozen": report["fscore_variance_frozen"],
        "total_adaptive": report["total_adaptive"],
        "total_frozen": report["total_frozen"],
    }
    print(json.dumps(brief, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="streamsieve", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic benchmark stream")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--windows", type=int, default=12)
    p.add_argument("--drift-at", type=int, default=5)
    p.add_argument("--posts-per-window", type=int, default=600)
    p.add_argument("--events-per-window", type=int, default=3)
    p.add_argument("--topic", default="landslides")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("ingest", help="replay a file into a staging store")
    p.add_argument("--role", choices=["social", "high_confidence"], required=True)
    p.add_argument("--file", required=True)
    p.add_argument("--topic", default="landslides")
    p.add_argument("--store", required=True, help="directory for the staging journal")
    p.add_argument("--rejects", help="write rejected records to this file")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("hc-events", help="evaluate event rules over staged records")
    p.add_argument("--store", required=True)
    p.add_argument("--config", help="pipeline config supplying [rules]")
    p.add_argument("--topic")
    p.add_argument("--gazetteer")
    p.add_argument("--out", required=True, help="event table file (JSON lines)")
    p.set_defaults(func=_cmd_hc_events)

    p = sub.add_parser("run", help="run the pipeline from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--mode", choices=["adaptive", "frozen"])
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("compare", help="compare two run directories")
    p.add_argument("--a", required=True, help="adaptive run directory")
    p.add_argument("--b", required=True, help="baseline run directory")
    p.add_argument("--out", help="write the full comparison report here")
    p.set_defaults(func=_cmd_compare)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
