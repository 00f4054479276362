"""Windowed pipeline orchestration: streamers to staging to filters to reports.

Every stage communicates only through the staging store. Within one data
window the stages run as a fixed schedule: ingest publishes the window's
records, the rule engine confirms events and shares locations, the location
extractor enriches posts and re-exports them, the integrator labels posts
against confirmed events, and the filter stage predicts and (in adaptive
mode) updates the ensemble. Records are acknowledged only after the
window's reports and checkpoint are written, so a crash at any point leaves
in-flight records pending; re-running the same output directory replays
journals, skips completed windows, and reproduces byte-identical reports
(consumers are idempotent and all clocks are logical, driven by record
timestamps).

Run directory layout::

    staging.journal  mstore.journal  pe_rdb.jsonl  fstore/   state.json
    window_reports.jsonl  window_reports.csv  predictions.jsonl
    detections.jsonl  summary.json
"""

from __future__ import annotations

import csv
import io
import json
import os
from pathlib import Path

import numpy as np

from .config import PipelineConfig
from .events import EventTable, evaluate_rules, share_locations, FULL
from .filters import (
    ACTION_FORK_AND_UPDATE,
    ACTION_GENERATE_NEW,
    ACTION_NONE,
    ACTION_UPDATE_EXISTING,
    FilterStore,
    FStoreEntry,
    HashingTextEncoder,
    ScheduleState,
    schedule_tick,
    train_filter,
)
from .filters.store import FilterStoreEmpty
from .ingest import FileStreamer, HCRecord, RejectedRecord, SocialPost
from .joins import IRRELEVANT, RELEVANT, label_stream
from .locations import Gazetteer, extract_locations, resolve_post_cell
from .staging import ManualClock, MetadataStore, StagingKey, StagingStore
from .synth import load_truth

BIG = 10**9


class CrashInjected(RuntimeError):
    """Raised by the test-only crash hook to simulate a process failure."""


class PipelineError(RuntimeError):
    pass


REPORT_FIELDS = [
    "window",
    "t_start",
    "t_end",
    "mode",
    "n_posts",
    "n_rejects",
    "n_resolved",
    "n_dropped_no_location",
    "n_events_confirmed",
    "n_labeled_relevant",
    "n_labeled_irrelevant",
    "n_unlabeled",
    "n_predicted_relevant",
    "precision",
    "recall",
    "fscore",
    "detected_event_ids",
    "margin_density",
    "drift_alarm",
    "filter_action",
    "filter_trained_at",
]


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


class _Reports:
    """Window report and prediction rows, rewritten atomically per window.

    On resume only rows belonging to checkpointed windows are kept, so a
    half-finished window is recomputed rather than duplicated.
    """

    def __init__(self, out_dir: Path, completed: set[int]) -> None:
        self.report_path = out_dir / "window_reports.jsonl"
        self.csv_path = out_dir / "window_reports.csv"
        self.pred_path = out_dir / "predictions.jsonl"
        self.detection_path = out_dir / "detections.jsonl"
        self.rows: dict[int, dict] = {}
        self.predictions: dict[int, list[dict]] = {}
        self.detections: dict[int, list[dict]] = {}
        for path, bucket in (
            (self.report_path, self.rows),
            (self.pred_path, self.predictions),
            (self.detection_path, self.detections),
        ):
            if not path.exists():
                continue
            for line in path.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                doc = json.loads(line)
                w = doc["window"]
                if w not in completed:
                    continue
                if bucket is self.rows:
                    bucket[w] = doc
                else:
                    bucket.setdefault(w, []).append(doc)

    def add_window(self, row: dict, predictions: list[dict], detections: list[dict]) -> None:
        w = row["window"]
        self.rows[w] = row
        self.predictions[w] = predictions
        self.detections[w] = detections
        self.flush()

    def flush(self) -> None:
        order = sorted(self.rows)
        _atomic_write(
            self.report_path,
            "".join(json.dumps(self.rows[w], sort_keys=True) + "\n" for w in order),
        )
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(REPORT_FIELDS)
        for w in order:
            row = self.rows[w]
            out = []
            for name in REPORT_FIELDS:
                value = row.get(name)
                if name == "detected_event_ids":
                    value = ";".join(value or [])
                out.append("" if value is None else value)
            writer.writerow(out)
        _atomic_write(self.csv_path, buf.getvalue())
        _atomic_write(
            self.pred_path,
            "".join(
                json.dumps(doc, sort_keys=True) + "\n"
                for w in sorted(self.predictions)
                for doc in self.predictions[w]
            ),
        )
        _atomic_write(
            self.detection_path,
            "".join(
                json.dumps(doc, sort_keys=True) + "\n"
                for w in sorted(self.detections)
                for doc in self.detections[w]
            ),
        )


def _metrics(pred_rows: list[dict]) -> tuple[float | None, float | None, float | None]:
    scored = [r for r in pred_rows if "truth" in r]
    if not scored:
        return None, None, None
    tp = sum(1 for r in scored if r["label"] == 1 and r["truth"] == 1)
    fp = sum(1 for r in scored if r["label"] == 1 and r["truth"] == 0)
    fn = sum(1 for r in scored if r["label"] == 0 and r["truth"] == 1)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    fscore = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, fscore


def _ensemble_density(ensemble, X, band: float) -> float:
    if X.shape[0] == 0:
        return 0.0
    return float(np.mean(ensemble.margin_densities(X, band)))


def _monitor_reference(X, ensemble, band: float, window: int) -> tuple[float, float]:
    """Mean-member margin density reference over window-sized folds."""
    n = X.shape[0]
    rho = _ensemble_density(ensemble, X, band)
    fold = max(2, min(window, n // 2)) if n >= 4 else n
    densities = [
        _ensemble_density(ensemble, X[i : i + fold], band)
        for i in range(0, max(n - fold + 1, 1), fold)
    ]
    binom = float(np.sqrt(max(rho * (1 - rho), 1e-12) / max(window, 1)))
    spread = float(np.std(densities, ddof=1)) if len(densities) > 1 else 0.0
    return rho, max(spread, binom, 1e-6)


class Pipeline:
    def __init__(self, config: PipelineConfig, out_dir: str | Path) -> None:
        self.config = config
        self.out_dir = Path(out_dir)

    # ------------------------------------------------------------------ helpers

    def _window_bounds(self, w: int) -> tuple[int, int]:
        start = self.config.start_time + (w - 1) * self.config.window_seconds
        return start, start + self.config.window_seconds

    def _window_of(self, t: int) -> int:
        return (t - self.config.start_time) // self.config.window_seconds + 1

    def _load_inputs(self):
        cfg = self.config
        social = FileStreamer(cfg.social_file, "social", cfg.topic)
        social_items: dict[int, list] = {}
        for key, payload in social:
            w = self._window_of(key.timestamp)
            if 1 <= w <= cfg.n_windows:
                social_items.setdefault(w, []).append((key, payload))
        hc = FileStreamer(cfg.hc_file, "high_confidence", cfg.topic)
        hc_items: dict[int, list] = {}
        for key, payload in hc:
            w = self._window_of(key.timestamp)
            if 1 <= w <= cfg.n_windows:
                hc_items.setdefault(w, []).append((key, payload))
        rejects: dict[int, list[RejectedRecord]] = {}
        for rej in social.rejects:
            w = self._window_of(rej.approx_t) if rej.approx_t > cfg.start_time else 1
            w = min(max(w, 1), cfg.n_windows)
            rejects.setdefault(w, []).append(rej)
        return social_items, hc_items, rejects

    def _read_state(self) -> dict:
        path = self.out_dir / "state.json"
        if path.exists():
            return json.loads(path.read_text(encoding="utf-8"))
        return {"completed": [], "done": False}

    def _write_state(self, state: dict) -> None:
        _atomic_write(self.out_dir / "state.json", json.dumps(state, sort_keys=True) + "\n")

    # ---------------------------------------------------------------------- run

    def run(self) -> Path:
        cfg = self.config
        self.out_dir.mkdir(parents=True, exist_ok=True)
        gazetteer = (
            Gazetteer.from_tsv(cfg.gazetteer_file) if cfg.gazetteer_file else Gazetteer.bundled()
        )
        clock = ManualClock(cfg.start_time)
        store = StagingStore(self.out_dir / "staging.journal", clock=clock, gc_period=None)
        mstore = MetadataStore(clock=clock, journal_path=self.out_dir / "mstore.journal")
        table = EventTable(self.out_dir / "pe_rdb.jsonl")
        fstore = FilterStore(self.out_dir / "fstore")
        encoder = HashingTextEncoder(dims=cfg.filters.dims, seed=cfg.filters.encoder_seed)
        truth = load_truth(cfg.truth_file) if cfg.truth_file else None

        state = self._read_state()
        completed = set(state["completed"])
        reports = _Reports(self.out_dir, completed)

        reg_hc = store.register_template("hcproc", "import", f"rs:*:{cfg.topic}:*:*:*:*")
        reg_meta = store.register_template("locext", "import", f"ss:en:{cfg.topic}:*:*:*:*")
        reg_hdi = store.register_template("hdi", "import", f"locext:en:{cfg.topic}:*:*:*:*")
        store.register_template("social-streamer", "export", f"ss:en:{cfg.topic}:*:*:*:*")
        store.register_template("hc-streamer", "export", f"rs:*:{cfg.topic}:*:*:*:*")
        store.register_template("locext", "export", f"locext:en:{cfg.topic}:*:*:*:*")
        import_regs = (reg_hc, reg_meta, reg_hdi)

        social_items, hc_items, rejects = self._load_inputs()

        try:
            for w in range(1, cfg.n_windows + 1):
                w_start, w_end = self._window_bounds(w)
                clock.t = w_end
                if w in completed:
                    self._ack_window(store, import_regs, w_end)
                    store.gc()
                    continue
                self._run_window(
                    w,
                    w_start,
                    w_end,
                    store=store,
                    mstore=mstore,
                    table=table,
                    fstore=fstore,
                    encoder=encoder,
                    gazetteer=gazetteer,
                    truth=truth,
                    reports=reports,
                    social_items=social_items.get(w, []),
                    hc_items=hc_items.get(w, []),
                    rejects=rejects.get(w, []),
                    import_regs=import_regs,
                )
                if cfg.crash_after_window == w and cfg.crash_point == "pre_checkpoint":
                    raise CrashInjected(f"injected crash before checkpoint of window {w}")
                completed.add(w)
                self._write_state({"completed": sorted(completed), "done": False})
                if cfg.crash_after_window == w and cfg.crash_point == "post_checkpoint":
                    raise CrashInjected(f"injected crash after checkpoint of window {w}")
                self._ack_window(store, import_regs, w_end)
                store.gc()

            audit = store.audit()
            if audit["unprocessed"] or audit["processed_awaiting_gc"]:
                raise PipelineError(f"staging store not drained at completion: {audit}")
            self._write_state({"completed": sorted(completed), "done": True})
            summary = {
                "clean": True,
                "mode": cfg.mode,
                "seed": cfg.seed,
                "topic": cfg.topic,
                "n_windows": cfg.n_windows,
                "store_audit": audit,
                "fscore_by_window": {
                    str(w): reports.rows[w].get("fscore") for w in sorted(reports.rows)
                },
            }
            _atomic_write(
                self.out_dir / "summary.json", json.dumps(summary, sort_keys=True, indent=1) + "\n"
            )
        finally:
            store.close()
            mstore.close()
        return self.out_dir

    def _ack_window(self, store: StagingStore, import_regs, w_end: int) -> None:
        for reg in import_regs:
            for record in store.poll_unprocessed(reg, BIG):
                if record.key.timestamp < w_end:
                    store.ack(reg, record.key)

    # ------------------------------------------------------------------- window

    def _run_window(
        self,
        w: int,
        w_start: int,
        w_end: int,
        *,
        store,
        mstore,
        table,
        fstore,
        encoder,
        gazetteer,
        truth,
        reports,
        social_items,
        hc_items,
        rejects,
        import_regs,
    ) -> None:
        cfg = self.config
        reg_hc, reg_meta, reg_hdi = import_regs

        # ingest: publish this window's records (skip keys already staged)
        for key, payload in social_items + hc_items:
            if not store.has_key(key):
                store.publish(key, payload)

        # rule engine over this window's high-confidence records
        hc_records = [
            HCRecord.from_json(rec.value)
            for rec in store.poll_unprocessed(reg_hc, BIG)
            if rec.key.timestamp < w_end
        ]
        stats: dict[str, int] = {}
        matches = evaluate_rules(hc_records, cfg.rules, now=w_end, gazetteer=gazetteer, stats=stats)
        n_confirmed = 0
        for match in matches:
            if match.match == FULL:
                table.persist_event(match.event, match.rule_id)
                n_confirmed += 1
        share_locations(matches, mstore)

        # location extraction; enriched posts are re-exported for the integrator
        polled_posts = [
            rec for rec in store.poll_unprocessed(reg_meta, BIG) if rec.key.timestamp < w_end
        ]
        n_resolved = n_dropped = 0
        aug_store = mstore if cfg.augmentation else None
        for rec in polled_posts:
            post = SocialPost.from_json(rec.value)
            if not post.l:
                post.l = extract_locations(post, gazetteer, mstore=aug_store, now=post.t)
            cell = (
                resolve_post_cell(post, gazetteer, mstore=aug_store, now=post.t, stats=stats)
                if post.l
                else None
            )
            if cell is None:
                n_dropped += 1
                continue
            n_resolved += 1
            enriched = post.with_resolution(post.l, cell)
            out_key = StagingKey(
                streamer="locext",
                lang="en",
                topic=cfg.topic,
                src=rec.key.src,
                url=rec.key.url,
                id=rec.key.id,
                timestamp=rec.key.timestamp,
            )
            if not store.has_key(out_key):
                store.publish(out_key, enriched.to_json().encode("utf-8"))

        # integration: label against confirmed events
        enriched_posts = [
            SocialPost.from_json(rec.value)
            for rec in store.poll_unprocessed(reg_hdi, BIG)
            if rec.key.timestamp < w_end
        ]
        enriched_posts.sort(key=lambda p: (p.t, p.post_id or ""))
        event_rows = [(row_id, ev) for row_id, ev, _ in table.rows()]
        labeled, unlabeled = label_stream(event_rows, enriched_posts, rejects, cfg.join)
        positives = [lp for lp in labeled if lp.label == RELEVANT]
        negatives = [lp for lp in labeled if lp.label == IRRELEVANT]
        cap = int(cfg.filters.negative_ratio * len(positives))
        if len(negatives) > cap:
            rng = np.random.default_rng([cfg.seed, w])
            keep = rng.choice(len(negatives), size=cap, replace=False)
            negatives = [negatives[i] for i in sorted(keep)]
        training = positives + negatives

        # filter stage: predict with the as-of filter, then maybe update
        row, pred_rows, detection_rows = self._filter_stage(
            w, w_start, w_end, fstore, encoder, truth, training, unlabeled, reports
        )
        row.update(
            {
                "window": w,
                "t_start": w_start,
                "t_end": w_end,
                "mode": cfg.mode,
                "n_posts": len(polled_posts),
                "n_rejects": len(rejects),
                "n_resolved": n_resolved,
                "n_dropped_no_location": n_dropped,
                "n_events_confirmed": n_confirmed,
                "n_labeled_relevant": len(positives),
                "n_labeled_irrelevant": len(negatives),
                "n_unlabeled": len(unlabeled),
            }
        )
        reports.add_window(row, pred_rows, detection_rows)

    # ------------------------------------------------------------------ filters

    def _filter_stage(
        self, w, w_start, w_end, fstore, encoder, truth, training, unlabeled, reports
    ):
        cfg = self.config
        settings = cfg.filters
        X_pred = encoder.transform([p.p for p in unlabeled])
        signature_query = (
            X_pred.mean(axis=0) if len(unlabeled) else np.zeros(settings.dims)
        )

        entry = None
        try:
            if settings.schedule == "user":
                entry = fstore.get_latest(as_of=w_start)
            else:
                entry = fstore.get_nearest(signature_query, as_of=w_start)
        except FilterStoreEmpty:
            entry = None

        action = ACTION_NONE
        density = None
        drift_alarm = False
        train_seed = cfg.seed * 100000 + w * 100

        def save_entry(ensemble, X_train, labeled_rows) -> FStoreEntry:
            new = FStoreEntry(
                filter=ensemble,
                train_timestamp=w_end,
                train_signature=X_train.mean(axis=0),
                train_count=X_train.shape[0],
                train_data_ref="train_data.jsonl",
            )
            X_window = np.vstack([X_train, X_pred]) if len(unlabeled) else X_train
            new.monitor_ref = _monitor_reference(
                X_window, ensemble, settings.margin_band, settings.monitor_window
            )
            name = fstore.save(new)
            archive = fstore.root / name / "train_data.jsonl"
            _atomic_write(
                archive,
                "".join(
                    json.dumps(
                        {"post_id": lp.post.post_id, "label": lp.label, "evidence": lp.evidence,
                         "text": lp.post.p, "t": lp.post.t},
                        sort_keys=True,
                    )
                    + "\n"
                    for lp in labeled_rows
                ),
            )
            return new

        def train(warm_from=None, seed_shift=0):
            X_train = encoder.transform([lp.post.p for lp in training])
            ensemble = train_filter(
                training,
                encoder,
                algos=settings.algos,
                scheme=settings.scheme,
                expert_weights=settings.expert_weights,
                seed=train_seed + seed_shift,
                trained_at=w_end,
                warm_members=warm_from,
                epochs=settings.epochs,
            )
            return save_entry(ensemble, X_train, training)

        trainable = (
            len({lp.label for lp in training}) == 2 if training else False
        )

        if entry is None:
            if trainable:
                entry = train()
                action = ACTION_GENERATE_NEW
            else:
                # nothing to predict with yet
                pred_rows = self._prediction_rows(w, unlabeled, np.zeros(len(unlabeled)), truth)
                return (
                    {
                        "n_predicted_relevant": 0,
                        "precision": None,
                        "recall": None,
                        "fscore": None,
                        "detected_event_ids": [],
                        "margin_density": None,
                        "drift_alarm": False,
                        "filter_action": "no_filter",
                        "filter_trained_at": None,
                    },
                    pred_rows,
                    [],
                )
        else:
            # predict first, then decide on updates (frozen mode never updates)
            density = _ensemble_density(entry.filter, X_pred, settings.margin_band)
            if cfg.mode == "adaptive":
                if settings.schedule in ("detector", "hybrid") and entry.monitor_ref:
                    rho_ref, sigma_ref = entry.monitor_ref
                    threshold = rho_ref + settings.alarm_lambda * sigma_ref
                    # densities measured under this same filter only
                    history = [
                        reports.rows[pw]["margin_density"]
                        for pw in sorted(reports.rows)
                        if pw < w
                        and reports.rows[pw].get("margin_density") is not None
                        and reports.rows[pw].get("filter_trained_at") == entry.train_timestamp
                    ]
                    recent = history + [density]
                    need = settings.consecutive_needed
                    drift_alarm = len(recent) >= need and all(
                        d > threshold for d in recent[-need:]
                    )
                sched_state = ScheduleState(entry.train_timestamp, drift_alarm)
                action = schedule_tick(
                    settings.schedule, sched_state, w_end, period=cfg.schedule_period
                )
                if action != ACTION_NONE and not trainable:
                    action = "skipped_no_labels"
                elif action == ACTION_UPDATE_EXISTING:
                    train(warm_from=entry.filter.members)
                elif action == ACTION_GENERATE_NEW:
                    train()
                elif action == ACTION_FORK_AND_UPDATE:
                    train(warm_from=entry.filter.members)
                    train(seed_shift=1)

        scores = entry.filter.predict_score(X_pred) if len(unlabeled) else np.zeros(0)
        pred_rows = self._prediction_rows(w, unlabeled, scores, truth)
        detected = sorted(
            {
                r["event_id"]
                for r in pred_rows
                if r["label"] == 1 and r.get("truth") == 1 and r.get("event_id")
            }
        )
        detections = [
            {"window": w, "post_id": r["post_id"], "score": r["score"], "cell": r["cell"]}
            for r in pred_rows
            if r["label"] == 1
        ]
        precision, recall, fscore = _metrics(pred_rows)
        row = {
            "n_predicted_relevant": int(sum(r["label"] for r in pred_rows)),
            "precision": precision,
            "recall": recall,
            "fscore": fscore,
            "detected_event_ids": detected,
            "margin_density": density,
            "drift_alarm": bool(drift_alarm),
            "filter_action": action,
            "filter_trained_at": entry.train_timestamp if entry else None,
        }
        return row, pred_rows, detections

    def _prediction_rows(self, w, unlabeled, scores, truth) -> list[dict]:
        rows = []
        for post, score in zip(unlabeled, scores):
            doc = {
                "window": w,
                "post_id": post.post_id,
                "score": float(score),
                "label": int(score >= 0.5),
                "cell": list(post.cell) if post.cell else None,
            }
            if truth is not None and post.post_id in truth:
                doc["truth"] = 1 if truth[post.post_id]["label"] == "relevant" else 0
                doc["event_id"] = truth[post.post_id].get("event_id")
            rows.append(doc)
        rows.sort(key=lambda r: r["post_id"] or "")
        return rows


def run_pipeline(config: PipelineConfig, out_dir: str | Path) -> Path:
    """Run (or resume) the pipeline; returns the report directory."""
    return Pipeline(config, out_dir).run()


# ---------------------------------------------------------------- comparison


def _variance(values) -> float:
    arr = np.asarray(list(values), dtype=np.float64)
    return float(np.var(arr)) if arr.size else 0.0


def _load_report_rows(run_dir: Path) -> list[dict]:
    path = run_dir / "window_reports.jsonl"
    if not path.exists():
        raise PipelineError(f"no window reports under {run_dir}")
    return [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]


def _load_predictions(run_dir: Path) -> dict[int, dict[str, dict]]:
    out: dict[int, dict[str, dict]] = {}
    path = run_dir / "predictions.jsonl"
    if path.exists():
        for line in path.read_text(encoding="utf-8").splitlines():
            if line.strip():
                doc = json.loads(line)
                out.setdefault(doc["window"], {})[doc["post_id"]] = doc
    return out


def compare_runs(adaptive_dir: str | Path, frozen_dir: str | Path, out_path: str | Path | None = None) -> dict:
    """Per-window comparison of an adaptive run against a static baseline.

    Produces per-window f-score deltas, per-approach f-score variance, and
    event-count columns: events detected by both runs, false positives of
    the baseline corrected by the adaptive run, false negatives recovered by
    it, and the adaptive total (= both + recovered).
    """
    rows_a = _load_report_rows(Path(adaptive_dir))
    rows_b = _load_report_rows(Path(frozen_dir))
    if len(rows_a) != len(rows_b):
        raise PipelineError(f"window count mismatch: {len(rows_a)} vs {len(rows_b)}")
    preds_a = _load_predictions(Path(adaptive_dir))
    preds_b = _load_predictions(Path(frozen_dir))

    windows = []
    for ra, rb in zip(rows_a, rows_b):
        if ra["window"] != rb["window"]:
            raise PipelineError("window indices do not align")
        w = ra["window"]
        events_a = set(ra["detected_event_ids"])
        events_b = set(rb["detected_event_ids"])
        pa = preds_a.get(w, {})
        pb = preds_b.get(w, {})
        false_pos_corrected = sum(
            1
            for pid, doc in pb.items()
            if doc["label"] == 1
            and doc.get("truth") == 0
            and pa.get(pid, {}).get("label") == 0
        )
        both = len(events_a & events_b)
        recovered = len(events_a - events_b)
        missed = len(events_b - events_a)
        total_b = len(events_b)
        windows.append(
            {
                "window": w,
                "precision_adaptive": ra["precision"],
                "recall_adaptive": ra["recall"],
                "fscore_adaptive": ra["fscore"],
                "precision_frozen": rb["precision"],
                "recall_frozen": rb["recall"],
                "fscore_frozen": rb["fscore"],
                "fscore_delta": (
                    ra["fscore"] - rb["fscore"]
                    if ra["fscore"] is not None and rb["fscore"] is not None
                    else None
                ),
                "both_apps": both,
                "false_pos_corrected": false_pos_corrected,
                "false_neg_recovered": recovered,
                "adaptive_missed": missed,
                "total_adaptive": both + recovered,
                "pct_increase": (100.0 * (both + recovered) / total_b) if total_b else None,
            }
        )

    fs_a = [r["fscore"] for r in rows_a if r["fscore"] is not None]
    fs_b = [r["fscore"] for r in rows_b if r["fscore"] is not None]
    report = {
        "windows": windows,
        "fscore_variance_adaptive": _variance(fs_a),
        "fscore_variance_frozen": _variance(fs_b),
        "fscore_mean_adaptive": float(np.mean(fs_a)) if fs_a else None,
        "fscore_mean_frozen": float(np.mean(fs_b)) if fs_b else None,
        "total_adaptive": sum(r["total_adaptive"] for r in windows),
        "total_frozen": sum(len(set(rb["detected_event_ids"])) for rb in rows_b),
    }
    if out_path is not None:
        _atomic_write(Path(out_path), json.dumps(report, sort_keys=True, indent=1) + "\n")
    return report
