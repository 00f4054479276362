"""Directory-backed filter store with timestamp and nearest-signature lookup.

Layout: one subdirectory per entry, named ``<timestamp>-<digest>`` so a
re-save of the same entry lands on the same directory.

  meta.json     timestamp, weighting scheme and weights, member algorithms
                and validation f-scores, the training-data signature
                (centroid + sample count), drift-monitor reference stats,
                and the relative path of the archived training data
  member_k.bin  little-endian float64 array: [intercept, w_0 .. w_{d-1}]

Retrieval is either "latest" (max timestamp) or "nearest" (Euclidean
distance between a query vector and the stored training centroids), ties
going to the newer entry. Both accept an ``as_of`` bound so a resumed run
sees exactly the filters an uninterrupted run would have seen.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ensemble import VotingFilterEnsemble
from .linear import SGDLinearFilter


@dataclass
class FStoreEntry:
    filter: VotingFilterEnsemble
    train_timestamp: int
    train_signature: np.ndarray  # centroid of training vectors
    train_count: int
    train_data_ref: str = ""
    monitor_ref: tuple[float, float] | None = None  # (rho_ref, sigma_ref)
    name: str = ""


class FilterStoreEmpty(LookupError):
    pass


class FilterStore:
    def __init__(self, root: str | Path) -> None:
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    @staticmethod
    def _entry_name(entry: FStoreEntry) -> str:
        h = hashlib.blake2b(digest_size=6)
        h.update(np.asarray(entry.train_signature, dtype=np.float64).tobytes())
        h.update(str(entry.train_count).encode())
        for m in entry.filter.members:
            h.update(m.loss.encode())
            h.update(np.asarray(m.coef_, dtype=np.float64).tobytes())
        return f"{entry.train_timestamp:012d}-{h.hexdigest()}"

    def save(self, entry: FStoreEntry) -> str:
        """Write (or idempotently overwrite) an entry; returns its name."""
        name = entry.name or self._entry_name(entry)
        entry.name = name
        path = self.root / name
        path.mkdir(parents=True, exist_ok=True)
        ensemble = entry.filter
        meta = {
            "train_timestamp": entry.train_timestamp,
            "scheme": ensemble.scheme,
            "weights": [float(w) for w in ensemble.weights],
            "algos": [m.loss for m in ensemble.members],
            "val_fscores": [float(f) for f in ensemble.val_fscores],
            "dims": int(ensemble.members[0].coef_.shape[0]),
            "train_count": entry.train_count,
            "train_signature": [float(x) for x in entry.train_signature],
            "train_data_ref": entry.train_data_ref,
            "monitor_ref": list(entry.monitor_ref) if entry.monitor_ref else None,
            "member_params": [
                {
                    "learning_rate": m.learning_rate,
                    "decay": m.decay,
                    "epochs": m.epochs,
                    "l2": m.l2,
                    "seed": m.seed,
                }
                for m in ensemble.members
            ],
        }
        with (path / "meta.json").open("w", encoding="utf-8") as fh:
            json.dump(meta, fh, sort_keys=True, indent=1)
            fh.write("\n")
        for k, member in enumerate(ensemble.members):
            vec = np.concatenate(([member.intercept_], member.coef_)).astype("<f8")
            (path / f"member_{k}.bin").write_bytes(vec.tobytes())
        return name

    def _load(self, path: Path) -> FStoreEntry:
        meta = json.loads((path / "meta.json").read_text(encoding="utf-8"))
        members = []
        for k, algo in enumerate(meta["algos"]):
            params = meta["member_params"][k]
            member = SGDLinearFilter(loss=algo, **params)
            raw = np.frombuffer((path / f"member_{k}.bin").read_bytes(), dtype="<f8")
            member.intercept_ = float(raw[0])
            member.coef_ = raw[1:].copy()
            member.val_fscore_ = meta["val_fscores"][k]
            members.append(member)
        scheme = meta["scheme"]
        ensemble = VotingFilterEnsemble(
            members,
            weights=None if scheme == "unweighted" else meta["weights"],
            scheme=scheme,
            trained_at=meta["train_timestamp"],
        )
        monitor_ref = meta.get("monitor_ref")
        return FStoreEntry(
            filter=ensemble,
            train_timestamp=meta["train_timestamp"],
            train_signature=np.array(meta["train_signature"], dtype=np.float64),
            train_count=meta["train_count"],
            train_data_ref=meta.get("train_data_ref", ""),
            monitor_ref=tuple(monitor_ref) if monitor_ref else None,
            name=path.name,
        )

    def entries(self, as_of: int | None = None) -> list[FStoreEntry]:
        out = []
        for path in sorted(self.root.iterdir()):
            if not (path / "meta.json").exists():
                continue
            entry = self._load(path)
            if as_of is None or entry.train_timestamp <= as_of:
                out.append(entry)
        return out

    def get_latest(self, as_of: int | None = None) -> FStoreEntry:
        entries = self.entries(as_of)
        if not entries:
            raise FilterStoreEmpty("filter store is empty")
        return max(entries, key=lambda e: (e.train_timestamp, e.name))

    def get_nearest(self, signature, as_of: int | None = None) -> FStoreEntry:
        entries = self.entries(as_of)
        if not entries:
            raise FilterStoreEmpty("filter store is empty")
        query = np.asarray(signature, dtype=np.float64)

        def rank(e: FStoreEntry):
            dist = float(np.linalg.norm(e.train_signature - query))
            return (dist, -e.train_timestamp, e.name)

        return min(entries, key=rank)

    def __len__(self) -> int:
        return len(self.entries())
