"""Text to vector encoders behind a common transform interface.

The default encoder feature-hashes word 1-2-grams with signed hashing into a
fixed number of dimensions and L2-normalizes, so no corpus or vocabulary is
needed and the same text always maps to the same vector. A file-backed
encoder loads pre-trained word vectors instead (text format: one
``word v1 .. vd`` line per word) and averages token vectors, for experiments
with external embeddings.
"""

from __future__ import annotations

import hashlib
import re
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

_TOKEN_RE = re.compile(r"[0-9a-z]+")


def _tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.casefold())


class HashingTextEncoder(BaseEstimator, TransformerMixin):
    """Signed feature hashing of word n-grams, unit-normalized.

    Hashing uses keyed blake2b so vectors are stable across processes and
    runs regardless of interpreter hash randomization. Empty token sets map
    to the zero vector; everything else has unit norm.
    """

    def __init__(self, dims: int = 256, seed: int = 0, ngram_max: int = 2) -> None:
        self.dims = dims
        self.seed = seed
        self.ngram_max = ngram_max

    def fit(self, X=None, y=None) -> "HashingTextEncoder":
        return self

    def _hash(self, gram: str) -> int:
        digest = hashlib.blake2b(
            gram.encode("utf-8"), digest_size=8, key=self.seed.to_bytes(8, "little")
        ).digest()
        return int.from_bytes(digest, "little")

    def encode(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dims, dtype=np.float64)
        tokens = _tokenize(text)
        for n in range(1, self.ngram_max + 1):
            for i in range(len(tokens) - n + 1):
                h = self._hash(" ".join(tokens[i : i + n]))
                sign = 1.0 if (h >> 63) & 1 == 0 else -1.0
                vec[h % self.dims] += sign
        norm = np.linalg.norm(vec)
        if norm > 0:
            vec /= norm
        return vec

    def transform(self, X) -> np.ndarray:
        return np.stack([self.encode(text) for text in X]) if len(X) else np.zeros((0, self.dims))


class PretrainedVectorEncoder(BaseEstimator, TransformerMixin):
    """Mean of per-token vectors from a word-vector file, unit-normalized."""

    def __init__(self, path: str | Path) -> None:
        self.path = str(path)
        self._table: dict[str, np.ndarray] = {}
        self.dims = 0
        with Path(path).open("r", encoding="utf-8") as fh:
            for line in fh:
                parts = line.rstrip("\n").split()
                if len(parts) < 2:
                    continue
                vec = np.array([float(x) for x in parts[1:]], dtype=np.float64)
                if self.dims == 0:
                    self.dims = vec.size
                elif vec.size != self.dims:
                    raise ValueError(f"inconsistent vector width for {parts[0]!r}")
                self._table[parts[0]] = vec
        if not self._table:
            raise ValueError(f"no vectors loaded from {path}")

    def fit(self, X=None, y=None) -> "PretrainedVectorEncoder":
        return self

    def encode(self, text: str) -> np.ndarray:
        hits = [self._table[tok] for tok in _tokenize(text) if tok in self._table]
        if not hits:
            return np.zeros(self.dims, dtype=np.float64)
        vec = np.mean(hits, axis=0)
        norm = np.linalg.norm(vec)
        return vec / norm if norm > 0 else vec

    def transform(self, X) -> np.ndarray:
        return np.stack([self.encode(text) for text in X]) if len(X) else np.zeros((0, self.dims))
