"""Deterministic text encoder for the agent's reflection state.

The state seen by the agent is the text pair (current command, remaining
commands). It is serialized to a canonical string and mapped to a fixed
1536-dimensional unit vector by signed feature hashing of token 3-grams:
one hash picks the bucket, a second independent hash picks the sign, and
the resulting count vector is L2-normalized. The encoding is a pure
function of the input text, so identical states embed identically across
processes and platforms.

An adapter hook allows swapping in a remote encoder that returns 1536
floats; the rest of the engine treats both encoders identically.
"""

from __future__ import annotations

import hashlib
import re
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import RemoteFailure

EMBED_DIM = 1536

_TOKEN_RE = re.compile(r"[a-z0-9]+")
_BOUNDARY = "\x00"


def serialize_reflection_state(
    current: Optional[str], remaining: Sequence[tuple[str, int]]
) -> str:
    """Canonical text form of (current command, remaining commands).

    Remaining commands appear in ledger order with their attempt counters;
    an absent current command serializes as an empty CUR field.
    """
    cur = current if current is not None else ""
    rem = ";".join(f"{text}@{attempts}" for text, attempts in remaining)
    return f"CUR:{cur}|REM:{rem}"


def _tokens(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def _bucket(gram: str, dim: int) -> int:
    digest = hashlib.blake2b(gram.encode("utf-8"), digest_size=8, person=b"bucket").digest()
    return int.from_bytes(digest, "little") % dim


def _sign(gram: str) -> float:
    digest = hashlib.blake2b(gram.encode("utf-8"), digest_size=1, person=b"sign").digest()
    return 1.0 if digest[0] & 1 else -1.0


class HashingEmbedder:
    """Token 3-gram signed feature hashing into a unit vector.

    Token sequences are padded with one boundary marker on each side so
    one- and two-token inputs still produce informative grams. An input
    with no grams at all (empty text) maps to the fixed basis vector e0,
    keeping the unit-norm contract total.
    """

    def __init__(self, dim: int = EMBED_DIM, ngram: int = 3):
        if dim < 1 or ngram < 1:
            raise ValueError("dim and ngram must be positive")
        self.dim = dim
        self.ngram = ngram

    def __call__(self, text: str) -> np.ndarray:
        toks = [_BOUNDARY] + _tokens(text) + [_BOUNDARY]
        v = np.zeros(self.dim, dtype=np.float64)
        n = self.ngram
        for i in range(len(toks) - n + 1):
            gram = "\x1f".join(toks[i : i + n])
            v[_bucket(gram, self.dim)] += _sign(gram)
        norm = float(np.linalg.norm(v))
        if norm == 0.0:
            out = np.zeros(self.dim, dtype=np.float64)
            out[0] = 1.0
            return out
        return v / norm


class RemoteEmbedder:
    """Adapter around an external encoder service.

    The transport is any callable taking the UTF-8 text and returning a
    sequence of floats; replies whose length differs from the configured
    dimension are rejected.
    """

    def __init__(self, transport: Callable[[str], Sequence[float]], dim: int = EMBED_DIM):
        self.transport = transport
        self.dim = dim

    def __call__(self, text: str) -> np.ndarray:
        try:
            values = self.transport(text)
        except Exception as exc:
            raise RemoteFailure(f"embedder transport failed: {exc}") from exc
        arr = np.asarray(list(values), dtype=np.float64)
        if arr.shape != (self.dim,):
            raise RemoteFailure(
                f"embedder reply has length {arr.shape}, expected ({self.dim},)"
            )
        return arr
