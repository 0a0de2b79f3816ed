"""Immutable exact-search index over unit-norm image embeddings.

Embeddings are stored as float32 (the on-disk representation); similarity
is accumulated in float64 so results agree with a brute-force float64
oracle to well under 1e-6. Ties are broken by insertion order, which is
stable and persisted.
"""

from dataclasses import dataclass, field
import struct

import numpy as np

from .errors import (
    BadMagic,
    DimensionMismatch,
    DuplicateId,
    EmptyIndex,
    EmptyInput,
    NonFinite,
    TruncatedFile,
    UnknownTarget,
    UnsupportedVersion,
    ZeroVector,
)

MAGIC = b"GENIRIDX"
FORMAT_VERSION = 1
DEFAULT_DIM = 256

NORM_TOLERANCE = 1e-6


def normalize(v, dim: int | None = None) -> np.ndarray:
    """L2-normalize a raw vector, returning a float32 unit vector."""
    arr = np.asarray(v, dtype=np.float64).ravel()
    if dim is not None and arr.shape[0] != dim:
        raise DimensionMismatch(f"expected dim {dim}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise NonFinite("vector contains NaN or Inf")
    norm = float(np.linalg.norm(arr))
    if norm == 0.0:
        raise ZeroVector("cannot normalize the zero vector")
    return (arr / norm).astype(np.float32)


def cosine(a, b) -> float:
    """Cosine similarity of two normalized vectors (their dot product)."""
    av = np.asarray(a, dtype=np.float64).ravel()
    bv = np.asarray(b, dtype=np.float64).ravel()
    if av.shape != bv.shape:
        raise DimensionMismatch(f"shape {av.shape} vs {bv.shape}")
    return float(np.clip(av @ bv, -1.0, 1.0))


@dataclass(frozen=True)
class ImageRecord:
    id: str
    embedding: np.ndarray
    uri: str = ""


@dataclass(frozen=True)
class RetrievalResult:
    entries: tuple  # ((id, similarity), ...) sorted non-increasing
    k_requested: int

    @property
    def ids(self):
        return [e[0] for e in self.entries]

    @property
    def similarities(self):
        return [e[1] for e in self.entries]


@dataclass(frozen=True)
class IndexSnapshot:
    """Frozen search index: ids in insertion order plus a unit-row matrix."""

    dim: int
    ids: tuple
    vectors: np.ndarray                      # (n, dim) float32, unit rows
    uris: tuple = ()
    _positions: dict = field(default_factory=dict, repr=False)
    _vectors64: np.ndarray = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return len(self.ids)

    def __contains__(self, image_id: str) -> bool:
        return image_id in self._positions

    def position_of(self, image_id: str) -> int:
        try:
            return self._positions[image_id]
        except KeyError:
            raise UnknownTarget(f"id {image_id!r} not in index") from None

    def embedding_of(self, image_id: str) -> np.ndarray:
        return self.vectors[self.position_of(image_id)].copy()

    def uri_of(self, image_id: str) -> str:
        pos = self.position_of(image_id)
        return self.uris[pos] if self.uris else ""

    def _similarities(self, query) -> np.ndarray:
        q = np.asarray(query, dtype=np.float64).ravel()
        if q.shape[0] != self.dim:
            raise DimensionMismatch(f"query dim {q.shape[0]}, index dim {self.dim}")
        return self._vectors64 @ q


def build_index(records, dim: int = DEFAULT_DIM) -> IndexSnapshot:
    """Build an immutable snapshot; embeddings are renormalized on the way in."""
    records = list(records)
    if not records:
        raise EmptyInput("no records given")
    ids, uris, rows = [], [], []
    seen = set()
    for rec in records:
        if rec.id in seen:
            raise DuplicateId(rec.id)
        seen.add(rec.id)
        ids.append(rec.id)
        uris.append(rec.uri)
        rows.append(normalize(rec.embedding, dim))
    vectors = np.vstack(rows).astype(np.float32)
    return _snapshot(dim, tuple(ids), vectors, tuple(uris))


def _snapshot(dim, ids, vectors, uris=()) -> IndexSnapshot:
    positions = {image_id: pos for pos, image_id in enumerate(ids)}
    vectors.setflags(write=False)
    return IndexSnapshot(
        dim=dim,
        ids=ids,
        vectors=vectors,
        uris=uris,
        _positions=positions,
        _vectors64=vectors.astype(np.float64),
    )


def top_k(index: IndexSnapshot, query, k: int) -> RetrievalResult:
    """Exact top-k by cosine over the whole index, ties by insertion order."""
    if index.size == 0:
        raise EmptyIndex("index has no records")
    if k < 1:
        raise ValueError("k must be >= 1")
    sims = index._similarities(query)
    order = np.argsort(-sims, kind="stable")  # stable => ties keep insertion order
    take = order[: min(k, index.size)]
    entries = tuple(
        (index.ids[pos], float(np.clip(sims[pos], -1.0, 1.0))) for pos in take
    )
    return RetrievalResult(entries=entries, k_requested=k)


def rank_of(index: IndexSnapshot, query, target_id: str) -> int:
    """1-based position of target_id in the full similarity ordering."""
    target_pos = index.position_of(target_id)
    sims = index._similarities(query)
    target_sim = sims[target_pos]
    # same ordering as the stable sort: strictly better, or tied and earlier
    better = int(np.sum(sims > target_sim))
    tied_before = int(np.sum(sims[:target_pos] == target_sim))
    return better + tied_before + 1


def save_index(index: IndexSnapshot, destination) -> None:
    """Write the little-endian GENIRIDX binary format (version 1)."""
    with open(destination, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        fh.write(struct.pack("<I", index.dim))
        fh.write(struct.pack("<Q", index.size))
        for pos, image_id in enumerate(index.ids):
            encoded = image_id.encode("utf-8")
            if len(encoded) > 0xFFFF:
                raise ValueError(f"id too long for format: {image_id!r}")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(index.vectors[pos].tobytes())


def load_index(source) -> IndexSnapshot:
    """Read a GENIRIDX file back into an IndexSnapshot, bits preserved."""
    with open(source, "rb") as fh:
        data = fh.read()
    if len(data) < len(MAGIC):
        raise TruncatedFile("file shorter than magic")
    if data[: len(MAGIC)] != MAGIC:
        raise BadMagic(f"bad magic {data[:len(MAGIC)]!r}")
    pos = len(MAGIC)

    def take(n, what):
        nonlocal pos
        if pos + n > len(data):
            raise TruncatedFile(f"truncated while reading {what}")
        chunk = data[pos:pos + n]
        pos += n
        return chunk

    (version,) = struct.unpack("<I", take(4, "version"))
    if version != FORMAT_VERSION:
        raise UnsupportedVersion(f"version {version}")
    (dim,) = struct.unpack("<I", take(4, "dim"))
    if dim == 0:
        raise DimensionMismatch("dim 0 in header")
    (count,) = struct.unpack("<Q", take(8, "count"))
    ids = []
    vectors = np.empty((count, dim), dtype=np.float32)
    row_bytes = dim * 4
    for i in range(count):
        (id_len,) = struct.unpack("<H", take(2, f"id length #{i}"))
        ids.append(take(id_len, f"id #{i}").decode("utf-8"))
        vectors[i] = np.frombuffer(take(row_bytes, f"embedding #{i}"), dtype="<f4")
    if pos != len(data):
        raise TruncatedFile("trailing bytes after last record")
    return _snapshot(dim, tuple(ids), vectors)
