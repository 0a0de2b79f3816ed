# Building an index and searching it
#
# The core of genir is an exact cosine-similarity index over unit-norm image
# embeddings. This script builds a small index from random vectors, runs a
# few searches, and round-trips the index through its binary file format.

import tempfile
from pathlib import Path

import numpy as np

from genir import ImageRecord, build_index, load_index, rank_of, save_index, top_k

rng = np.random.default_rng(0)
dim = 32

# An ImageRecord pairs an image id with its embedding. Embeddings are
# renormalized to unit length at build time, so any scale is fine here.
records = [ImageRecord(id=f"img{i:04d}", embedding=rng.normal(size=dim))
           for i in range(1000)]
index = build_index(records, dim=dim)
print(f"built index: {index.size} records, dim {index.dim}")

# Query with a noisy copy of a known embedding. top_k returns ids and cosine
# similarities in descending order; ties keep insertion order.
target = "img0042"
query = index.embedding_of(target) + 0.1 * rng.normal(size=dim)
result = top_k(index, query, k=5)
for rid, sim in result.entries:
    marker = "  <-- target" if rid == target else ""
    print(f"  {rid}  cos={sim:.4f}{marker}")

# rank_of gives the 1-based position of a specific image for a query,
# without materializing the full ranking.
print(f"rank of {target} for this query: {rank_of(index, query, target)}")

# The index serializes to a compact binary file and loads back bit-identically.
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "corpus.genir"
    save_index(index, path)
    loaded = load_index(path)
    print(f"round-tripped through {path.name}: "
          f"{loaded.size} records, vectors equal: "
          f"{np.array_equal(loaded.vectors, index.vectors)}")
