# Curating a trajectory dataset
#
# The curation pipeline runs one full simulated session per target image and
# writes every round as a JSONL trajectory record, plus the synthetic images
# and a manifest. Runs are deterministic: the same seed produces
# byte-identical output files.

import json
import tempfile
from pathlib import Path

import numpy as np

from genir import ImageRecord, build_index
from genir.curation import CurationJob, curate, read_trajectories
from genir.gateway import MockGateway, mock_image_provider
from genir.mockworld import MockWorld, MockWorldConfig
from genir.session import FeedbackMode, SessionConfig, SessionEngine

rng = np.random.default_rng(3)
dim = 32
index = build_index([ImageRecord(id=f"img{i:04d}", embedding=rng.normal(size=dim))
                     for i in range(300)], dim=dim)

world = MockWorld(MockWorldConfig(dim=dim, noise_sigma_0=3.0, seed=3, alpha=0.5))
engine = SessionEngine(index, MockGateway(world),
                       image_provider=mock_image_provider(world, index),
                       latency_mode="simulated")

# Curation sessions run every round 0..max_rounds regardless of early hits,
# so each target contributes max_rounds + 1 labeled records.
config = SessionConfig(mode=FeedbackMode("generative"), k=10, max_rounds=5,
                       success_rule="rank1", stop_on_success=False)

with tempfile.TemporaryDirectory() as tmp:
    job = CurationJob(targets=tuple(index.ids[:20]), session_config=config,
                      output_dir=tmp, parallelism=4, seed=3)
    manifest = curate(engine, job)
    print("manifest:", json.dumps(manifest, indent=2))

    records = read_trajectories(Path(tmp) / "trajectories.jsonl")
    print(f"\n{len(records)} records; first one:")
    first = records[0]
    print(f"  session {first.session_id}, round {first.round}, "
          f"label {first.label}, rank {first.rank_of_target}")
    print(f"  query: {first.query[:60]}...")

    images = list((Path(tmp) / "images").iterdir())
    print(f"{len(images)} synthetic images written alongside the records")
