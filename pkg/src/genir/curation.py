"""Batch dataset curation: simulated sessions over a target set, written as
JSONL trajectory records plus a manifest.

Output order is ascending (target_id, round) regardless of worker count, so
re-running a job with the same seed yields digest-identical files.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
import hashlib
import json
from pathlib import Path

from .errors import GenIRError, MalformedLine, SchemaVersionUnsupported
from .session import SessionConfig, SessionTrace, stable_hash64

SCHEMA_VERSION = 1

REQUIRED_KEYS = (
    "session_id", "target_id", "mode", "round", "query", "synthetic_image_ref",
    "retrieved_ids", "similarities", "rank_of_target", "label", "latency_ms",
)


@dataclass(frozen=True)
class CurationJob:
    targets: tuple
    session_config: SessionConfig
    output_dir: str
    image_subdir: str = "images"
    parallelism: int = 1
    seed: int = 0


@dataclass
class TrajectoryRecord:
    session_id: str
    target_id: str | None
    mode: str
    round: int
    query: str
    synthetic_image_ref: str | None
    retrieved_ids: list
    similarities: list
    rank_of_target: int | None
    label: int
    latency_ms: dict
    extra: dict = field(default_factory=dict)


def trace_to_records(trace: SessionTrace) -> list[TrajectoryRecord]:
    """Flatten a session trace into one record per round."""
    records = []
    for rnd in trace.rounds:
        entries = rnd.retrieved.entries if rnd.retrieved is not None else ()
        records.append(TrajectoryRecord(
            session_id=trace.session_id,
            target_id=trace.target_id,
            mode=trace.config.mode.kind,
            round=rnd.round,
            query=rnd.query,
            synthetic_image_ref=rnd.synthetic_image_ref,
            retrieved_ids=[e[0] for e in entries],
            similarities=[e[1] for e in entries],
            rank_of_target=rnd.rank_of_target,
            label=rnd.label,
            latency_ms=dict(rnd.latency_ms),
            extra={"error": rnd.error} if rnd.error else {},
        ))
    return records


def record_to_json(rec: TrajectoryRecord) -> str:
    body = {
        "schema_version": SCHEMA_VERSION,
        "session_id": rec.session_id,
        "target_id": rec.target_id,
        "mode": rec.mode,
        "round": rec.round,
        "query": rec.query,
        "synthetic_image_ref": rec.synthetic_image_ref,
        "retrieved_ids": rec.retrieved_ids,
        "similarities": rec.similarities,
        "rank_of_target": rec.rank_of_target,
        "label": rec.label,
        "latency_ms": rec.latency_ms,
    }
    body.update(rec.extra)
    return json.dumps(body, ensure_ascii=False, sort_keys=True)


def write_trajectories(records, destination) -> int:
    path = Path(destination)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(record_to_json(rec) + "\n")
            count += 1
    return count


def read_trajectories(source) -> list[TrajectoryRecord]:
    """Parse a JSONL trajectory file; unknown extra keys are kept opaquely."""
    records = []
    with open(source, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                body = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedLine(lineno, str(exc)) from exc
            if not isinstance(body, dict):
                raise MalformedLine(lineno, "line is not a JSON object")
            version = body.get("schema_version")
            if version != SCHEMA_VERSION:
                raise SchemaVersionUnsupported(f"schema_version {version!r}")
            missing = [key for key in REQUIRED_KEYS if key not in body]
            if missing:
                raise MalformedLine(lineno, f"missing keys: {', '.join(missing)}")
            extra = {k: v for k, v in body.items()
                     if k not in REQUIRED_KEYS and k != "schema_version"}
            records.append(TrajectoryRecord(
                session_id=body["session_id"],
                target_id=body["target_id"],
                mode=body["mode"],
                round=body["round"],
                query=body["query"],
                synthetic_image_ref=body["synthetic_image_ref"],
                retrieved_ids=body["retrieved_ids"],
                similarities=body["similarities"],
                rank_of_target=body["rank_of_target"],
                label=body["label"],
                latency_ms=body["latency_ms"],
                extra=extra,
            ))
    return records


def _config_hash(job: CurationJob) -> str:
    cfg = job.session_config
    blob = json.dumps({
        "targets": list(job.targets),
        "mode": cfg.mode.kind,
        "visual_fraction": cfg.mode.visual_fraction,
        "k": cfg.k,
        "max_rounds": cfg.max_rounds,
        "success_rule": cfg.success_rule,
        "stop_on_success": cfg.stop_on_success,
        "seed": job.seed,
    }, sort_keys=True)
    return hashlib.blake2b(blob.encode("utf-8"), digest_size=16).hexdigest()


def curate(engine, job: CurationJob) -> dict:
    """Run one simulated session per target and seal the dataset on disk.

    Returns the manifest. Per-target failures are recorded and skipped; the
    job only fails if more than half the targets error.
    """
    if not job.targets:
        raise GenIRError("curation job has no targets")
    out_dir = Path(job.output_dir)
    image_dir = out_dir / job.image_subdir
    image_dir.mkdir(parents=True, exist_ok=True)

    def run_one(target_id: str) -> SessionTrace:
        session_id = f"cur{stable_hash64(job.seed, target_id):016x}"
        return engine.run_simulated_session(job.session_config, target_id,
                                            session_id=session_id)

    failures = []
    traces = {}
    with ThreadPoolExecutor(max_workers=max(1, job.parallelism)) as pool:
        for target_id, outcome in zip(job.targets,
                                      pool.map(run_one, job.targets)):
            traces[target_id] = outcome

    records = []
    for target_id in sorted(traces):
        trace = traces[target_id]
        if trace.status == "errored":
            failures.append(target_id)
            continue
        for rnd in trace.rounds:
            if rnd.synthetic_image_ref is not None:
                blob = engine.image_store[rnd.synthetic_image_ref]
                (image_dir / rnd.synthetic_image_ref).write_bytes(blob.data)
        records.extend(trace_to_records(trace))

    if len(failures) * 2 > len(job.targets):
        raise GenIRError(
            f"curation failed: {len(failures)}/{len(job.targets)} targets errored")

    records.sort(key=lambda r: (r.target_id, r.round))
    written = write_trajectories(records, out_dir / "trajectories.jsonl")
    manifest = {
        "config_hash": _config_hash(job),
        "targets_total": len(job.targets),
        "targets_failed": sorted(failures),
        "records_written": written,
        "created_utc": datetime.now(timezone.utc).isoformat(),
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return manifest
