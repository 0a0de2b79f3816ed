"""Command line entry points: index build/info, simulate, curate, eval, serve.

Exit codes: 0 ok, 1 usage or missing input, 2 parse error, 3 write failure,
4 backend unreachable, 5 output exists without --force.
"""

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import evaluation
from .curation import CurationJob, curate, read_trajectories, write_trajectories, trace_to_records
from .errors import BackendTimeout, BackendUnavailable, GenIRError, MalformedLine
from .gateway import BackendEndpoint, HttpGateway, ImageBlob, MockGateway, mock_image_provider
from .index import ImageRecord, build_index, load_index, save_index
from .mockworld import MockWorld, MockWorldConfig
from .session import FeedbackMode, SessionConfig, SessionEngine, stable_hash64

EXIT_USAGE = 1
EXIT_PARSE = 2
EXIT_WRITE = 3
EXIT_BACKEND = 4
EXIT_EXISTS = 5


def _fail(code: int, message: str):
    print(f"genir: {message}", file=sys.stderr)
    raise SystemExit(code)


def _check_input(path: str):
    if not Path(path).exists():
        _fail(EXIT_USAGE, f"no such file: {path}")


def _check_output(path: str, force: bool):
    if Path(path).exists() and not force:
        _fail(EXIT_EXISTS, f"output exists (use --force to overwrite): {path}")


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    _check_input(path)
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        _fail(EXIT_PARSE, f"config parse error: {exc}")


def _mock_config(args, config: dict) -> MockWorldConfig:
    mock = config.get("mock", {})
    return MockWorldConfig(
        dim=args.dim if args.dim is not None else mock.get("dim", 32),
        noise_sigma_0=args.noise_sigma if args.noise_sigma is not None
        else mock.get("noise_sigma_0", 1.0),
        noise_decay=args.noise_decay if args.noise_decay is not None
        else mock.get("noise_decay", 0.8),
        seed=args.seed,
        alpha=args.alpha if args.alpha is not None else mock.get("alpha", 0.5),
    )


def _backend_urls(config: dict) -> dict:
    urls = {
        "generator": os.environ.get("GENIR_GENERATOR_URL",
                                    config.get("generator_url", "")),
        "embedder": os.environ.get("GENIR_EMBEDDER_URL",
                                   config.get("embedder_url", "")),
        "agent": os.environ.get("GENIR_AGENT_URL", config.get("agent_url", "")),
    }
    return urls if any(urls.values()) else {}


def _build_stack(args, config: dict, index):
    """Gateway + image provider: HTTP backends when configured, else mock."""
    world = MockWorld(_mock_config(args, config))
    urls = _backend_urls(config)
    if urls:
        if not all(urls.values()):
            _fail(EXIT_USAGE, "generator, embedder, and agent URLs must all be set")
        gateway = HttpGateway(
            generator=BackendEndpoint("generator", urls["generator"],
                                      timeout_ms=120_000),
            image_embedder=BackendEndpoint("image_embedder", urls["embedder"]),
            text_embedder=BackendEndpoint("text_embedder", urls["embedder"]),
            agent=BackendEndpoint("agent", urls["agent"]),
            dim=index.dim,
        )
    else:
        gateway = MockGateway(world)

    mock_provider = mock_image_provider(world, index)

    def provider(image_id: str) -> ImageBlob:
        uri = index.uri_of(image_id)
        if uri and Path(uri).is_file():
            fmt = "jpeg" if Path(uri).suffix.lower() in (".jpg", ".jpeg") else "png"
            return ImageBlob(fmt, Path(uri).read_bytes(), "database")
        return mock_provider(image_id)

    return gateway, provider


def _resolve_targets(args, index) -> list:
    if args.targets:
        targets = [t for t in args.targets.split(",") if t]
    elif args.targets_file:
        _check_input(args.targets_file)
        targets = [line.strip() for line in
                   Path(args.targets_file).read_text(encoding="utf-8").splitlines()
                   if line.strip()]
    else:
        targets = list(index.ids)
    if args.num_targets is not None:
        targets = targets[: args.num_targets]
    missing = [t for t in targets if t not in index]
    if missing:
        _fail(EXIT_USAGE, f"targets not in index: {', '.join(missing[:5])}")
    if not targets:
        _fail(EXIT_USAGE, "no targets selected")
    return targets


# --- subcommands --------------------------------------------------------------

def cmd_index_build(args):
    _check_input(args.embeddings)
    _check_output(args.out, args.force)
    records = []
    with open(args.embeddings, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                body = json.loads(line)
                rec = ImageRecord(id=body["id"],
                                  embedding=np.asarray(body["embedding"], dtype=np.float64),
                                  uri=body.get("uri", ""))
                if len(body["embedding"]) != args.dim:
                    raise ValueError(
                        f"embedding has dim {len(body['embedding'])}, expected {args.dim}")
                records.append(rec)
            except (KeyError, ValueError, TypeError, json.JSONDecodeError) as exc:
                _fail(EXIT_PARSE, f"{args.embeddings}:{lineno}: {exc}")
    try:
        index = build_index(records, dim=args.dim)
    except GenIRError as exc:
        _fail(EXIT_PARSE, str(exc))
    try:
        save_index(index, args.out)
    except OSError as exc:
        _fail(EXIT_WRITE, f"cannot write {args.out}: {exc}")
    print(f"wrote {index.size} records, dim {index.dim} -> {args.out}")
    return 0


def cmd_index_info(args):
    _check_input(args.index)
    try:
        index = load_index(args.index)
    except GenIRError as exc:
        _fail(EXIT_PARSE, str(exc))
    print(f"path: {args.index}")
    print(f"dim: {index.dim}")
    print(f"count: {index.size}")
    return 0


def cmd_simulate(args):
    config = _load_config(args.config)
    _check_input(args.index)
    _check_output(args.out, args.force)
    index = load_index(args.index)
    gateway, provider = _build_stack(args, config, index)
    engine = SessionEngine(index, gateway, image_provider=provider,
                           latency_mode="simulated")
    mode = FeedbackMode(kind=args.mode,
                        visual_fraction=args.visual_fraction
                        if args.mode == "hybrid_random" else None)
    session_config = SessionConfig(
        mode=mode, k=args.k, max_rounds=args.max_rounds,
        success_rule="rank1" if args.curation_semantics else "topk",
        stop_on_success=not args.curation_semantics)
    targets = _resolve_targets(args, index)
    records = []
    try:
        for target_id in targets:
            sid = f"sim{stable_hash64(args.seed, target_id):016x}"
            trace = engine.run_simulated_session(session_config, target_id,
                                                 session_id=sid)
            if trace.status == "errored":
                stage = trace.rounds[-1].error if trace.rounds else "backend"
                _fail(EXIT_BACKEND,
                      f"session for {target_id} failed at stage {stage}")
            records.extend(trace_to_records(trace))
    except (BackendUnavailable, BackendTimeout) as exc:
        _fail(EXIT_BACKEND, str(exc))
    records.sort(key=lambda r: (r.target_id, r.round))
    try:
        count = write_trajectories(records, args.out)
    except OSError as exc:
        _fail(EXIT_WRITE, f"cannot write {args.out}: {exc}")
    print(f"simulated {len(targets)} sessions, wrote {count} records -> {args.out}")
    return 0


def cmd_curate(args):
    config = _load_config(args.config)
    _check_input(args.index)
    out_dir = Path(args.out)
    if (out_dir / "trajectories.jsonl").exists() and not args.force:
        _fail(EXIT_EXISTS,
              f"output exists (use --force to overwrite): {out_dir / 'trajectories.jsonl'}")
    index = load_index(args.index)
    gateway, provider = _build_stack(args, config, index)
    engine = SessionEngine(index, gateway, image_provider=provider,
                           latency_mode="simulated")
    mode = FeedbackMode(kind=args.mode,
                        visual_fraction=args.visual_fraction
                        if args.mode == "hybrid_random" else None)
    session_config = SessionConfig(mode=mode, k=args.k, max_rounds=args.max_rounds,
                                   success_rule="rank1", stop_on_success=False)
    targets = _resolve_targets(args, index)
    job = CurationJob(targets=tuple(targets), session_config=session_config,
                      output_dir=args.out, parallelism=args.parallelism,
                      seed=args.seed)
    try:
        manifest = curate(engine, job)
    except (BackendUnavailable, BackendTimeout) as exc:
        _fail(EXIT_BACKEND, str(exc))
    except OSError as exc:
        _fail(EXIT_WRITE, f"cannot write under {args.out}: {exc}")
    print(f"curated {manifest['records_written']} records "
          f"({len(manifest['targets_failed'])} targets failed) -> {args.out}")
    return 0


def _read_records(path: str):
    _check_input(path)
    try:
        return read_trajectories(path)
    except MalformedLine as exc:
        _fail(EXIT_PARSE, f"{path}: {exc}")
    except GenIRError as exc:
        _fail(EXIT_PARSE, f"{path}: {exc}")


def _write_text(path: str, text: str, force: bool):
    _check_output(path, force)
    try:
        Path(path).write_text(text, encoding="utf-8", newline="\n")
    except OSError as exc:
        _fail(EXIT_WRITE, f"cannot write {path}: {exc}")


def cmd_eval_hits(args):
    records = _read_records(args.trajectories)
    try:
        curve = evaluation.hits_curve(records, k=args.k, convention=args.convention)
    except GenIRError as exc:
        _fail(EXIT_PARSE, str(exc))
    mode = records[0].mode if records else "mode"
    csv = evaluation.curves_to_csv({mode: curve})
    if args.out:
        _write_text(args.out, csv, args.force)
        print(f"wrote {args.out}")
    else:
        print(csv, end="")
    return 0


def cmd_eval_hybrid(args):
    verbal = _read_records(args.verbal)
    visual = _read_records(args.visual)
    try:
        report = evaluation.hybrid_report(verbal, visual, k=args.k, p=args.p)
    except GenIRError as exc:
        _fail(EXIT_PARSE, str(exc))
    text = json.dumps(report, indent=2) + "\n"
    if args.out:
        _write_text(args.out, text, args.force)
        print(f"wrote {args.out}")
    else:
        print(text, end="")
    return 0


def cmd_eval_latency(args):
    records = _read_records(args.trajectories)
    try:
        report = evaluation.latency_report(records)
    except GenIRError as exc:
        _fail(EXIT_PARSE, str(exc))
    text = json.dumps(report, indent=2) + "\n"
    if args.out:
        _write_text(args.out, text, args.force)
        print(f"wrote {args.out}")
    else:
        print(text, end="")
    return 0


def cmd_serve(args):
    import uvicorn

    from .service import create_app

    config = _load_config(args.config)
    _check_input(args.index)
    index = load_index(args.index)
    gateway, provider = _build_stack(args, config, index)
    engine = SessionEngine(index, gateway, image_provider=provider)
    app = create_app(engine, trajectory_log=args.trajectory_log,
                     cors_origins=config.get("cors_origins", ["*"]))
    host, _, port = args.listen.rpartition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port))
    return 0


def cmd_mock_backend(args):
    import uvicorn

    from .mockserver import create_mock_backend_app

    config = _load_config(args.config)
    app = create_mock_backend_app(_mock_config(args, config))
    host, _, port = args.listen.rpartition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port))
    return 0


# --- parser -------------------------------------------------------------------

def _add_common(parser, out_default=None):
    parser.add_argument("--config", default=None, help="JSON config file")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--force", action="store_true",
                        help="overwrite existing outputs")


def _add_mock_options(parser):
    parser.add_argument("--dim", type=int, default=None)
    parser.add_argument("--noise-sigma", type=float, default=None)
    parser.add_argument("--noise-decay", type=float, default=None)
    parser.add_argument("--alpha", type=float, default=None)


def _add_session_options(parser):
    parser.add_argument("--mode", default="generative",
                        choices=["generative", "verbal", "prediction", "hybrid_random"])
    parser.add_argument("--visual-fraction", type=float, default=0.223)
    parser.add_argument("--k", type=int, default=10)
    parser.add_argument("--max-rounds", type=int, default=10)
    parser.add_argument("--targets", default=None, help="comma-separated ids")
    parser.add_argument("--targets-file", default=None)
    parser.add_argument("--num-targets", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="genir")
    sub = parser.add_subparsers(dest="command", required=True)

    p_index = sub.add_parser("index", help="index build / inspection")
    index_sub = p_index.add_subparsers(dest="index_command", required=True)
    p_build = index_sub.add_parser("build")
    p_build.add_argument("--embeddings", required=True,
                         help="JSONL rows: {id, embedding, uri?}")
    p_build.add_argument("--out", required=True)
    p_build.add_argument("--dim", type=int, default=256)
    _add_common(p_build)
    p_build.set_defaults(func=cmd_index_build)
    p_info = index_sub.add_parser("info")
    p_info.add_argument("index")
    p_info.set_defaults(func=cmd_index_info)

    p_sim = sub.add_parser("simulate", help="run simulated sessions")
    p_sim.add_argument("--index", required=True)
    p_sim.add_argument("--out", required=True)
    p_sim.add_argument("--curation-semantics", action="store_true",
                       help="run every round instead of stopping at success")
    _add_session_options(p_sim)
    _add_mock_options(p_sim)
    _add_common(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_cur = sub.add_parser("curate", help="run the dataset curation pipeline")
    p_cur.add_argument("--index", required=True)
    p_cur.add_argument("--out", required=True, help="output directory")
    p_cur.add_argument("--parallelism", type=int, default=1)
    _add_session_options(p_cur)
    _add_mock_options(p_cur)
    _add_common(p_cur)
    p_cur.set_defaults(func=cmd_curate)

    p_eval = sub.add_parser("eval", help="evaluation reports")
    eval_sub = p_eval.add_subparsers(dest="eval_command", required=True)
    p_hits = eval_sub.add_parser("hits")
    p_hits.add_argument("--trajectories", required=True)
    p_hits.add_argument("--k", type=int, default=10)
    p_hits.add_argument("--convention", default="cumulative",
                        choices=["cumulative", "per_round"])
    p_hits.add_argument("--out", default=None)
    _add_common(p_hits)
    p_hits.set_defaults(func=cmd_eval_hits)
    p_hybrid = eval_sub.add_parser("hybrid")
    p_hybrid.add_argument("--verbal", required=True)
    p_hybrid.add_argument("--visual", required=True)
    p_hybrid.add_argument("--p", type=float, default=0.223)
    p_hybrid.add_argument("--k", type=int, default=10)
    p_hybrid.add_argument("--out", default=None)
    _add_common(p_hybrid)
    p_hybrid.set_defaults(func=cmd_eval_hybrid)
    p_lat = eval_sub.add_parser("latency")
    p_lat.add_argument("--trajectories", required=True)
    p_lat.add_argument("--out", default=None)
    _add_common(p_lat)
    p_lat.set_defaults(func=cmd_eval_latency)

    p_serve = sub.add_parser("serve", help="run the session HTTP service")
    p_serve.add_argument("--index", required=True)
    p_serve.add_argument("--listen", default="127.0.0.1:8404")
    p_serve.add_argument("--trajectory-log", default=None)
    _add_mock_options(p_serve)
    _add_common(p_serve)
    p_serve.set_defaults(func=cmd_serve)

    p_mock = sub.add_parser("mock-backend",
                            help="serve the deterministic mock model backend")
    p_mock.add_argument("--listen", default="127.0.0.1:8405")
    _add_mock_options(p_mock)
    _add_common(p_mock)
    p_mock.set_defaults(func=cmd_mock_backend)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; the contract here is 1
        raise SystemExit(EXIT_USAGE if exc.code not in (0, None) else 0)
    return args.func(args) or 0


if __name__ == "__main__":
    raise SystemExit(main())
