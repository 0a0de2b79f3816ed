import json

import numpy as np
import pytest

from genir.cli import main
from genir.curation import read_trajectories
from genir.index import load_index


def run(argv):
    try:
        return main(argv)
    except SystemExit as exc:
        return exc.code


@pytest.fixture
def embeddings_file(tmp_path):
    rng = np.random.default_rng(0)
    path = tmp_path / "embeddings.jsonl"
    with path.open("w", encoding="utf-8") as fh:
        for i in range(40):
            fh.write(json.dumps({"id": f"img{i:05d}",
                                 "embedding": rng.normal(size=8).tolist()}) + "\n")
    return path


@pytest.fixture
def index_file(embeddings_file, tmp_path):
    path = tmp_path / "corpus.genir"
    assert run(["index", "build", "--embeddings", str(embeddings_file),
                "--out", str(path), "--dim", "8"]) == 0
    return path


def test_index_build_and_info(index_file, capsys):
    index = load_index(index_file)
    assert index.size == 40
    assert run(["index", "info", str(index_file)]) == 0
    out = capsys.readouterr().out
    assert "dim: 8" in out
    assert "count: 40" in out


def test_index_build_refuses_overwrite(embeddings_file, index_file):
    assert run(["index", "build", "--embeddings", str(embeddings_file),
                "--out", str(index_file), "--dim", "8"]) == 5
    assert run(["index", "build", "--embeddings", str(embeddings_file),
                "--out", str(index_file), "--dim", "8", "--force"]) == 0


def test_index_build_parse_error(tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"id": "a"}\n', encoding="utf-8")
    assert run(["index", "build", "--embeddings", str(bad),
                "--out", str(tmp_path / "x.genir"), "--dim", "8"]) == 2


def test_missing_input_is_usage_error(tmp_path):
    assert run(["index", "info", str(tmp_path / "nope.genir")]) == 1
    assert run(["simulate", "--index", str(tmp_path / "nope.genir"),
                "--out", str(tmp_path / "t.jsonl")]) == 1


def test_bad_arguments_exit_1():
    assert run(["definitely-not-a-command"]) == 1
    assert run(["index"]) == 1


def test_simulate_then_eval_hits(index_file, tmp_path, capsys):
    out = tmp_path / "sim.jsonl"
    assert run(["simulate", "--index", str(index_file), "--out", str(out),
                "--num-targets", "6", "--max-rounds", "3",
                "--curation-semantics", "--dim", "8",
                "--noise-sigma", "1.5"]) == 0
    records = read_trajectories(out)
    assert len(records) == 6 * 4
    capsys.readouterr()
    assert run(["eval", "hits", "--trajectories", str(out), "--k", "5"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "dialog_length,generative"
    assert len(lines) == 5


def test_simulate_deterministic_across_runs(index_file, tmp_path):
    outs = []
    for name in ("a.jsonl", "b.jsonl"):
        out = tmp_path / name
        assert run(["simulate", "--index", str(index_file), "--out", str(out),
                    "--num-targets", "4", "--max-rounds", "2",
                    "--curation-semantics", "--dim", "8", "--seed", "9",
                    "--noise-sigma", "2.0"]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_curate_and_eval_hybrid(index_file, tmp_path, capsys):
    out_v = tmp_path / "verbal"
    out_g = tmp_path / "gen"
    for mode, out in (("verbal", out_v), ("generative", out_g)):
        assert run(["curate", "--index", str(index_file), "--out", str(out),
                    "--mode", mode, "--num-targets", "8", "--max-rounds", "2",
                    "--dim", "8", "--noise-sigma", "1.5",
                    "--parallelism", "2"]) == 0
        assert (out / "manifest.json").exists()
    capsys.readouterr()
    assert run(["eval", "hybrid",
                "--verbal", str(out_v / "trajectories.jsonl"),
                "--visual", str(out_g / "trajectories.jsonl")]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["p"] == 0.223
    assert len(report["rows"]) == 3


def test_eval_latency(index_file, tmp_path, capsys):
    out = tmp_path / "sim.jsonl"
    run(["simulate", "--index", str(index_file), "--out", str(out),
         "--num-targets", "3", "--max-rounds", "2", "--curation-semantics",
         "--dim", "8"])
    capsys.readouterr()
    assert run(["eval", "latency", "--trajectories", str(out)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert "generative" in report
    assert report["generative"]["stages"]["generate"]["count"] == 9


def test_eval_parse_error(tmp_path):
    bad = tmp_path / "broken.jsonl"
    bad.write_text("{oops\n", encoding="utf-8")
    assert run(["eval", "hits", "--trajectories", str(bad)]) == 2


def test_backend_unreachable_exit_4(index_file, tmp_path, monkeypatch):
    monkeypatch.setenv("GENIR_GENERATOR_URL", "http://127.0.0.1:1")
    monkeypatch.setenv("GENIR_EMBEDDER_URL", "http://127.0.0.1:1")
    monkeypatch.setenv("GENIR_AGENT_URL", "http://127.0.0.1:1")
    assert run(["simulate", "--index", str(index_file),
                "--out", str(tmp_path / "t.jsonl"),
                "--num-targets", "1", "--max-rounds", "1"]) == 4
