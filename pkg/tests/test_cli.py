import json
from pathlib import Path
from typing import List

import numpy as np
import pytest

from xmal.cli import build_parser, main, parse_stores
from xmal.config import RunConfig
from xmal.data.store import read_store
from xmal.errors import ConfigError
from xmal.main import AlignmentPipeline
from xmal.training.checkpoint import load_checkpoint


def _run(config: Path, *args: str) -> None:
    main(["--config", str(config), *args])


def _prepare(config: Path) -> None:
    for command in ("synth", "extract-psych", "build-targets"):
        _run(config, command)


def _exit_code(argv: List[str]) -> int:
    with pytest.raises(SystemExit) as excinfo:
        main(argv)
    return excinfo.value.code


def test_parser_requires_a_command() -> None:
    assert _exit_code([]) == 1
    assert _exit_code(["train", "--loss", "triplet"]) == 1


def test_parse_stores() -> None:
    assert parse_stores(["a=x.xmal", "b=y.xmal"]) == {"a": Path("x.xmal"), "b": Path("y.xmal")}
    with pytest.raises(ConfigError):
        parse_stores(["missing-separator"])
    with pytest.raises(ConfigError, match="Duplicate"):
        parse_stores(["a=x", "a=y"])


def test_eval_flags_parse() -> None:
    args = build_parser().parse_args(["--seed", "4", "eval", "--store", "a=x", "--store", "b=y", "--baseline", "a"])
    assert args.seed == 4 and args.store == ["a=x", "b=y"] and args.baseline == "a"


def test_full_command_sequence(run_config_file: Path, tmp_path: Path) -> None:
    _prepare(run_config_file)
    runs = tmp_path / "runs"
    assert json.loads((runs / "split.json").read_text(encoding="utf-8")).keys() == {"train", "val", "test"}
    assert read_store(runs / "psych.xmal").dim == 10
    assert read_store(runs / "targets.xmal").dim == 12

    _run(run_config_file, "train", "--epochs", "0")
    assert (runs / "checkpoint").is_dir()
    assert (runs / "history.jsonl").read_text(encoding="utf-8") == ""
    initial = AlignmentPipeline(RunConfig.load(run_config_file)).fresh_student(12).copy_parameters()
    saved = load_checkpoint(runs / "checkpoint").copy_parameters()
    assert saved.keys() == initial.keys()
    for name, tensor in initial.items():
        np.testing.assert_array_equal(saved[name], tensor.astype(np.float32).astype(np.float64))

    _run(run_config_file, "embed")
    embeddings = read_store(runs / "embeddings.xmal")
    assert len(embeddings) == 24 and embeddings.dim == 12

    _run(run_config_file, "eval")
    rows = [json.loads(line) for line in (runs / "report.jsonl").read_text(encoding="utf-8").splitlines()]
    assert [(row["model"], row["outcome"]) for row in rows] == [("student", "latent_score")]

    _run(run_config_file, "analyze")
    analysis = runs / "analysis"
    assert (analysis / "overlap.json").exists()
    assert (analysis / "heatmap.csv").exists()
    assert (analysis / "ngrams_latent_score.csv").exists()


def test_eval_identical_stores_match(run_config_file: Path, tmp_path: Path) -> None:
    _prepare(run_config_file)
    _run(run_config_file, "train")
    _run(run_config_file, "embed")
    store = tmp_path / "runs" / "embeddings.xmal"

    _run(run_config_file, "eval", "--store", f"a={store}", "--store", f"b={store}", "--baseline", "b")
    rows = [json.loads(line) for line in (tmp_path / "runs" / "report.jsonl").read_text(encoding="utf-8").splitlines()]
    assert rows[0]["pearson_r"] == rows[1]["pearson_r"]
    assert rows[0]["mse"] == rows[1]["mse"]
    assert rows[0]["significant"] is False


def test_same_seed_runs_are_byte_identical(run_config_file: Path, tmp_path: Path) -> None:
    _prepare(run_config_file)
    outputs = []
    for name in ("first", "second"):
        out = tmp_path / name
        for command in ("extract-psych", "build-targets", "train", "embed", "eval"):
            main(["--config", str(run_config_file), "--out", str(out), command])
        artifacts = ("embeddings.xmal", "report.jsonl", "report.txt")
        outputs.append([(out / artifact).read_bytes() for artifact in artifacts])
    assert outputs[0] == outputs[1]


def test_missing_store_exits_with_data_error(run_config_file: Path, tmp_path: Path) -> None:
    _run(run_config_file, "synth")
    code = _exit_code(["--config", str(run_config_file), "eval", "--store", f"a={tmp_path / 'nope.xmal'}"])
    assert code == 2


def test_missing_prerequisite_exits_with_data_error(run_config_file: Path) -> None:
    _run(run_config_file, "synth")
    assert _exit_code(["--config", str(run_config_file), "train"]) == 2


def test_bad_config_exits_with_config_error(tmp_path: Path) -> None:
    path = tmp_path / "bad.yaml"
    path.write_text("trian:\n  epochs: 1\n", encoding="utf-8")
    assert _exit_code(["--config", str(path), "synth"]) == 1


def test_log_file_receives_records(run_config_file: Path, tmp_path: Path) -> None:
    log_file = tmp_path / "xmal.log"
    main(["--config", str(run_config_file), "--log-file", str(log_file), "synth"])
    assert "Saved synthetic corpus" in log_file.read_text(encoding="utf-8")


def test_synth_reruns_are_byte_identical(run_config_file: Path, tmp_path: Path) -> None:
    roots = [tmp_path / "first", tmp_path / "second"]
    for root in roots:
        main(["--config", str(run_config_file), "--data-dir", str(root), "synth"])

    files = sorted(path.relative_to(roots[0]) for path in roots[0].rglob("*") if path.is_file())
    assert {"manifest.jsonl", "teacher.xmal", "outcomes.csv", "lexicon.csv"} <= {str(path) for path in files}
    for relative in files:
        assert (roots[0] / relative).read_bytes() == (roots[1] / relative).read_bytes(), relative


def test_exponent_written_without_dot_trains(run_config_file: Path, tmp_path: Path) -> None:
    text = run_config_file.read_text(encoding="utf-8")
    assert "learning_rate: 0.001" in text
    run_config_file.write_text(text.replace("learning_rate: 0.001", "learning_rate: 1e-3"), encoding="utf-8")

    _prepare(run_config_file)
    _run(run_config_file, "train")
    assert len((tmp_path / "runs" / "history.jsonl").read_text(encoding="utf-8").splitlines()) == 1


def test_non_numeric_learning_rate_exits_with_config_error(run_config_file: Path) -> None:
    text = run_config_file.read_text(encoding="utf-8")
    run_config_file.write_text(text.replace("learning_rate: 0.001", "learning_rate: fast"), encoding="utf-8")
    assert _exit_code(["--config", str(run_config_file), "synth"]) == 1


def test_os_error_exits_with_data_error(run_config_file: Path, tmp_path: Path) -> None:
    _run(run_config_file, "synth")
    blocker = tmp_path / "blocker"
    blocker.write_text("not a directory", encoding="utf-8")
    assert _exit_code(["--config", str(run_config_file), "--out", str(blocker), "build-targets"]) == 2


def test_failure_reaches_stderr_when_logging_to_file(
    run_config_file: Path, tmp_path: Path, capsys: pytest.CaptureFixture[str]
) -> None:
    log_file = tmp_path / "xmal.log"
    missing = tmp_path / "nope.xmal"
    argv = ["--config", str(run_config_file), "--log-file", str(log_file), "eval", "--store", f"a={missing}"]
    _run(run_config_file, "synth")
    capsys.readouterr()

    assert _exit_code(argv) == 2
    stderr = capsys.readouterr().err
    assert stderr.count("\n") == 1
    assert "xmal eval: error: Store 'a' not found" in stderr
    assert "not found" in log_file.read_text(encoding="utf-8")
