import json

import numpy as np
import pytest

from ctrlgen import tensor as T
from ctrlgen.classifier import BagOfEmbeddingsClassifier
from ctrlgen.cli import main
from ctrlgen.config import ExperimentConfig, dump_config, parse_config
from ctrlgen.controls import lexicon_rating
from ctrlgen.data import Vocabulary, read_tsv, synth_corpus
from ctrlgen.models import ConfigError
from ctrlgen.pipeline import load_model

TINY = """
[experiment]
task = length
workdir = {workdir}

[data]
synth_size = 400
observed = 3..12
evaluated = ["3..12", "13..18"]

[model]
token_dim = 8
hidden_dim = 12

[train]
epochs = 1

[grid]
families = lstm
strategies = scalar, learnable
"""


@pytest.fixture
def tiny(tmp_path):
    path = tmp_path / "tiny.ini"
    path.write_text(TINY.format(workdir=tmp_path / "work"), encoding="utf-8")
    return path


# --------------------------------------------------------------------------- config


def test_defaults_and_derived_values():
    cfg = parse_config("", env={})
    assert cfg.task == "length" and cfg.control.strategy == "scalar"
    assert cfg.value_range() == (0, 18)
    assert cfg.decode_max_len() == 27  # 1.5 x the top of the evaluation range
    assert cfg.model_config(50).control.tracker
    edit = parse_config("[experiment]\ntask = edit\n", env={})
    assert edit.decode_max_len() == 50 and edit.has_encoder() and edit.group_by_source()
    assert edit.value_range() == (0, 10)


def test_file_then_overrides_then_env():
    text = "[experiment]\nseed = 1\n[model]\nhidden_dim = 32\n"
    cfg = parse_config(text, {"model.hidden_dim": "48", "data.evaluated": "3..12, 13..20"}, env={})
    assert cfg.seed == 1 and cfg.model.hidden_dim == 48
    assert cfg.data.evaluated == ["3..12", "13..20"]
    assert parse_config(text, env={"CTRLGEN_SEED": "7"}).seed == 7


def test_config_errors():
    with pytest.raises(ConfigError, match="unknown config key"):
        parse_config("[model]\nwidth = 3\n", env={})
    with pytest.raises(ConfigError, match="unknown config section"):
        parse_config("[nope]\nx = 1\n", env={})
    with pytest.raises(ConfigError, match="tracker"):
        parse_config("[experiment]\ntask = sentiment\n[control]\ntracker = true\n", env={})
    with pytest.raises(ConfigError, match="257"):
        parse_config("[experiment]\ntask = sentiment\n[model]\nfamily = transformer\ntoken_dim = 256\nn_heads = 3\n",
                     env={})
    with pytest.raises(ConfigError):
        parse_config("[decode]\ntemperature = 0\n", env={})
    with pytest.raises(ConfigError):
        parse_config("[data]\nobserved = 12..3\n", env={})


def test_grid_configs_defer_the_divisibility_check():
    text = "[experiment]\ntask = sentiment\n[model]\nfamily = transformer\ntoken_dim = 256\nn_heads = 3\n"
    cfg = parse_config(text, env={}, check_model=False)
    assert cfg.task == "sentiment"


def test_dump_roundtrip():
    cfg = parse_config("[grid]\nseeds = 0, 1, 2\n", env={})
    back = parse_config(dump_config(cfg), env={})
    assert back == cfg and back.grid.seeds == [0, 1, 2]


def test_digest_ignores_workdir_and_grid():
    a = parse_config("[experiment]\nworkdir = a\n", env={})
    b = parse_config("[experiment]\nworkdir = b\n[grid]\nseeds = 4\n", env={})
    c = parse_config("[experiment]\nseed = 3\n", env={})
    assert a.digest() == b.digest() != c.digest()


# --------------------------------------------------------------------------- CLI


def test_synth_writes_tsv(tmp_path, capsys):
    out = tmp_path / "c.tsv"
    assert main(["synth", "--task", "edit", "--n", "50", "--lo", "4", "--hi", "8", "--out", str(out)]) == 0
    exs = read_tsv(out)
    assert len(exs) == 50 and all(e.source for e in exs)


def test_train_generate_evaluate_curve(tiny, tmp_path, capsys):
    ckpt = tmp_path / "m.ctgn"
    assert main(["train", "--config", str(tiny), "--out", str(ckpt)]) == 0
    assert "epoch,train_loss,valid_ppl" in capsys.readouterr().out
    model, vocab, header = load_model(ckpt)
    assert header["model"]["family"] == "lstm" and len(vocab) == model.config.vocab_size

    assert main(["generate", "--checkpoint", str(ckpt), "--c", "4", "15", "--n", "2"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert [ln.split("\t")[0] for ln in lines] == ["c=4", "c=4", "c=15", "c=15"]

    report = tmp_path / "r.json"
    assert main(["evaluate", "--checkpoint", str(ckpt), "--out", str(report)]) == 0
    names = [r["name"] for r in json.loads(report.read_text())["intervals"]]
    assert names == ["3..12", "13..18"]

    curve = tmp_path / "curve.csv"
    assert main(["curve", "--checkpoint", str(ckpt), "--range", "3..6", "--samples", "2",
                 "--decode.mode", "temperature", "--out", str(curve)]) == 0
    rows = curve.read_text().splitlines()
    assert rows[0] == "desired,mean_realized,stddev,n" and len(rows) == 5


def test_exit_codes(tiny, tmp_path, capsys):
    assert main(["train", "--config", str(tmp_path / "missing.ini")]) == 2
    assert main(["train", "--config", str(tiny), "--model.family", "gru"]) == 2
    assert main(["synth", "--lo", "1", "--hi", "4", "--out", str(tmp_path / "x.tsv")]) == 3
    assert main(["train", "--config", str(tiny), "--data.corpus", str(tmp_path / "none.tsv")]) == 3
    assert main(["train", "--config", str(tiny), "--train.learning_rate", "1e12",
                 "--train.grad_clip", "1e30", "--train.optimizer", "sgd"]) == 4


def test_grid_structure_and_rerun(tiny, tmp_path, capsys):
    out = tmp_path / "report"
    assert main(["grid", "--config", str(tiny), "--out", str(out)]) == 0
    table = (out / "table.txt").read_text().splitlines()
    assert table[0] == "task length seed 0"
    assert [ln.split()[1] for ln in table[2:5]] == ["no_control", "scalar", "learnable"]
    first = (out / "report.json").read_bytes()
    assert main(["grid", "--config", str(tiny), "--out", str(out)]) == 0
    assert (out / "report.json").read_bytes() == first
    cells = list((tmp_path / "work" / "cells").iterdir())
    assert len(cells) == 3
    assert all((c / "model.ctgn").exists() and (c / "train_log.csv").exists() for c in cells)


def test_grid_records_crashing_cells(tiny, tmp_path):
    from ctrlgen.config import load_config
    from ctrlgen.pipeline import run_grid

    cfg = load_config(tiny, {"train.learning_rate": "1e12", "train.grad_clip": "1e30", "train.optimizer": "sgd",
                             "grid.strategies": "scalar"})
    result = run_grid([cfg], tmp_path / "rep")
    assert not result.reports and len(result.failed) == 2
    assert "DivergenceError" in (tmp_path / "rep" / "table.txt").read_text()


# --------------------------------------------------------------------------- classifier


def test_bag_of_embeddings_classifier_learns_the_lexicon(tmp_path):
    exs = synth_corpus("sentiment", 1000, 4, 10, seed=0)
    v = Vocabulary.build([e.target for e in exs])
    with T.default_dtype(np.float64):
        clf = BagOfEmbeddingsClassifier(v, dim=16, seed=0)
        losses = clf.fit(exs[:800], epochs=8, lr=2e-2)
    assert losses[-1] < losses[0]
    assert clf.accuracy(exs[800:]) >= 60.0
    p = clf.predict_proba(exs[0].target)
    assert p.shape == (5,) and abs(p.sum() - 1) < 1e-12
    clf.save(tmp_path / "clf.ctgn")
    back = BagOfEmbeddingsClassifier.load(tmp_path / "clf.ctgn")
    np.testing.assert_allclose(back.predict_proba(exs[1].target), clf.predict_proba(exs[1].target), atol=1e-6)
    assert all(1 <= lexicon_rating(e.target) <= 5 for e in exs)
    assert isinstance(ExperimentConfig(), ExperimentConfig)
