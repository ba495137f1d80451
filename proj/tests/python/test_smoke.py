# Copyright 2026 The Translit Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import json
from pathlib import Path

import pytest

import translit

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def test_version_and_normalize():
    assert translit.__version__
    assert translit.normalize("  kya   haal ") == "kya haal"


def test_synthetic_split_and_audit():
    pairs = translit.generate_synthetic(400, seed=2)
    assert len({s for s, _ in pairs}) == 400
    sizes = dict(unique_val=10, unique_test=10, multi_val=10, multi_test=10)
    split = translit.build_split(pairs, seed=1, **sizes)
    assert len(split["val_small"]) == 20
    assert len(split["test_small"]) == 20
    assert translit.audit(split, **sizes)["passed"]

    split["train"].append(split["test_small"][0])
    report = translit.audit(split, **sizes)
    assert not report["passed"]
    assert any(v["sentence"] == split["test_small"][0][0] for v in report["overlap_violations"])


def test_vocabulary_round_trip(tmp_path):
    pairs = translit.generate_synthetic(50, seed=3)
    vocab = translit.Vocabulary.build(pairs)
    source, target = pairs[0]
    ids = vocab.encode(target, "roman-ur")
    assert vocab.decode(ids) == target
    vocab.save(tmp_path / "vocab.txt")
    assert len(translit.Vocabulary.load(tmp_path / "vocab.txt")) == len(vocab)


def test_masking_count():
    vocab = translit.Vocabulary.build([("x", "abcdefghijklmnopqrstuvwxyz")])
    masked, labels = translit.mask_tokens(vocab, "a" * 40, "roman-ur", seed=5)
    assert masked.count(4) == 6
    assert sum(label >= 0 for label in labels) == 6


def test_metrics():
    refs = ["kya haal hai", "main theek hoon"]
    assert translit.bleu(refs, refs) == pytest.approx(100.0)
    assert translit.char_bleu(refs, refs) == pytest.approx(100.0)
    assert translit.chrf(refs, refs) == pytest.approx(100.0)
    report = translit.evaluate_metrics(["kya hal hai", "main theek"], refs, "toy")
    assert report["label"] == "toy"
    assert 0.0 < report["char_bleu"]["score"] < 100.0
    with pytest.raises(ValueError):
        translit.bleu([], [])


def test_learning_rate_schedule():
    expected = {50: 0.5, 100: 1.0, 550: 0.5, 1000: 0.0}
    for step, factor in expected.items():
        assert translit.learning_rate(2e-3, 1000, 0.1, step) == pytest.approx(factor * 2e-3, abs=1e-12)


def test_report_fixture():
    description = json.loads((FIXTURES / "comparison_bleu.json").read_text())
    markdown, csv = translit.render_report(description)
    assert "| Our Work | 94.586 |" in markdown
    assert csv.splitlines()[0] == "Method,BLEU Score"


def test_cli_pipeline_and_transliterate(tmp_path):
    def run(*args):
        code, out, err = translit.run_cli([str(a) for a in args])
        assert code == 0, err
        return out

    run("synth", "--groups", 300, "--seed", 1, "--singleton-fraction", 1, "--output-dir", tmp_path / "syn")
    run("split", "--input", tmp_path / "syn" / "pairs.jsonl", "--output-dir", tmp_path / "sp", "--seed", 1,
        "--unique-val", 10, "--unique-test", 10, "--multi-val", 0, "--multi-test", 0)
    run("build-vocab", "--input", tmp_path / "sp", "--output-dir", tmp_path / "voc")
    run("finetune", "--input", tmp_path / "sp", "--vocab", tmp_path / "voc" / "vocab.txt",
        "--output-dir", tmp_path / "ft", "--seed", 1, "--d-model", 16, "--heads", 2, "--enc-layers", 1,
        "--dec-layers", 1, "--ffn-dim", 32, "--batch-size", 16, "--grad-accum-steps", 1,
        "--phase1-epochs", 1, "--phase1-checkpoint-epoch", 1, "--phase2-epochs", 0)
    manifest = json.loads((tmp_path / "ft" / "finetune.manifest.json").read_text())
    assert manifest["command"] == "finetune"
    out = translit.transliterate(tmp_path / "ft" / "phase1" / "epoch1.ckpt", tmp_path / "voc" / "vocab.txt",
                                 ["kya"], "roman-ur", "ur")
    assert len(out) == 1
    code, _, _ = translit.run_cli(["verify", "--input", str(tmp_path / "missing")])
    assert code != 0
