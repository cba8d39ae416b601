import json
import math
import os
from pathlib import Path

import numpy as np
import pytest

import disagree

DATA = Path(os.environ.get("DISAGREE_DATA_DIR", Path(__file__).resolve().parents[2] / "data"))


def test_taxonomy_sizes():
    assert [len(disagree.taxonomy_labels(level)) for level in (1, 2, 3)] == [5, 17, 29]
    assert disagree.map_label("cause", 1) == "contingency"


def test_soft_metrics_hand_cases():
    m = disagree.soft_metrics([1.0, 0.0], [0.0, 1.0])
    assert m["jsd"] == pytest.approx(1.0)
    assert m["md"] == pytest.approx(2.0)
    assert m["ed"] == pytest.approx(math.sqrt(2.0))
    assert disagree.soft_metrics([0.5, 0.5], [1.0, 0.0])["jsd"] == pytest.approx(0.3113, abs=1e-4)


def test_validation_errors_map_to_value_error():
    with pytest.raises(ValueError):
        disagree.soft_metrics([0.5, 0.5], [0.2, 0.3, 0.5])
    with pytest.raises(disagree.ValidationError):
        disagree.paired_ttest([1.0], [0.5])


def test_ttest_identical_systems():
    scores = [0.5 + 0.01 * i for i in range(30)]
    assert disagree.paired_ttest(scores, scores) == 1.0


def test_npmi_conventions():
    joint = np.zeros((3, 3))
    joint[0, 0] = 5
    m = disagree.npmi_from_counts(joint)
    assert m[0, 0] == 1.0
    assert m[1, 1] == 0.0


def test_kmeans_separates_duplicates():
    points = [[0.0, 0.0]] * 4 + [[10.0, 10.0]] * 4
    r = disagree.kmeans(points, 2, seed=1)
    assert r["wcss"] == pytest.approx(0.0)
    assert disagree.adjusted_rand_index(r["assignment"], [0] * 4 + [1] * 4) == pytest.approx(1.0)


def test_toy_corpus_stats():
    stats = disagree.corpus_stats(str(DATA / "toy" / "annotations.jsonl"))
    assert stats["worker_count"] == 20


def test_synthesize_and_cli(tmp_path):
    spec = {"n_train": 60, "n_dev": 10, "n_test": 20, "seed": 3}
    stats = disagree.synthesize(spec, tmp_path / "corpus")
    assert stats["item_count"] == 90
    code, out, log = disagree.run_cli(
        ["stats", "--annotations", str(tmp_path / "corpus" / "annotations.jsonl"), "--level", "1"]
    )
    assert code == 0
    assert json.loads(out)["item_count"] == 90
    code, _, log = disagree.run_cli(["stats", "--bogus"])
    assert code == 1


def test_replicate_small(tmp_path):
    config = disagree.default_config()
    config.update({"synth.n_train": 80, "synth.n_dev": 10, "synth.n_test": 30, "train.epochs": 1,
                   "train.hidden": 8, "encoder.dim": 128, "eval.resamples": 3, "analysis.restarts": 1,
                   "seed": 5})
    report = disagree.replicate(config, tmp_path / "run")
    assert report["format"] == "disagree-report"
    assert (tmp_path / "run" / "report.json").exists()
