import json

import numpy as np
import pytest
import yaml

from infotypes.cli import EXIT_CONFIG, EXIT_DATA, EXIT_PARTIAL, main
from infotypes.config import load_config
from infotypes.errors import ConfigError
from infotypes.typology import TYPE_NAMES

FAST = {"task": {"cv_iterations": 8, "svm_epochs": 40, "bootstrap_resamples": 200,
                 "benchmark_iterations": 10}}


def write_jsonl(path, records):
    path.write_text("".join(json.dumps(r) + "\n" for r in records))
    return path


def prediction(sid, probs):
    return {"sentence_id": sid, "model_id": "m", "temperature": 0.3, "n": 10,
            "probs": [float(p) for p in probs], "valid_counts": [10] * 24}


@pytest.fixture
def fast_config(tmp_path):
    p = tmp_path / "fast.yaml"
    p.write_text(yaml.safe_dump(FAST))
    return str(p)


# -- config ----------------------------------------------------------------------

def test_config_env_override_and_unknown_key(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("seed: 4\nmodel:\n  model_id: small\n")
    cfg = load_config(p, env={"INFOTYPES_ENDPOINT": "http://e", "INFOTYPES_API_KEY": "secret"})
    assert (cfg.seed, cfg.model.model_id, cfg.model.endpoint_url) == (4, "small", "http://e")
    assert "secret" not in json.dumps(cfg.snapshot())
    p.write_text("sed: 4\n")
    with pytest.raises(ConfigError, match="sed"):
        load_config(p, env={})


def test_snapshot_round_trips(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("task:\n  tertile_borders: [1.0, 1.4]\n  positive_ratings: [5]\n")
    cfg = load_config(p, env={})
    snap = cfg.write_snapshot(tmp_path / "o")
    assert load_config(snap, env={}).snapshot() == cfg.snapshot()


# -- classify ------------------------------------------------------------------------

def classify(fixtures, out, *extra):
    return main(["classify", "--corpus", str(fixtures / "replay_reviews.jsonl"),
                 "--replay", str(fixtures / "replay_log.jsonl"), "--out", str(out), *extra])


def test_classify_without_endpoint_is_config_error(tmp_path, fixtures, monkeypatch):
    monkeypatch.delenv("INFOTYPES_ENDPOINT", raising=False)
    rc = main(["classify", "--corpus", str(fixtures / "replay_reviews.jsonl"), "--out", str(tmp_path)])
    assert rc == EXIT_CONFIG
    assert not (tmp_path / "predictions.jsonl").exists()


def test_classify_rerun_uses_cache_only(tmp_path, fixtures):
    assert classify(fixtures, tmp_path / "a") == 0
    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    rc = main(["classify", "--corpus", str(fixtures / "replay_reviews.jsonl"), "--replay", str(empty),
               "--out", str(tmp_path / "a")])
    assert rc == 0


def test_snapshot_rerun_is_bit_identical(tmp_path, fixtures):
    assert classify(fixtures, tmp_path / "a") == 0
    snap = tmp_path / "a" / "effective_config.yaml"
    assert snap.exists()
    assert main(["classify", "--config", str(snap), "--corpus", str(fixtures / "replay_reviews.jsonl"),
                 "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "predictions.jsonl").read_bytes() == (tmp_path / "b" / "predictions.jsonl").read_bytes()


def test_incomplete_replay_is_partial_failure(tmp_path, fixtures):
    lines = (fixtures / "replay_log.jsonl").read_text().splitlines()
    short = tmp_path / "short.jsonl"
    short.write_text("\n".join(lines[: len(lines) // 2]) + "\n")
    rc = main(["classify", "--corpus", str(fixtures / "replay_reviews.jsonl"), "--replay", str(short),
               "--out", str(tmp_path / "o")])
    assert rc == EXIT_PARTIAL
    assert (tmp_path / "o" / "failures.jsonl").read_text().strip()


# -- calibrate / eval ----------------------------------------------------------------------

def perfect_pair(tmp_path):
    labels, preds = [], []
    for i in range(48):
        gold = [TYPE_NAMES[i % 24], TYPE_NAMES[(i * 7) % 24]]
        labels.append({"sentence_id": f"s{i}", "types": gold})
        preds.append(prediction(f"s{i}", [1.0 if t in gold else 0.0 for t in TYPE_NAMES]))
    return write_jsonl(tmp_path / "labels.jsonl", labels), write_jsonl(tmp_path / "preds.jsonl", preds)


def test_perfect_predictions_score_100(tmp_path):
    labels, preds = perfect_pair(tmp_path)
    assert main(["calibrate", "--labels", str(labels), "--predictions", str(preds), "--out", str(tmp_path / "c")]) == 0
    assert main(["eval-typology", "--labels", str(labels), "--predictions", str(preds),
                 "--thresholds", str(tmp_path / "c" / "thresholds.json"), "--out", str(tmp_path / "e")]) == 0
    rep = json.loads((tmp_path / "e" / "report.json").read_text())
    assert rep["macro_f1"] == 1.0
    assert rep["coarse_macro_f1"] == 1.0
    assert (tmp_path / "e" / "effective_config.yaml").exists()


def test_profile_missing_type_is_data_error(tmp_path):
    labels, preds = perfect_pair(tmp_path)
    bad = tmp_path / "t.json"
    bad.write_text(json.dumps({"thresholds": {t: 0.5 for t in TYPE_NAMES[:-1]}}))
    assert main(["eval-typology", "--labels", str(labels), "--predictions", str(preds),
                 "--thresholds", str(bad), "--out", str(tmp_path / "e")]) == EXIT_DATA


# -- tasks ------------------------------------------------------------------------------

def review_fixture(tmp_path, n=80, seed=0):
    """Reviews whose 'opinion' probability encodes the rating label exactly."""
    rng = np.random.default_rng(seed)
    reviews, preds = [], []
    for i in range(n):
        positive = i % 2 == 0
        rid = f"r{i:03d}"
        reviews.append({"review_id": rid, "product_id": f"p{i % 7}", "category_id": "general",
                        "text": "First sentence here. Second sentence here.",
                        "rating": 5 if positive else 2,
                        "helpful_votes": 10 if positive else 0, "unhelpful_votes": 0 if positive else 4})
        for j in range(2):
            v = rng.random(24)
            v[TYPE_NAMES.index("opinion")] = 0.9 if positive else 0.1
            preds.append(prediction(f"{rid}#{j}", v))
    return write_jsonl(tmp_path / "reviews.jsonl", reviews), write_jsonl(tmp_path / "preds.jsonl", preds)


@pytest.mark.parametrize("task", ["sentiment", "helpful-reviews"])
def test_classification_tasks(tmp_path, fast_config, task):
    reviews, preds = review_fixture(tmp_path)
    out = tmp_path / "o"
    rc = main(["task", task, "--config", fast_config, "--corpus", str(reviews), "--predictions", str(preds),
               "--subset", "subjective", "--subset", "all", "--out", str(out), "--seed", "3"])
    assert rc == 0
    rep = json.loads((out / "report.json").read_text())
    by = {s["subset"]: s for s in rep["subsets"]}
    assert by["subjective"]["mean"] >= 0.99
    assert by["subjective"]["seed"] == by["all"]["seed"] == rep["seed"] == 3
    assert len(by["subjective"]["values"]) == len(by["all"]["values"]) == 8


def test_helpful_sentences(tmp_path, fast_config):
    rng = np.random.default_rng(1)
    preds = []

    def scored(name, n):
        recs = []
        for i in range(n):
            v = rng.random(24)
            sid = f"{name}{i}"
            recs.append({"sentence_id": sid, "sentence": f"Sentence {i}.", "product_id": f"p{i % 10}",
                         "helpfulness_score": float(2 * v[0])})
            preds.append(prediction(sid, v))
        return write_jsonl(tmp_path / f"{name}.jsonl", recs)

    train, test = scored("train", 150), scored("test", 60)
    p = write_jsonl(tmp_path / "preds.jsonl", preds)
    assert main(["task", "helpful-sentences", "--config", fast_config, "--train", str(train),
                 "--test", str(test), "--predictions", str(p), "--out", str(tmp_path / "o")]) == 0
    rep = json.loads((tmp_path / "o" / "report.json").read_text())["subsets"][0]
    assert rep["mse"] < 1e-6
    assert rep["pearson"] > 0.999
    assert rep["ndcg_at_1"] == pytest.approx(1.0)
    assert rep["svm_accuracy"] >= 0.95


def test_type_benchmark_train_size(tmp_path, fast_config):
    rng = np.random.default_rng(2)
    labels, preds = [], []
    for i in range(400):
        y = int(i < 120)
        v = rng.random(24)
        v[TYPE_NAMES.index("tip")] = np.clip(rng.normal(0.7 if y else 0.3, 0.15), 0, 1)
        labels.append({"sentence_id": f"s{i}", "label": y})
        preds.append(prediction(f"s{i}", v))
    lab = write_jsonl(tmp_path / "labels.jsonl", labels)
    p = write_jsonl(tmp_path / "preds.jsonl", preds)
    assert main(["task", "type-benchmark", "--config", fast_config, "--type", "tip", "--labels", str(lab),
                 "--predictions", str(p), "--train-size", "100", "--out", str(tmp_path / "o")]) == 0
    rep = json.loads((tmp_path / "o" / "report.json").read_text())
    assert rep["train_size"] == 100
    assert rep["f1"]["ci"][0] <= rep["f1"]["mean"] <= rep["f1"]["ci"][1]
    rap = rep["recall_at_precision"]
    assert rap["75"]["mean"] >= rap["80"]["mean"] >= rap["85"]["mean"]
    assert main(["task", "type-benchmark", "--config", fast_config, "--type", "tip", "--labels", str(lab),
                 "--predictions", str(p), "--train-size", "1000", "--out", str(tmp_path / "o")]) == EXIT_DATA


def test_unknown_subset_is_config_error(tmp_path):
    reviews, preds = review_fixture(tmp_path, n=10)
    assert main(["task", "sentiment", "--corpus", str(reviews), "--predictions", str(preds),
                 "--subset", "nonsense", "--out", str(tmp_path / "o")]) == EXIT_CONFIG


# -- analyze ------------------------------------------------------------------------------

@pytest.fixture
def classified(tmp_path, fixtures):
    assert classify(fixtures, tmp_path / "c") == 0
    return tmp_path / "c" / "predictions.jsonl"


def test_compare_identical(tmp_path, fixtures, classified):
    corpus = str(fixtures / "replay_reviews.jsonl")
    assert main(["analyze", "compare", "--a", corpus, "--b", corpus, "--predictions", str(classified),
                 "--out", str(tmp_path / "o")]) == 0
    assert json.loads((tmp_path / "o" / "comparison.json").read_text())["pearson"] == pytest.approx(1.0)


def test_categories_five_profiles(tmp_path, fixtures, classified):
    assert main(["analyze", "categories", "--corpus", str(fixtures / "replay_reviews.jsonl"),
                 "--predictions", str(classified), "--out", str(tmp_path / "o")]) == 0
    lines = (tmp_path / "o" / "category_profiles.csv").read_text().splitlines()[1:]
    units = list(dict.fromkeys(line.split(",")[0] for line in lines))
    assert units == ["books", "electronics", "fashion", "general", "toys_and_games"]


def test_structure_missing_length(tmp_path, fixtures, classified, capsys):
    rc = main(["analyze", "structure", "--corpus", str(fixtures / "replay_reviews.jsonl"), "--kind", "reviews",
               "--length", "7", "--predictions", str(classified), "--out", str(tmp_path / "o")])
    assert rc == EXIT_DATA
    assert "available lengths {3: 10}" in capsys.readouterr().err
    assert main(["analyze", "structure", "--corpus", str(fixtures / "replay_reviews.jsonl"), "--kind", "reviews",
                 "--length", "3", "--predictions", str(classified), "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "positional.csv").exists()
