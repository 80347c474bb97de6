"""Acceptance suite: one test per criterion, each at its stated tolerance."""
import json
import math
import time

import numpy as np

from conftest import separable_rows
from infotypes.analysis import corpus_profile
from infotypes.calibrate import LabeledExample, optimal_thresholds, youden_threshold
from infotypes.cli import main
from infotypes.metrics import (
    bootstrap_ci,
    f1_from_pr,
    macro_f1,
    ndcg_at_k,
    random_accuracy,
    random_macro_f1,
    recall_at_precision,
    simulate_random_accuracy,
    simulate_random_macro_f1,
)
from infotypes.models import FeatureRow, SvmConfig, cross_validate, train_regression, train_svm
from infotypes.typology import TYPE_NAMES

# per-type test F1 of the prompted classifier, canonical type order
PUBLISHED_TYPE_F1 = [88.4, 46.7, 50.0, 68.9, 38.2, 69.6, 44.2, 66.7, 51.1, 64.9, 50.0, 46.2,
                     63.2, 78.4, 55.3, 65.7, 32.3, 54.5, 52.9, 72.7, 62.5, 27.6, 44.4, 66.7]
# gold positives per type in the 240-sentence typology test set
TEST_GOLD_COUNTS = [166, 46, 9, 27, 20, 34, 28, 49, 43, 14, 27, 44, 88, 22, 15, 108,
                    9, 7, 9, 15, 21, 9, 23, 5]
TEST_SIZE = 240


def test_c01_replay_determinism(tmp_path, fixtures, criterion):
    expected = json.loads((fixtures / "replay_expected.json").read_text())
    t0 = time.perf_counter()
    for run in ("a", "b"):
        rc = main(["classify", "--corpus", str(fixtures / "replay_reviews.jsonl"),
                   "--replay", str(fixtures / "replay_log.jsonl"), "--out", str(tmp_path / run)])
        assert rc == 0
    elapsed = time.perf_counter() - t0
    a = (tmp_path / "a" / "predictions.jsonl").read_bytes()
    b = (tmp_path / "b" / "predictions.jsonl").read_bytes()
    exact = True
    records = [json.loads(line) for line in a.decode().splitlines()]
    for rec in records:
        for p, (yes, valid) in zip(rec["probs"], expected["yes_valid"][rec["sentence_id"]]):
            exact &= p == yes / valid
    ok = a == b and exact and len(records) == 30 and elapsed < 5.0
    criterion(1, "replay run twice is byte-identical with exact yes-fractions",
              ok, f"{len(records)} sentences, {elapsed:.2f}s")


def brute_thresholds(X, G):
    out = []
    for j in range(X.shape[1]):
        if not G[:, j].any():
            out.append(1.0)
            continue
        best, best_theta = -1.0, None
        for k in range(1, 11):
            pred = X[:, j] >= k / 10
            tp = int((pred & G[:, j]).sum())
            fp = int((pred & ~G[:, j]).sum())
            fn = int((~pred & G[:, j]).sum())
            f = 0.0 if tp == 0 else 2 * tp / (2 * tp + fp + fn)
            if f > best:
                best, best_theta = f, k / 10
        out.append(best_theta)
    return out


def test_c02_calibration_oracle(criterion):
    mismatches = 0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        X = rng.integers(0, 11, size=(100, 24)) / 10
        G = rng.random((100, 24)) < 0.2
        G[np.arange(100), rng.integers(0, 24, 100)] = True
        exs = [LabeledExample(f"s{i}", frozenset(t for t, g in zip(TYPE_NAMES, G[i]) if g), X[i])
               for i in range(100)]
        got = optimal_thresholds(exs).as_array().tolist()
        mismatches += got != brute_thresholds(X, G)
    criterion(2, "optimal_thresholds equals brute-force grid scan", mismatches == 0,
              f"{20 - mismatches}/20 trials agree")


def test_c03_metric_oracles(criterion):
    f = f1_from_pr(0.866, 0.903)
    m = 100 * macro_f1([x / 100 for x in PUBLISHED_TYPE_F1])
    ok = abs(f - 0.884) <= 0.0005 and abs(m - 56.7) <= 0.05
    criterion(3, "F1(0.866, 0.903) and macro-F1 of the published per-type scores", ok,
              f"F1={f:.4f}, macro={m:.4f}")


def test_c04_baselines(criterion):
    sentiment = random_accuracy(4012 / 5000, True)
    helpful = random_accuracy(562 / (742 + 562), True)
    sim_s, se_s = simulate_random_accuracy(4012 / 5000, 5000, True, trials=10_000, seed=0)
    sim_h, se_h = simulate_random_accuracy(562 / 1304, 1304, True, trials=10_000, seed=1)
    prevalences = [c / TEST_SIZE for c in TEST_GOLD_COUNTS]
    rand_f1 = random_macro_f1(prevalences)
    sim_f1 = simulate_random_macro_f1(TEST_GOLD_COUNTS, TEST_SIZE, trials=10_000, seed=2)
    ok = (abs(100 * sentiment - 68.3) <= 0.3 and abs(100 * helpful - 51.0) <= 0.5
          and abs(sim_s - sentiment) < 4 * se_s + 1e-9 and abs(sim_h - helpful) < 4 * se_h + 1e-9
          and abs(100 * rand_f1 - 40.9) <= 0.5 and abs(sim_f1 - rand_f1) < 0.005)
    criterion(4, "random baselines: closed forms and 10,000-trial simulations", ok,
              f"sentiment={100 * sentiment:.2f} (sim {100 * sim_s:.2f}), "
              f"helpful={100 * helpful:.2f} (sim {100 * sim_h:.2f}), "
              f"macro-F1={100 * rand_f1:.2f} (sim {100 * sim_f1:.2f})")


def test_c05_svm_sanity(criterion):
    t0 = time.perf_counter()
    rows = separable_rows(n=200, d=24, margin=0.5, seed=0)
    trainer = lambda r: train_svm(r, SvmConfig(seed=0))
    sep = cross_validate(rows, trainer, n=50, frac=0.7, seed=0)
    rng = np.random.default_rng(0)
    shuffled_y = rng.permutation([r.target for r in rows])
    shuffled = [FeatureRow(r.id, r.features, y) for r, y in zip(rows, shuffled_y)]
    shuf = cross_validate(shuffled, trainer, n=50, frac=0.7, seed=0)
    elapsed = time.perf_counter() - t0
    majority = max(np.mean(shuffled_y), 1 - np.mean(shuffled_y))
    ok = sep.mean >= 0.99 and abs(shuf.mean - majority) <= 0.05 and elapsed < 10.0
    criterion(5, "SVM separable CV accuracy and shuffled-label accuracy", ok,
              f"separable={sep.mean:.4f}, shuffled={shuf.mean:.4f} vs majority {majority:.2f}, {elapsed:.1f}s")


def test_c06_regression_sanity(criterion):
    rng = np.random.default_rng(0)
    w = rng.normal(size=24)
    X = rng.random((300, 24))
    exact = [FeatureRow(f"r{i}", X[i], float(X[i] @ w + 0.2)) for i in range(300)]
    w_hat, b_hat = train_regression(exact).raw_coefficients()
    err = max(np.max(np.abs(w_hat - w)), abs(b_hat - 0.2))
    Xtr, Xte = rng.random((2000, 24)), rng.random((2000, 24))
    ytr = Xtr @ w + rng.normal(0, 0.1, 2000)
    yte = Xte @ w + rng.normal(0, 0.1, 2000)
    m = train_regression([FeatureRow(f"t{i}", Xtr[i], float(ytr[i])) for i in range(2000)])
    test_mse = float(np.mean((m.predict(Xte) - yte) ** 2))
    ok = err <= 1e-6 and abs(test_mse - 0.01) <= 0.002
    criterion(6, "regression recovers a noiseless target; noisy test MSE near 0.01", ok,
              f"max coef error={err:.2e}, MSE={test_mse:.5f}")


def test_c07_ranking_oracles(criterion):
    def naive_ndcg1(group):
        top = sorted(range(len(group)), key=lambda i: (-group[i][0], i))[0]
        best = max(g for _, g in group)
        return 1.0 if best == 0 else group[top][1] / best

    def naive_rap(s, y, target):
        best = 0.0
        for t in set(s.tolist()):
            pred = s >= t
            if (pred & y).sum() / pred.sum() >= target:
                best = max(best, (pred & y).sum() / y.sum())
        return best

    rng = np.random.default_rng(7)
    bad = 0
    for _ in range(100):
        groups = [[(float(rng.integers(0, 6)), float(rng.uniform(0, 2))) for _ in range(rng.integers(1, 8))]
                  for _ in range(rng.integers(1, 6))]
        bad += not math.isclose(ndcg_at_k(groups, 1), np.mean([naive_ndcg1(g) for g in groups]), abs_tol=1e-12)
        n = int(rng.integers(5, 60))
        s = np.round(rng.random(n), 2)
        y = rng.random(n) < 0.5
        y[0] = True
        r = [recall_at_precision(s, y, t) for t in (0.75, 0.80, 0.85)]
        bad += not all(math.isclose(a, naive_rap(s, y, t), abs_tol=1e-12) for a, t in zip(r, (0.75, 0.80, 0.85)))
        bad += not (r[0] >= r[1] >= r[2])
    criterion(7, "NDCG@1 and Recall@Precision match brute force; R@P non-increasing", bad == 0,
              f"{bad} disagreements over 100 fixtures")


def test_c08_aggregation_invariants(criterion):
    rng = np.random.default_rng(3)
    ok = True
    for _ in range(50):
        docs = [[rng.random(24) for _ in range(rng.integers(1, 6))] for _ in range(rng.integers(1, 8))]
        p = corpus_profile(docs).vector
        perm = [list(np.array(d)[rng.permutation(len(d))]) for d in docs]
        perm = [perm[i] for i in rng.permutation(len(perm))]
        ok &= np.allclose(p, corpus_profile(perm).vector, rtol=0, atol=1e-12)
        ok &= bool(np.all((p >= 0) & (p <= 1)))
    one = np.zeros(24)
    one[0] = 1.0
    weighted = corpus_profile([[one], [np.zeros(24)] * 3]).vector[0]
    ok &= weighted == 0.5
    criterion(8, "corpus_profile permutation invariance, bounds, two-stage weighting", bool(ok),
              f"two-stage value={weighted}")


def test_c09_youden(criterion):
    sep = youden_threshold([0.05, 0.1, 0.2, 0.7, 0.8, 0.95], [0, 0, 0, 1, 1, 1])
    small = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        small += youden_threshold(rng.random(1000), rng.random(1000) < 0.5).j < 0.15
    ok = sep.j == 1.0 and small >= 95
    criterion(9, "Youden J=1 when separated; J<0.15 on independent labels", ok,
              f"J={sep.j}, {small}/100 trials below 0.15")


def test_c10_bootstrap(criterion):
    x = np.random.default_rng(0).normal(size=1000)
    a = bootstrap_ci(np.mean, x, alpha=0.025, n_resamples=1000, seed=11)
    b = bootstrap_ci(np.mean, x, alpha=0.025, n_resamples=1000, seed=11)
    width = a[1] - a[0]
    target = 2 * 1.96 / math.sqrt(1000)
    ok = a == b and abs(width - target) <= 0.2 * target
    criterion(10, "seeded bootstrap CI is reproducible with the expected width", ok,
              f"width={width:.4f} vs {target:.4f}")


def test_c11_dev_tuned_test_evaluated(tmp_path, fixtures, criterion):
    manifest = json.loads((fixtures / "scripted_manifest.json").read_text())
    rc1 = main(["calibrate", "--labels", str(fixtures / "scripted_dev_labels.jsonl"),
                "--predictions", str(fixtures / "scripted_dev_predictions.jsonl"), "--out", str(tmp_path / "cal")])
    rc2 = main(["eval-typology", "--labels", str(fixtures / "scripted_test_labels.jsonl"),
                "--predictions", str(fixtures / "scripted_test_predictions.jsonl"),
                "--thresholds", str(tmp_path / "cal" / "thresholds.json"), "--out", str(tmp_path / "ev")])
    report = json.loads((tmp_path / "ev" / "report.json").read_text())
    thresholds = json.loads((tmp_path / "cal" / "thresholds.json").read_text())["thresholds"]
    ok = (rc1 == rc2 == 0 and thresholds == manifest["thresholds"]
          and report["macro_f1"] == manifest["macro_f1"])
    criterion(11, "calibrate on dev, evaluate on test reproduces the manifest macro-F1", ok,
              f"{100 * report['macro_f1']:.4f} vs {100 * manifest['macro_f1']:.4f}")
