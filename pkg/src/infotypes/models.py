"""Linear models over type-probability features and the repeated-split CV harness."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import DataError
from .metrics import accuracy, bootstrap_ci
from .typology import GROUP_NAMES, N_TYPES, TYPE_INDEX, coarse_project, resolve_subset


@dataclass
class FeatureRow:
    id: str
    features: np.ndarray
    target: float


@dataclass
class LinearModel:
    """Weights act on z-scored features; ``mean``/``scale`` come from the training rows only."""

    kind: str  # "svm" or "regression"
    weights: np.ndarray
    bias: float
    mean: np.ndarray
    scale: np.ndarray
    subset: str = "all"
    train_ids: tuple[str, ...] = field(default=(), repr=False)

    def _z(self, X) -> np.ndarray:
        return (np.atleast_2d(np.asarray(X, dtype=float)) - self.mean) / self.scale

    def decision_function(self, X) -> np.ndarray:
        return self._z(X) @ self.weights + self.bias

    def predict(self, X, clip: tuple[float, float] | None = None) -> np.ndarray:
        s = self.decision_function(X)
        if self.kind == "svm":
            return (s >= 0).astype(int)
        return np.clip(s, *clip) if clip else s

    def raw_coefficients(self) -> tuple[np.ndarray, float]:
        """Weights and bias on the original (unstandardized) feature scale."""
        w = self.weights / self.scale
        return w, float(self.bias - w @ self.mean)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind, "subset": self.subset, "weights": self.weights.tolist(),
            "bias": self.bias, "mean": self.mean.tolist(), "scale": self.scale.tolist(),
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def from_dict(cls, d: dict) -> "LinearModel":
        return cls(d["kind"], np.asarray(d["weights"], float), float(d["bias"]),
                   np.asarray(d["mean"], float), np.asarray(d["scale"], float), d.get("subset", "all"))


@dataclass(frozen=True)
class SvmConfig:
    lam: float = 0.01
    epochs: int = 200
    seed: int = 0


def _matrix(rows: Sequence[FeatureRow]) -> tuple[np.ndarray, np.ndarray]:
    if not rows:
        raise DataError("no training rows")
    X = np.stack([np.asarray(r.features, dtype=float) for r in rows])
    y = np.array([r.target for r in rows], dtype=float)
    return X, y


def _standardizer(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    return mean, scale


def train_svm(rows: Sequence[FeatureRow], config: SvmConfig = SvmConfig(), subset: str = "all") -> LinearModel:
    """Linear SVM by Pegasos-style hinge-loss subgradient descent.

    Targets are 0/1. Features are z-scored, a constant column carries the
    bias (so it is regularized too), step size is 1/(lam*t) and each epoch
    visits the rows in a fresh seeded permutation.
    """
    X, y01 = _matrix(rows)
    if len(np.unique(y01)) < 2:
        raise DataError("SVM training needs both classes")
    y = np.where(y01 > 0, 1.0, -1.0)
    mean, scale = _standardizer(X)
    Z = np.hstack([(X - mean) / scale, np.ones((len(X), 1))])
    n = len(Z)
    lam = config.lam
    rng = np.random.default_rng(config.seed)
    radius = 1.0 / np.sqrt(lam)
    # w = a * v keeps the per-step shrink O(1)
    v = np.zeros(Z.shape[1])
    a = 1.0
    t = 0
    rows_z = list(Z)
    ys = y.tolist()
    for _ in range(config.epochs):
        for i in rng.permutation(n):
            t += 1
            eta = 1.0 / (lam * t)
            x = rows_z[i]
            margin = ys[i] * a * float(v @ x)
            shrink = 1.0 - eta * lam
            if shrink <= 0.0:
                v[:] = 0.0
                a = 1.0
            else:
                a *= shrink
            if margin < 1.0:
                v += (eta * ys[i] / a) * x
            norm = a * float(np.sqrt(v @ v))
            if norm > radius:
                a *= radius / norm
            if a < 1e-9:
                v *= a
                a = 1.0
    w = a * v
    return LinearModel("svm", w[:-1].copy(), float(w[-1]), mean, scale, subset,
                       tuple(r.id for r in rows))


def train_regression(rows: Sequence[FeatureRow], ridge: float = 1e-6, subset: str = "all") -> LinearModel:
    """Ridge least squares via the normal equations on z-scored features.

    The intercept is unpenalized (targets are centered), so constant columns
    get weight exactly 0.
    """
    X, y = _matrix(rows)
    n, d = X.shape
    if n < d + 1:
        raise DataError(f"regression needs at least {d + 1} rows for {d} features, got {n}")
    mean, scale = _standardizer(X)
    Z = (X - mean) / scale
    y_mean = float(y.mean())
    A = Z.T @ Z + ridge * np.eye(d)
    try:
        w = np.linalg.solve(A, Z.T @ (y - y_mean))
    except np.linalg.LinAlgError:
        raise DataError("normal equations are singular even with the ridge term") from None
    if not np.all(np.isfinite(w)):
        raise DataError("regression produced non-finite weights")
    return LinearModel("regression", w, y_mean, mean, scale, subset, tuple(r.id for r in rows))


@dataclass
class CvReport:
    n_iterations: int
    train_fraction: float
    values: list[float]
    mean: float
    ci: tuple[float, float]
    seed: int
    label: str = ""

    def to_dict(self) -> dict:
        return {
            "label": self.label, "n_iterations": self.n_iterations,
            "train_fraction": self.train_fraction, "seed": self.seed,
            "mean": self.mean, "ci": list(self.ci), "values": self.values,
        }


def svm_accuracy(model: LinearModel, rows: Sequence[FeatureRow]) -> float:
    X, y = _matrix(rows)
    return accuracy(model.predict(X), (y > 0).astype(int))


def cross_validate(
    rows: Sequence[FeatureRow],
    trainer: Callable[[Sequence[FeatureRow]], LinearModel],
    metric: Callable[[LinearModel, Sequence[FeatureRow]], float] = svm_accuracy,
    n: int = 50,
    frac: float = 0.7,
    seed: int = 0,
    require_both_classes: bool = True,
    max_redraws: int = 10,
    label: str = "",
) -> CvReport:
    """Repeated random train/test splits.

    Splits are drawn over rows sorted by id, so the result does not depend
    on input order. A split whose training part has a single class is
    redrawn up to ``max_redraws`` times.
    """
    ordered = sorted(rows, key=lambda r: r.id)
    N = len(ordered)
    n_train = int(round(frac * N))
    if n_train < 1 or n_train >= N:
        raise DataError(f"cannot split {N} rows with train fraction {frac}")
    rng = np.random.default_rng(seed)
    values = []
    for _ in range(n):
        for _attempt in range(max_redraws + 1):
            perm = rng.permutation(N)
            train = [ordered[i] for i in perm[:n_train]]
            if not require_both_classes or len({r.target > 0 for r in train}) == 2:
                break
        else:
            raise DataError(f"no split with both classes in train after {max_redraws} redraws")
        test = [ordered[i] for i in perm[n_train:]]
        values.append(float(metric(trainer(train), test)))
    ci = bootstrap_ci(np.mean, np.array(values), seed=seed)
    return CvReport(n, frac, values, float(np.mean(values)), ci, seed, label)


def select_features(rows: Sequence[FeatureRow], subset: str) -> list[FeatureRow]:
    """Project 24-dim rows onto a named subset ('all', a group, 'coarse', or 't1+t2')."""
    if subset == "coarse":
        return [FeatureRow(r.id, coarse_project(r.features), r.target) for r in rows]
    idx = np.array([TYPE_INDEX[t] for t in resolve_subset(subset)])
    out = []
    for r in rows:
        f = np.asarray(r.features, dtype=float)
        if f.shape != (N_TYPES,):
            raise DataError(f"row {r.id}: expected {N_TYPES} features, got {f.shape}")
        out.append(FeatureRow(r.id, f[idx], r.target))
    return out


def subset_dims(subset: str) -> list[str]:
    if subset == "coarse":
        return list(GROUP_NAMES)
    return [t.value for t in resolve_subset(subset)]

