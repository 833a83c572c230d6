"""Bayesian logistic regression on the crossbar."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .crossbar import CrossbarArray
from .device import DeviceLaw, ProgrammingLut
from .mcmc import (
    LOG_FLOOR,
    LikelihoodModel,
    McmcConfig,
    RunRecord,
    StuckChainError,
    infer_batch,
    log_prior,
    train,
)


class DataError(ValueError):
    """Dataset schema or domain violation."""


# exp() overflows past ~709; logistic is saturated long before
_EXP_CLIP = 700.0


@dataclass(frozen=True)
class LabeledDataset:
    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...] = ()

    def __post_init__(self):
        X = np.array(self.features, dtype=float)
        t = np.array(self.labels).astype(int)
        if X.ndim != 2 or t.shape != (X.shape[0],):
            raise DataError(f"features {X.shape} and labels {t.shape} disagree")
        if not np.all(np.isfinite(X)):
            raise DataError("features contain missing or non-finite values")
        if not np.isin(t, (0, 1)).all():
            raise DataError("labels must be binary 0/1")
        names = tuple(self.feature_names) or tuple(f"f{i}" for i in range(X.shape[1]))
        if len(names) != X.shape[1]:
            raise DataError("one feature name per column required")
        X.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", t)
        object.__setattr__(self, "feature_names", names)

    def __len__(self):
        return self.features.shape[0]

    @property
    def width(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> "LabeledDataset":
        return LabeledDataset(self.features[idx], self.labels[idx], self.feature_names)

    def check_trainable(self) -> None:
        if len(self) < 2 or len(np.unique(self.labels)) < 2:
            raise DataError("training data needs at least 2 points and both classes")


@dataclass(frozen=True)
class SplitSpec:
    train_count: int
    test_count: int
    shuffle_seed: int = 0

    def split(self, data: LabeledDataset) -> tuple[LabeledDataset, LabeledDataset]:
        if self.train_count + self.test_count != len(data):
            raise DataError(
                f"split {self.train_count}+{self.test_count} does not cover {len(data)} points"
            )
        perm = np.random.default_rng(self.shuffle_seed).permutation(len(data))
        return data.subset(perm[: self.train_count]), data.subset(perm[self.train_count :])


def logistic_row_function(x, S: float):
    z = np.clip(S * np.asarray(x, dtype=float), -_EXP_CLIP, _EXP_CLIP)
    out = 1.0 / (1.0 + np.exp(-z))
    return float(out) if out.ndim == 0 else out


def _log_sigmoid(z):
    # ln f(z) = -ln(1 + e^-z), stable for both signs
    return -np.logaddexp(0.0, -z)


def supervised_log_likelihood(g, data: LabeledDataset, S: float) -> float:
    g = np.asarray(g, dtype=float)
    if g.shape != (data.width,):
        raise DataError(f"model width {g.shape} does not match {data.width} features")
    z = S * (data.features @ g)
    # ln(1 - f(z)) = ln f(-z)
    terms = np.where(data.labels == 1, _log_sigmoid(z), _log_sigmoid(-z))
    return float(np.sum(np.maximum(terms, LOG_FLOOR)))


class LogisticModel(LikelihoodModel):
    """Logistic row function with scaling ``S``; trace metric is accuracy."""

    def __init__(self, S: float):
        self.S = float(S)

    def evaluate_log(self, g, data):
        return supervised_log_likelihood(g, data, self.S)

    def row_function(self, x):
        return logistic_row_function(x, self.S)

    def row_metric(self, g, data):
        p = self.row_function(data.features @ g)
        return float(np.mean((p >= 0.5) == (data.labels == 1)))


def generate_two_gaussians(n: int, shift: float, rng: np.random.Generator) -> LabeledDataset:
    """``n/2`` points moved up-left (label 1) and ``n/2`` moved down-right (label 0)."""
    if n % 2:
        raise ValueError("n must be even")
    pts = rng.standard_normal((n, 2))
    half = n // 2
    pts[:half] += (-shift, shift)
    pts[half:] += (shift, -shift)
    labels = np.r_[np.ones(half, int), np.zeros(half, int)]
    return LabeledDataset(pts, labels, ("v0", "v1"))


def chi2_scores(data: LabeledDataset) -> np.ndarray:
    """Chi-squared statistic of each feature against the class labels.

    Observed counts are the per-class feature sums; expected counts are the
    class prior times the feature total.
    """
    X = data.features
    if np.any(X < 0):
        raise DataError("chi2 selection needs non-negative features (select before centering)")
    classes = np.unique(data.labels)
    onehot = (data.labels[:, None] == classes[None, :]).astype(float)
    observed = onehot.T @ X
    prior = onehot.mean(axis=0)
    expected = np.outer(prior, X.sum(axis=0))
    with np.errstate(invalid="ignore", divide="ignore"):
        terms = np.where(expected > 0, (observed - expected) ** 2 / expected, 0.0)
    return terms.sum(axis=0)


def chi2_select(data: LabeledDataset, k: int) -> LabeledDataset:
    """Keep the ``k`` highest-scoring features, in their original order."""
    return data_select(data, chi2_top_k(data, k))


def chi2_top_k(data: LabeledDataset, k: int) -> np.ndarray:
    if not 1 <= k <= data.width:
        raise ValueError(f"k={k} outside 1..{data.width}")
    scores = chi2_scores(data)
    # stable: equal scores keep the earlier feature
    order = np.argsort(-scores, kind="stable")[:k]
    return np.sort(order)


def data_select(data: LabeledDataset, idx) -> LabeledDataset:
    idx = np.asarray(idx)
    return LabeledDataset(
        data.features[:, idx], data.labels, tuple(data.feature_names[i] for i in idx)
    )


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, data: LabeledDataset) -> "Standardizer":
        if len(data) < 2:
            raise DataError("centering needs at least 2 points")
        return cls(data.features.mean(axis=0), data.features.std(axis=0))

    def apply(self, data: LabeledDataset) -> LabeledDataset:
        safe = np.where(self.std > 0, self.std, 1.0)
        X = np.where(self.std > 0, (data.features - self.mean) / safe, 0.0)
        return replace(data, features=X)


def center_scale(data: LabeledDataset) -> LabeledDataset:
    """Zero mean, unit population variance per feature; constants map to 0."""
    return Standardizer.fit(data).apply(data)


def predict(array: CrossbarArray, data: LabeledDataset, cfg: McmcConfig) -> np.ndarray:
    return infer_batch(array, LogisticModel(cfg.scale_S), data.features, cfg)


def evaluate_accuracy(array: CrossbarArray, data: LabeledDataset, cfg: McmcConfig) -> float:
    p = predict(array, data, cfg)
    return float(np.mean((p >= 0.5) == (data.labels == 1)))


# -- dataset ingestion ------------------------------------------------------

BREAST_CANCER_LABEL = "diagnosis"
BREAST_CANCER_POSITIVE = "M"


def load_csv_dataset(
    path,
    label_column: str,
    positive_label: str = "1",
    drop_columns: tuple[str, ...] = ("id",),
) -> LabeledDataset:
    """Read a headed CSV; ``label_column`` equal to ``positive_label`` maps to 1.

    Any other label value maps to 0.  Remaining non-dropped columns must be
    numeric and complete.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(row for row in fh if not row.startswith("#"))
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if label_column not in header:
            raise DataError(f"{path}: no label column {label_column!r}")
        li = header.index(label_column)
        keep = [i for i, h in enumerate(header) if i != li and h not in drop_columns and h]
        X, t = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                X.append([float(row[i]) for i in keep])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
            t.append(1 if row[li].strip() == positive_label else 0)
    if not X:
        raise DataError(f"{path}: no data rows")
    return LabeledDataset(np.array(X), np.array(t), tuple(header[i] for i in keep))


def write_breast_cancer_csv(path) -> Path:
    """Export scikit-learn's bundled Wisconsin diagnostic copy in the ingest schema."""
    try:
        from sklearn.datasets import load_breast_cancer
    except ImportError as exc:  # pragma: no cover - depends on environment
        raise DataError(
            "scikit-learn is not installed; download wdbc.data from the UCI repository "
            "and convert it to the documented CSV schema instead"
        ) from exc
    raw = load_breast_cancer()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", BREAST_CANCER_LABEL, *[n.replace(" ", "_") for n in raw.feature_names]])
        for i, (x, tgt) in enumerate(zip(raw.data, raw.target)):
            # sklearn encodes malignant as 0
            w.writerow([i, "M" if tgt == 0 else "B", *[repr(float(v)) for v in x]])
    return path


# -- experiment harness -----------------------------------------------------


@dataclass
class SupervisedTask:
    """Everything one train/evaluate iteration needs."""

    rows: int
    law: DeviceLaw
    mcmc: McmcConfig
    use_lut: bool = False
    lut_entries: int = 21
    sd_scale: float = 1.0

    def build_array(self, cols: int, rng: np.random.Generator) -> CrossbarArray:
        lut = ProgrammingLut.uniform(self.law, self.lut_entries) if self.use_lut else None
        return CrossbarArray(
            self.rows, cols, self.law, rng, lut=lut, d2d=self.mcmc.d2d, sd_scale=self.sd_scale
        )


@dataclass
class SupervisedRun:
    run: int
    seed: int
    accuracy: float
    array: CrossbarArray
    record: RunRecord
    test_metrics: np.ndarray = field(default_factory=lambda: np.zeros(0))


def run_seed(master_seed: int, run_index: int) -> int:
    """64-bit seed of run ``run_index`` derived from the master seed."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(run_index,))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def prepare_split(
    train_data: LabeledDataset, test_data: LabeledDataset, n_features: int | None
) -> tuple[LabeledDataset, LabeledDataset]:
    """Chi2 selection on the raw training split, then train-statistics centering."""
    if n_features is not None and n_features < train_data.width:
        idx = chi2_top_k(train_data, n_features)
        train_data, test_data = data_select(train_data, idx), data_select(test_data, idx)
    scaler = Standardizer.fit(train_data)
    return scaler.apply(train_data), scaler.apply(test_data)


def train_and_evaluate(
    task: SupervisedTask,
    train_data: LabeledDataset,
    test_data: LabeledDataset,
    seed: int,
    run: int = 0,
) -> SupervisedRun:
    train_data.check_trainable()
    rng = np.random.default_rng(seed)
    cfg = replace(task.mcmc, seed=seed)
    array = task.build_array(train_data.width, rng)
    record = train(array, LogisticModel(cfg.scale_S), train_data, cfg, rng)
    acc = evaluate_accuracy(array, test_data, cfg)
    model = LogisticModel(cfg.scale_S)
    test_metrics = np.array([model.row_metric(g, test_data) for g in array.weights()])
    return SupervisedRun(run, seed, acc, array, record, test_metrics)


def boxplot_stats(values) -> dict:
    v = np.asarray(values, dtype=float)
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    return {
        "runs": int(v.size),
        "median": float(med),
        "q1": float(q1),
        "q3": float(q3),
        "min": float(v.min()),
        "max": float(v.max()),
        "mean": float(v.mean()),
    }


def run_supervised_experiment(
    task: SupervisedTask,
    data: LabeledDataset,
    split: SplitSpec,
    runs: int,
    master_seed: int,
    n_features: int | None = None,
    split_per_run: bool = False,
    keep: bool = False,
) -> tuple[dict, list[SupervisedRun]]:
    """R independent train/test iterations; returns (summary, per-run results).

    With ``split_per_run`` each run reshuffles using its own seed; otherwise
    every run shares ``split.shuffle_seed``.  Arrays and traces are kept in
    the results only when ``keep`` is set.
    """
    results = []
    for r in range(runs):
        seed = run_seed(master_seed, r)
        sp = replace(split, shuffle_seed=seed) if split_per_run else split
        tr, te = prepare_split(*sp.split(data), n_features)
        try:
            res = train_and_evaluate(task, tr, te, seed, run=r)
        except StuckChainError as exc:
            exc.run = r
            raise
        if not keep:
            res.array = None
        results.append(res)
    return boxplot_stats([r.accuracy for r in results]), results


def probability_grid(array, cfg: McmcConfig, lo: float, hi: float, steps: int):
    """Posterior probability of class 1 on a square 2-D grid."""
    axis = np.linspace(lo, hi, steps)
    xx, yy = np.meshgrid(axis, axis)
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    return pts, predict_points(array, pts, cfg)


def predict_points(array, pts, cfg: McmcConfig) -> np.ndarray:
    return infer_batch(array, LogisticModel(cfg.scale_S), pts, cfg)


def label_flip(data: LabeledDataset) -> LabeledDataset:
    return replace(data, labels=1 - data.labels)


def log_posterior(g, data: LabeledDataset, cfg: McmcConfig) -> float:
    return supervised_log_likelihood(g, data, cfg.scale_S) + log_prior(g, cfg)


__all__ = [
    "DataError",
    "LabeledDataset",
    "LogisticModel",
    "SplitSpec",
    "SupervisedTask",
    "center_scale",
    "chi2_scores",
    "chi2_select",
    "evaluate_accuracy",
    "generate_two_gaussians",
    "load_csv_dataset",
    "logistic_row_function",
    "run_supervised_experiment",
    "supervised_log_likelihood",
]
