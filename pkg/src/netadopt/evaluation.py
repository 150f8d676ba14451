"""Rolling next-week evaluation: train through week T, score week T+1 by AUC,
and compare methods across weeks with the Wilcoxon signed-ranks test.

AUC is the Mann-Whitney rank statistic (ties count half), equal to the
probability that a random next-week adopter outranks a random non-adopter.
Weeks with no next-week adopter (or none remaining) have undefined AUC and
are skipped.
"""

from __future__ import annotations

import csv
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import baselines, powers
from .estimator import LocalEmNaiveBayes
from .inference import InferenceConfig
from .network import Dataset, ValidationError
from .training import construct_train

METHODS = ("lemnb", "lemnb+", "cm1", "cm2", "cm3", "ip", "nb", "lwnb", "knn")
_FEATURE_METHODS = {"lemnb", "lemnb+", "nb", "lwnb", "knn"}


@dataclass(frozen=True)
class EvalConfig:
    """Knobs shared by the prediction and evaluation entry points."""

    distance_scheme: str = powers.MIXED_MEAN
    n_bootstrap: int = 5
    n_trials: int = 20
    rate_floor: float = 1e-8
    rate_ceiling: float = 1e8
    sigma: float = 1e-4
    min_samples: int = 100
    max_samples: int = 100_000
    knn_grid: tuple = (1, 3, 5, 11, 21, 51)
    knn_folds: int = 10
    seed: int = 0
    threads: int = 1


def _rankdata(values: np.ndarray) -> np.ndarray:
    """Fractional ranks (ties share the average rank), 1-based."""
    values = np.asarray(values, dtype=float)
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def auc(scores, labels) -> float:
    """Probability that a random positive outranks a random negative."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    pos = labels == 1
    n1 = int(pos.sum())
    n0 = len(labels) - n1
    if n1 == 0 or n0 == 0:
        raise ValueError("AUC undefined without both classes")
    ranks = _rankdata(scores)
    return float((ranks[pos].sum() - n1 * (n1 + 1) / 2) / (n1 * n0))


def wilcoxon_signed_ranks(a, b) -> tuple[float, float]:
    """Two-sided Wilcoxon signed-ranks test on paired samples.

    Zero differences are dropped, tied absolute differences share average
    ranks, and the p-value uses the normal approximation with tie-corrected
    variance.  Returns (statistic, p) with the statistic the smaller of the
    positive and negative rank sums.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if len(a) != len(b):
        raise ValueError("paired samples must have equal length")
    if len(a) < 6:
        raise ValueError("need at least 6 pairs")
    d = a - b
    d = d[d != 0]
    n = len(d)
    if n == 0:
        return 0.0, 1.0
    ranks = _rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    stat = min(w_plus, w_minus)
    mean = n * (n + 1) / 4
    var = n * (n + 1) * (2 * n + 1) / 24
    _, counts = np.unique(ranks, return_counts=True)
    var -= float((counts**3 - counts).sum()) / 48
    if var <= 0:
        return stat, 1.0
    z = (stat - mean) / math.sqrt(var)
    p = min(1.0, 2 * (0.5 * math.erfc(-z / math.sqrt(2))))
    return stat, p


@dataclass
class WeekPredictions:
    """Predictions for all week-T nonadopters, labeled by week T+1 adoption."""

    week: int
    entities: np.ndarray  # internal indices of the week-T nonadopters
    entity_ids: np.ndarray
    labels: np.ndarray  # adopted exactly in week T+1
    probabilities: dict[str, np.ndarray] = field(default_factory=dict)


def predict_week(
    dataset: Dataset,
    T: int,
    methods: list[str],
    config: EvalConfig,
    entities: np.ndarray | None = None,
) -> WeekPredictions:
    """Fit every method on data through week T and score its nonadopters.

    ``entities`` restricts the prediction targets to a subset of the week-T
    nonadopters.  Labels mark adoption exactly in week T+1 and are all zero
    when T is the final observed week.
    """
    for m in methods:
        if m not in METHODS:
            raise ValidationError(f"unknown method {m!r}")
    if not 1 <= T <= dataset.horizon:
        raise ValidationError(f"week {T} outside [1, {dataset.horizon}]")
    snap = dataset.snapshot(T)
    targets = snap.nonadopters
    adopters = snap.adopters
    if entities is not None:
        entities = np.asarray(entities, dtype=np.int64)
        outside = np.setdiff1d(entities, targets)
        if len(outside):
            bad = dataset.entity_ids[outside].tolist()
            raise ValidationError(f"entities {bad} are not nonadopters at week {T}")
        targets = np.sort(entities)
    week_adopters = dataset.adoption_entity[dataset.adoption_week == T]
    labels = np.isin(targets, dataset.adoption_entity[dataset.adoption_week == T + 1]).astype(np.int64)

    out = WeekPredictions(
        week=T,
        entities=targets,
        entity_ids=dataset.entity_ids[targets],
        labels=labels,
    )
    if len(targets) == 0:
        for m in methods:
            out.probabilities[m] = np.empty(0)
        return out

    scheme = config.distance_scheme
    need_features = any(m in _FEATURE_METHODS for m in methods)
    with_conn = "lemnb+" in methods
    if need_features:
        bounds = powers.compute_bounds(snap, scheme)
        train = construct_train(
            dataset, T, with_connectedness=with_conn, scheme=scheme, bounds=bounds
        )
        X_train = train.features()
        y_train = train.labels()
        X_test = powers.total_powers_block(snap, targets, adopters, bounds, scheme)
        if with_conn:
            z = powers.connectedness_block(snap, targets, adopters)
            X_test = np.column_stack([X_test, z])

    for m in methods:
        if m in baselines.CASCADE_VARIANTS:
            probs = baselines.cascade_predict_block(snap, week_adopters, targets, m)
        elif m == "ip":
            table = baselines.learn_influence_probs(dataset, by_week=T)
            probs = baselines.ip_predict_block(table, snap, week_adopters, targets)
        elif m == "nb":
            model = baselines.ExponentialNaiveBayes(config.rate_floor, config.rate_ceiling)
            model.fit(X_train[:, :3], y_train)
            probs = model.predict_proba(X_test[:, :3])[:, 1]
        elif m == "lwnb":
            model = baselines.LocallyWeightedNaiveBayes(config.rate_floor, config.rate_ceiling)
            model.fit(X_train[:, :3], y_train)
            probs = model.predict_proba(X_test[:, :3])[:, 1]
        elif m == "knn":
            model = baselines.CrossValidatedKnn(
                k_grid=config.knn_grid,
                n_folds=config.knn_folds,
                random_state=(config.seed, T, METHODS.index(m)),
            )
            model.fit(X_train[:, :3], y_train)
            probs = model.predict_proba(X_test[:, :3])[:, 1]
        else:  # lemnb or lemnb+
            cols = slice(None) if m == "lemnb+" else slice(0, 3)
            model = LocalEmNaiveBayes(
                n_bootstrap=config.n_bootstrap,
                n_trials=config.n_trials,
                rate_floor=config.rate_floor,
                rate_ceiling=config.rate_ceiling,
                sigma=config.sigma,
                min_samples=config.min_samples,
                max_samples=config.max_samples,
                random_state=(config.seed, T, METHODS.index(m)),
            )
            model.fit(X_train[:, cols], y_train)
            probs = model.predict_proba(X_test[:, cols])[:, 1]
        out.probabilities[m] = np.asarray(probs, dtype=float)
    return out


@dataclass
class EvalReport:
    """Per-(week, method) AUC table with summary and pairwise comparisons."""

    weeks: list[int]
    methods: list[str]
    auc_table: dict[tuple[int, str], float | None]

    def aucs(self, method: str) -> list[tuple[int, float]]:
        return [
            (t, self.auc_table[(t, method)])
            for t in self.weeks
            if self.auc_table[(t, method)] is not None
        ]

    def mean_auc(self, method: str) -> float:
        vals = [v for _, v in self.aucs(method)]
        return float(np.mean(vals)) if vals else float("nan")

    def summary(self) -> list[tuple[str, float, float]]:
        rows = []
        for m in self.methods:
            vals = np.array([v for _, v in self.aucs(m)])
            if len(vals) == 0:
                rows.append((m, float("nan"), float("nan")))
            elif len(vals) == 1:
                rows.append((m, float(vals[0]), 0.0))
            else:
                rows.append((m, float(vals.mean()), float(vals.std(ddof=1))))
        return rows

    def wilcoxon_pairs(self) -> list[tuple[str, str, float, float]]:
        rows = []
        for i, ma in enumerate(self.methods):
            for mb in self.methods[i + 1 :]:
                paired = [
                    (self.auc_table[(t, ma)], self.auc_table[(t, mb)])
                    for t in self.weeks
                    if self.auc_table[(t, ma)] is not None
                    and self.auc_table[(t, mb)] is not None
                ]
                if len(paired) < 6:
                    continue
                a, b = zip(*paired)
                stat, p = wilcoxon_signed_ranks(a, b)
                rows.append((ma, mb, stat, p))
        return rows

    def write_csvs(self, out_dir: str | Path):
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "report.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["week", "method", "auc"])
            for t in self.weeks:
                for m in self.methods:
                    v = self.auc_table[(t, m)]
                    writer.writerow([t, m, "" if v is None else repr(v)])
        with open(out_dir / "summary.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["method", "mean_auc", "std_auc"])
            for m, mean, std in self.summary():
                writer.writerow([m, repr(mean), repr(std)])
        with open(out_dir / "wilcoxon.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["method_a", "method_b", "statistic", "p_value"])
            for ma, mb, stat, p in self.wilcoxon_pairs():
                writer.writerow([ma, mb, repr(stat), repr(p)])


def _eval_one_week(args):
    dataset, T, methods, config = args
    preds = predict_week(dataset, T, methods, config)
    cells = {}
    definable = len(preds.labels) > 0 and 0 < preds.labels.sum() < len(preds.labels)
    for m in methods:
        cells[m] = auc(preds.probabilities[m], preds.labels) if definable else None
    return T, cells


def run_rolling_eval(
    dataset: Dataset, methods: list[str], weeks: list[int], config: EvalConfig
) -> EvalReport:
    """Evaluate every method at every week T in ``weeks`` against week T+1."""
    weeks = sorted(weeks)
    for T in weeks:
        if not 1 <= T <= dataset.horizon - 1:
            raise ValidationError(f"week {T} outside [1, {dataset.horizon - 1}]")
    tasks = [(dataset, T, list(methods), config) for T in weeks]
    results: dict[int, dict] = {}
    if config.threads > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=config.threads) as pool:
            for T, cells in pool.map(_eval_one_week, tasks):
                results[T] = cells
    else:
        for task in tasks:
            T, cells = _eval_one_week(task)
            results[T] = cells
    table = {}
    for T in weeks:
        for m in methods:
            table[(T, m)] = results[T][m]
        if all(results[T][m] is None for m in methods):
            warnings.warn(f"week {T}: AUC undefined (single-class outcome); skipped")
    return EvalReport(weeks=weeks, methods=list(methods), auc_table=table)
