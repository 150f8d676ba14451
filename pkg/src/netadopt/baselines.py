"""Benchmark predictors: cascade variants, learned influence probabilities,
plain and locally weighted exponential Naive Bayes, and cross-validated k-NN.

The cascade and influence-probability methods predict from the graph: a
nonadopter's probability comes only from neighbors adopting in the current
week, so it is exactly zero whenever no neighbor just adopted.  The
classifier baselines consume the same power-feature records as the main
learner but ignore the hidden confounding feature.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_X_y

from .estimator import check_binary_labels, check_power_features
from .learner import RATE_CEILING, RATE_FLOOR, init_observed, squared_distances
from .network import Dataset, NetworkSnapshot

CASCADE_VARIANTS = ("cm1", "cm2", "cm3")


def _neighbor_matrix(snapshot: NetworkSnapshot) -> sp.csr_matrix:
    """Row i holds the entities whose ties reach entity i."""
    adj = snapshot.adjacency
    if snapshot.directed:
        return adj.T.tocsr().astype(np.int8)
    return adj.tocsr().astype(np.int8)


def cascade_predict_block(
    snapshot: NetworkSnapshot,
    week_adopters: np.ndarray,
    targets: np.ndarray,
    variant: str,
) -> np.ndarray:
    """1 - (1 - p)^l for each target, with l the count of its neighbors in
    ``week_adopters`` (entities adopting exactly in the snapshot week) and,
    for cm1, p = 1/k over the target's neighbor count."""
    if variant not in CASCADE_VARIANTS:
        raise ValueError(f"unknown cascade variant {variant!r}")
    targets = np.asarray(targets, dtype=np.int64)
    inc = _neighbor_matrix(snapshot)[targets]
    mask = np.zeros(snapshot.n_entities, dtype=np.int8)
    mask[np.asarray(week_adopters, dtype=np.int64)] = 1
    l = inc @ mask
    if variant == "cm1":
        k = np.asarray(inc.sum(axis=1)).ravel()
        with np.errstate(divide="ignore"):
            p = np.where(k > 0, 1.0 / np.maximum(k, 1), 0.0)
    elif variant == "cm2":
        p = np.full(len(targets), 0.1)
    else:
        p = np.full(len(targets), 0.01)
    return 1.0 - np.power(1.0 - p, l)


def cascade_predict(
    snapshot: NetworkSnapshot, week_adopters: np.ndarray, entity: int, variant: str
) -> float:
    return float(
        cascade_predict_block(snapshot, week_adopters, np.array([entity]), variant)[0]
    )


class InfluenceProbTable:
    """Sparse pairwise influence probabilities p[u, v] learned from actions."""

    def __init__(self, n_entities: int, pairs: dict[tuple[int, int], float]):
        self.n_entities = n_entities
        self.pairs = pairs
        if pairs:
            rows, cols = zip(*pairs.keys())
            self.matrix = sp.csr_matrix(
                (list(pairs.values()), (rows, cols)), shape=(n_entities, n_entities)
            )
        else:
            self.matrix = sp.csr_matrix((n_entities, n_entities))

    def get(self, u: int, v: int) -> float:
        return self.pairs.get((u, v), 0.0)


def learn_influence_probs(dataset: Dataset, by_week: int | None = None) -> InfluenceProbTable:
    """Estimate p[u, v] as the share of u's adopted items that propagated to v.

    An item counts as propagated from u to v when v adopts it after u does
    and the tie between them existed strictly before u's adoption.  Only
    actions with week <= ``by_week`` are used (default: all).
    """
    if dataset.actions is None:
        raise ValueError("dataset has no multi-item action log")
    ent, item, week = dataset.actions
    if by_week is not None:
        keep = week <= by_week
        ent, item, week = ent[keep], item[keep], week[keep]
    n = dataset.n_entities

    first_contact = _first_contact_weeks(dataset)
    adopted_count = np.zeros(n, dtype=np.int64)
    propagated: dict[tuple[int, int], int] = {}
    for it in np.unique(item):
        sel = item == it
        users = ent[sel]
        weeks = week[sel]
        adopted_count[users] += 1
        when = {int(u): int(w) for u, w in zip(users, weeks)}
        for u, w_u in when.items():
            row = first_contact[u]
            for v, w_tie in row.items():
                if w_tie >= w_u:
                    continue
                w_v = when.get(v)
                if w_v is not None and w_v > w_u:
                    propagated[(u, v)] = propagated.get((u, v), 0) + 1
    pairs = {
        (u, v): count / adopted_count[u] for (u, v), count in propagated.items()
    }
    return InfluenceProbTable(n, pairs)


def _first_contact_weeks(dataset: Dataset) -> list[dict[int, int]]:
    """Per entity, the first communication week with each partner."""
    cached = getattr(dataset, "_first_contact", None)
    if cached is not None:
        return cached
    src, dst, week, _ = dataset._comm
    out: list[dict[int, int]] = [dict() for _ in range(dataset.n_entities)]
    order = np.argsort(week, kind="stable")
    for s, d, w in zip(src[order], dst[order], week[order]):
        row = out[s]
        if d not in row:
            row[int(d)] = int(w)
    dataset._first_contact = out
    return out


def ip_predict_block(
    table: InfluenceProbTable,
    snapshot: NetworkSnapshot,
    week_adopters: np.ndarray,
    targets: np.ndarray,
) -> np.ndarray:
    """1 - prod(1 - p[u, v]) over v's neighbors u adopting this week."""
    targets = np.asarray(targets, dtype=np.int64)
    inc = _neighbor_matrix(snapshot)
    mask = np.zeros(snapshot.n_entities, dtype=bool)
    mask[np.asarray(week_adopters, dtype=np.int64)] = True
    out = np.zeros(len(targets))
    for k, v in enumerate(targets):
        neigh = inc.indices[inc.indptr[v] : inc.indptr[v + 1]]
        survive = 1.0
        for u in neigh[mask[neigh]]:
            survive *= 1.0 - table.get(int(u), int(v))
        out[k] = 1.0 - survive
    return out


def ip_predict(
    table: InfluenceProbTable,
    snapshot: NetworkSnapshot,
    week_adopters: np.ndarray,
    entity: int,
) -> float:
    return float(ip_predict_block(table, snapshot, week_adopters, np.array([entity]))[0])


class ExponentialNaiveBayes(ClassifierMixin, BaseEstimator):
    """Plain Naive Bayes over the observed powers with exponential densities."""

    def __init__(self, rate_floor: float = RATE_FLOOR, rate_ceiling: float = RATE_CEILING):
        self.rate_floor = rate_floor
        self.rate_ceiling = rate_ceiling

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float)
        X = check_power_features(X)
        y = check_binary_labels(y)
        self.classes_ = np.array([0, 1])
        self.params_ = init_observed(X, y, (self.rate_floor, self.rate_ceiling))
        self.n_features_in_ = X.shape[1]
        return self

    def predict_proba(self, X):
        X = check_power_features(X, self.n_features_in_)
        p = _nb_posterior(
            X, self.params_.p1, self.params_.rate_pos, self.params_.rate_neg
        )
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(np.int64)


def _nb_posterior(X, p1, rate_pos, rate_neg):
    """Two-class Bayes ratio of exponential densities, in log space."""
    p1 = np.asarray(p1, dtype=float)
    if rate_pos.ndim == 1:
        rate_pos = rate_pos[None, :]
        rate_neg = rate_neg[None, :]
    z = (np.log(rate_pos) - rate_pos * X).sum(axis=1)
    z -= (np.log(rate_neg) - rate_neg * X).sum(axis=1)
    with np.errstate(divide="ignore"):
        z = z + np.log(p1) - np.log(1.0 - p1)
    out = np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))), np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))
    out = np.where(p1 <= 0.0, 0.0, out)
    out = np.where(p1 >= 1.0, 1.0, out)
    return out


class LocallyWeightedNaiveBayes(ClassifierMixin, BaseEstimator):
    """Naive Bayes with per-query linear distance weights on the records.

    Record weights are K' - C_i with C_i the squared distance to the query
    and K' = max C_i + 1, mirroring the main learner's weighting without the
    hidden feature; counts become weight sums and feature sums become
    weighted sums in the estimates.
    """

    def __init__(self, rate_floor: float = RATE_FLOOR, rate_ceiling: float = RATE_CEILING):
        self.rate_floor = rate_floor
        self.rate_ceiling = rate_ceiling

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float)
        X = check_power_features(X)
        y = check_binary_labels(y)
        self.classes_ = np.array([0, 1])
        self.X_ = X
        self.y_ = y
        self.n_features_in_ = X.shape[1]
        return self

    def predict_proba(self, X):
        X = check_power_features(X, self.n_features_in_)
        lo, hi = self.rate_floor, self.rate_ceiling
        pos = self.y_ == 1
        out = np.empty(len(X))
        for b, q in enumerate(X):
            c = squared_distances(self.X_, q)
            w = c.max() + 1.0 - c
            w1 = w[pos].sum()
            w0 = w[~pos].sum()
            p1 = w1 / (w1 + w0)
            with np.errstate(divide="ignore", invalid="ignore"):
                rp = w1 / (w[pos, None] * self.X_[pos]).sum(axis=0)
                rn = w0 / (w[~pos, None] * self.X_[~pos]).sum(axis=0)
            rp = np.clip(np.where(np.isfinite(rp), rp, hi), lo, hi)
            rn = np.clip(np.where(np.isfinite(rn), rn, hi), lo, hi)
            out[b] = _nb_posterior(q[None, :], p1, rp, rn)[0]
        return np.column_stack([1.0 - out, out])

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(np.int64)


class CrossValidatedKnn(ClassifierMixin, BaseEstimator):
    """k-nearest-neighbor adoption scorer with k chosen by cross validation.

    Each candidate k is scored by mean AUC over the folds (folds without both
    classes are skipped); ties prefer the smaller k.  Distance ties are
    broken by training-record order, which follows entity order in the
    training sets built here.
    """

    def __init__(self, k_grid=(1, 3, 5, 11, 21, 51), n_folds: int = 10, random_state=None):
        self.k_grid = k_grid
        self.n_folds = n_folds
        self.random_state = random_state

    def fit(self, X, y):
        from .evaluation import auc  # local import; evaluation depends on baselines

        X, y = check_X_y(X, y, dtype=float)
        X = check_power_features(X)
        y = check_binary_labels(y)
        self.classes_ = np.array([0, 1])
        self.X_ = X
        self.y_ = y
        self.n_features_in_ = X.shape[1]

        seed = self.random_state
        if isinstance(seed, tuple):
            seed = np.random.SeedSequence(list(seed))
        rng = np.random.default_rng(seed)
        n = len(X)
        order = rng.permutation(n)
        folds = np.array_split(order, min(self.n_folds, n))
        best_k, best_score = None, -np.inf
        for k in self.k_grid:
            scores = []
            for fold in folds:
                if len(fold) == 0:
                    continue
                train_mask = np.ones(n, dtype=bool)
                train_mask[fold] = False
                if train_mask.sum() == 0:
                    continue
                y_val = y[fold]
                if y_val.min() == y_val.max():
                    continue
                preds = _knn_scores(X[train_mask], y[train_mask], X[fold], k)
                scores.append(auc(preds, y_val))
            if scores and np.mean(scores) > best_score + 1e-12:
                best_k, best_score = k, float(np.mean(scores))
        self.k_ = best_k if best_k is not None else int(self.k_grid[0])
        return self

    def predict_proba(self, X):
        X = check_power_features(X, self.n_features_in_)
        p = _knn_scores(self.X_, self.y_, X, self.k_)
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(np.int64)


def _knn_scores(X_train, y_train, X_test, k):
    """Fraction of positive labels among the k nearest training records."""
    k = min(k, len(X_train))
    out = np.empty(len(X_test))
    for b, q in enumerate(X_test):
        d = squared_distances(X_train, q)
        nearest = np.argsort(d, kind="stable")[:k]
        out[b] = y_train[nearest].mean()
    return out
