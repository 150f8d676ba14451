"""Scikit-learn style front end for the locally-weighted EM learner."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_X_y

from .inference import InferenceConfig, infer_probability_batch
from .learner import FitDiagnostics, ModelParams, fit_lemnb_batch


def _seed_sequence(random_state) -> np.random.SeedSequence:
    if isinstance(random_state, tuple):
        return np.random.SeedSequence(list(random_state))
    return np.random.SeedSequence(random_state)


def check_power_features(X, n_features: int | None = None) -> np.ndarray:
    """Validate a nonnegative power-feature matrix."""
    X = check_array(X, dtype=float, ensure_2d=True)
    if np.any(X < 0):
        raise ValueError("power features must be nonnegative")
    if n_features is not None and X.shape[1] != n_features:
        raise ValueError(f"expected {n_features} features, got {X.shape[1]}")
    return X


def check_binary_labels(y) -> np.ndarray:
    y = np.asarray(y)
    uniq = np.unique(y)
    if not np.all(np.isin(uniq, [0, 1])):
        raise ValueError("labels must be binary 0/1")
    return y.astype(np.int64)


class LocalEmNaiveBayes(ClassifierMixin, BaseEstimator):
    """Adoption-probability classifier over nonnegative power features.

    A Naive Bayes model with exponential class-conditional densities and one
    unobserved confounding feature.  Parameters are re-estimated locally for
    every query row: training records are weighted by closeness to the query,
    the hidden-feature expectations make the weighted likelihood tractable in
    closed form, and the estimate is averaged over bootstrap samples and
    noisy hidden-rate initializations.  Prediction marginalizes the hidden
    feature by Monte Carlo.

    Parameters
    ----------
    n_bootstrap : int, number of bootstrap samples chained per fit (>= 2).
    n_trials : int, noisy re-initializations averaged per case.
    rate_floor, rate_ceiling : clamp for every estimated exponential rate.
    sigma : relative-change stopping threshold of the inference loop.
    min_samples, max_samples : bounds on the Monte Carlo sample count.
    random_state : int, tuple of ints, or None.  All bootstrap indices, noise
        terms, and Monte Carlo draws derive from it; ``None`` draws fresh
        entropy per call.

    Attributes
    ----------
    classes_ : array [0, 1]
    diagnostics_ : counters of guarded update steps from the last predict.
    """

    def __init__(
        self,
        n_bootstrap: int = 5,
        n_trials: int = 20,
        rate_floor: float = 1e-8,
        rate_ceiling: float = 1e8,
        sigma: float = 1e-4,
        min_samples: int = 100,
        max_samples: int = 100_000,
        random_state=None,
    ):
        self.n_bootstrap = n_bootstrap
        self.n_trials = n_trials
        self.rate_floor = rate_floor
        self.rate_ceiling = rate_ceiling
        self.sigma = sigma
        self.min_samples = min_samples
        self.max_samples = max_samples
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float)
        X = check_power_features(X)
        y = check_binary_labels(y)
        self.classes_ = np.array([0, 1])
        self.X_ = X
        self.y_ = y
        self.n_features_in_ = X.shape[1]
        return self

    def _clamp(self):
        return (self.rate_floor, self.rate_ceiling)

    def _streams(self):
        root = _seed_sequence(self.random_state)
        fit_ss, infer_ss = root.spawn(2)
        return fit_ss, infer_ss

    def local_params_batch(self, X) -> tuple[list[ModelParams], FitDiagnostics]:
        """Locally fitted parameter vectors for every query row."""
        X = check_power_features(X, self.n_features_in_)
        fit_ss, _ = self._streams()
        return fit_lemnb_batch(
            self.X_,
            self.y_,
            X,
            n_bootstrap=self.n_bootstrap,
            n_trials=self.n_trials,
            rng=np.random.default_rng(fit_ss),
            clamp=self._clamp(),
        )

    def local_params(self, x) -> ModelParams:
        params, _ = self.local_params_batch(np.asarray(x, dtype=float)[None, :])
        return params[0]

    def predict_proba(self, X):
        X = check_power_features(X, self.n_features_in_)
        fit_ss, infer_ss = self._streams()
        params, diag = fit_lemnb_batch(
            self.X_,
            self.y_,
            X,
            n_bootstrap=self.n_bootstrap,
            n_trials=self.n_trials,
            rng=np.random.default_rng(fit_ss),
            clamp=self._clamp(),
        )
        self.diagnostics_ = diag
        cfg = InferenceConfig(
            sigma=self.sigma, min_samples=self.min_samples, max_samples=self.max_samples
        )
        p = infer_probability_batch(params, X, cfg, infer_ss)
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(np.int64)
