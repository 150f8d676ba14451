"""Adoption-probability inference by Monte Carlo over the hidden factor.

The posterior given a concrete hidden value is a two-class Bayes ratio of
exponential densities, evaluated in log space.  The hidden value is unknown,
so the adoption probability is its expectation under the fitted hidden-factor
mixture, estimated with a running mean that stops once its relative change
falls below a threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .learner import ModelParams

_CHUNK = 4096


@dataclass(frozen=True)
class InferenceConfig:
    """Stopping rule for the running-mean estimate.

    The relative-change test is noisy for small counts, so at least
    ``min_samples`` draws are taken before it may stop; ``max_samples`` caps
    the loop unconditionally.
    """

    sigma: float = 1e-4
    min_samples: int = 100
    max_samples: int = 100_000

    def __post_init__(self):
        if not 0 < self.sigma < 1:
            raise ValueError("sigma must lie in (0, 1)")
        if self.min_samples < 1 or self.max_samples < self.min_samples:
            raise ValueError("need 1 <= min_samples <= max_samples")


def _log_odds_base(params: ModelParams, test: np.ndarray) -> float:
    """Log odds of adoption before the hidden-density terms' h dependence."""
    x = np.asarray(test, dtype=float)
    num = np.log(params.rate_pos) - params.rate_pos * x
    den = np.log(params.rate_neg) - params.rate_neg * x
    base = float((num - den).sum())
    base += np.log(params.hidden_pos) - np.log(params.hidden_neg)
    return base


def _sigmoid(z):
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def posterior_given_h(params: ModelParams, test: np.ndarray, h_q: float) -> float:
    """Adoption probability conditioned on a concrete hidden value."""
    if h_q < 0:
        raise ValueError("hidden power must be nonnegative")
    if params.p1 <= 0.0:
        return 0.0
    if params.p1 >= 1.0:
        return 1.0
    z = (
        np.log(params.p1 / params.p0)
        + _log_odds_base(params, test)
        - (params.hidden_pos - params.hidden_neg) * h_q
    )
    return float(_sigmoid(np.asarray([z]))[0])


def sample_hidden(params: ModelParams, rng: np.random.Generator, size: int | None = None):
    """Draw from the fitted hidden-factor mixture: pick the class by its
    prior, then an exponential with that class's hidden rate."""
    m = 1 if size is None else size
    pick_pos = rng.random(m) < params.p1
    scale = np.where(pick_pos, 1.0 / params.hidden_pos, 1.0 / params.hidden_neg)
    draws = rng.standard_exponential(m) * scale
    return float(draws[0]) if size is None else draws


def infer_probability(
    params: ModelParams,
    test: np.ndarray,
    cfg: InferenceConfig | None = None,
    rng: np.random.Generator | None = None,
) -> float:
    """Running-mean Monte Carlo estimate of the adoption probability.

    Stops at the first draw (not before ``min_samples``) where the relative
    change of the mean is within ``sigma``; a mean of exactly zero stops
    immediately since the relative criterion is undefined there.  Draws are
    consumed from ``rng`` in fixed-size blocks, so results are reproducible
    for a given seed and configuration.
    """
    if cfg is None:
        cfg = InferenceConfig()
    if rng is None:
        rng = np.random.default_rng()
    if params.p1 <= 0.0:
        return 0.0
    if params.p1 >= 1.0:
        return 1.0
    delta = np.log(params.p1 / params.p0) + _log_odds_base(params, test)
    slope = params.hidden_pos - params.hidden_neg

    count = 0
    total = 0.0
    mean = 0.0
    while count < cfg.max_samples:
        m = min(_CHUNK, cfg.max_samples - count)
        h = sample_hidden(params, rng, m)
        post = _sigmoid(delta - slope * h)
        sums = total + np.cumsum(post)
        ns = count + np.arange(1, m + 1)
        means = sums / ns
        prev = np.empty(m)
        prev[0] = mean
        prev[1:] = means[:-1]
        eligible = ns >= cfg.min_samples
        zero_stop = eligible & (means == 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            rel = np.abs(means - prev) / np.where(means > 0, means, 1.0)
        stop = zero_stop | (eligible & (means > 0.0) & (rel <= cfg.sigma))
        if stop.any():
            return float(means[int(np.argmax(stop))])
        count += m
        total = float(sums[-1])
        mean = float(means[-1])
    return mean


def infer_probability_batch(
    params_list: list[ModelParams],
    tests: np.ndarray,
    cfg: InferenceConfig | None = None,
    seed: np.random.SeedSequence | int | None = None,
) -> np.ndarray:
    """Independent inference per test row, each on its own derived stream."""
    tests = np.atleast_2d(np.asarray(tests, dtype=float))
    if len(params_list) != len(tests):
        raise ValueError("one parameter set per test row required")
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = ss.spawn(len(tests))
    out = np.empty(len(tests))
    for b, (params, child) in enumerate(zip(params_list, children)):
        out[b] = infer_probability(params, tests[b], cfg, np.random.default_rng(child))
    return out
