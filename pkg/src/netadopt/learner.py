"""Locally-weighted EM learner for exponential Naive Bayes with a hidden factor.

The model is a two-class Naive Bayes over nonnegative power features
(influence, equivalence, similarity, optionally connectedness) plus one
hidden confounding feature, all with exponential class-conditional densities.
Training records are weighted by closeness to the test point, so the fitted
parameter vector is local to each test point.  The expected weighted
log-likelihood has closed-form coordinate updates; the outer loop averages
those updates over bootstrap samples and noisy initializations of the hidden
rates, then keeps the initialization case with the highest expected
likelihood.

Everything is vectorized over a batch of test points: the per-record weights
depend on the test point only through the squared distance to it, which
reduces to fixed per-sample moments plus O(1) work per test point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RATE_FLOOR = 1e-8
RATE_CEILING = 1e8

EPS_LARGEST = ("largest", 0.0, 0.01)
EPS_AVERAGE = ("average", -0.005, 0.005)
EPS_SMALLEST = ("smallest", 0.0, 0.01)
_CASES = (EPS_LARGEST, EPS_AVERAGE, EPS_SMALLEST)


@dataclass(frozen=True)
class ModelParams:
    """Estimated priors and exponential rates.

    ``rate_pos``/``rate_neg`` hold the observed-feature rates given adoption /
    non-adoption, in feature order (influence, equivalence, similarity, and
    connectedness when present); ``hidden_pos``/``hidden_neg`` are the rates
    of the hidden confounding feature.
    """

    p1: float
    p0: float
    rate_pos: np.ndarray
    rate_neg: np.ndarray
    hidden_pos: float
    hidden_neg: float

    def __post_init__(self):
        object.__setattr__(self, "rate_pos", np.asarray(self.rate_pos, dtype=float))
        object.__setattr__(self, "rate_neg", np.asarray(self.rate_neg, dtype=float))

    @property
    def n_features(self) -> int:
        return len(self.rate_pos)

    def validate(self):
        if not np.isclose(self.p1 + self.p0, 1.0, rtol=0, atol=1e-12):
            raise ValueError("class priors must sum to 1")
        rates = np.concatenate(
            [self.rate_pos, self.rate_neg, [self.hidden_pos, self.hidden_neg]]
        )
        if not np.all(np.isfinite(rates)) or np.any(rates <= 0):
            raise ValueError("all rates must be positive and finite")
        return self


@dataclass(frozen=True)
class WeightContext:
    """Per-record weighting terms for one (sample, test point) pair."""

    K: float
    C: np.ndarray
    Q: np.ndarray
    R: np.ndarray


@dataclass
class FitDiagnostics:
    """Counters for guarded update steps; zero in the well-posed regime."""

    hidden_rate_held: int = 0
    nonpositive_weight: int = 0

    def merge(self, other: "FitDiagnostics"):
        self.hidden_rate_held += other.hidden_rate_held
        self.nonpositive_weight += other.nonpositive_weight


class _Batch:
    """Parameter arrays over a batch of test points (internal)."""

    __slots__ = ("p1", "rate_pos", "rate_neg", "hidden_pos", "hidden_neg")

    def __init__(self, p1, rate_pos, rate_neg, hidden_pos, hidden_neg):
        self.p1 = p1  # (B,)
        self.rate_pos = rate_pos  # (B, F)
        self.rate_neg = rate_neg
        self.hidden_pos = hidden_pos  # (B,)
        self.hidden_neg = hidden_neg

    @classmethod
    def tiled(cls, params: ModelParams, batch: int) -> "_Batch":
        return cls(
            p1=np.full(batch, params.p1),
            rate_pos=np.tile(params.rate_pos, (batch, 1)),
            rate_neg=np.tile(params.rate_neg, (batch, 1)),
            hidden_pos=np.full(batch, params.hidden_pos),
            hidden_neg=np.full(batch, params.hidden_neg),
        )

    def row(self, b: int) -> ModelParams:
        p1 = float(self.p1[b])
        return ModelParams(
            p1=p1,
            p0=1.0 - p1,
            rate_pos=self.rate_pos[b].copy(),
            rate_neg=self.rate_neg[b].copy(),
            hidden_pos=float(self.hidden_pos[b]),
            hidden_neg=float(self.hidden_neg[b]),
        )


def _clamp_rate(values, clamp):
    lo, hi = clamp
    return np.clip(np.where(np.isfinite(values), values, hi), lo, hi)


def _class_rate(count, total, clamp):
    """count / total with the degenerate cases pushed to the clamp ceiling."""
    count = np.asarray(count, dtype=float)
    total = np.asarray(total, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        rate = np.where(total > 0, count / np.maximum(total, 1e-300), np.inf)
    return _clamp_rate(rate, clamp)


def init_observed(
    X: np.ndarray, y: np.ndarray, clamp=(RATE_FLOOR, RATE_CEILING)
) -> ModelParams:
    """Unweighted Naive Bayes estimates of the priors and observed rates.

    Each class rate is the class record count over the class feature sum
    (the maximum-likelihood rate of an exponential).  Hidden rates are left
    unset (NaN) until :func:`init_hidden` picks a case.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if len(X) == 0:
        raise ValueError("training set is empty")
    pos = y == 1
    n1 = int(pos.sum())
    n0 = len(y) - n1
    p1 = n1 / len(y)
    rate_pos = _class_rate(n1, X[pos].sum(axis=0), clamp)
    rate_neg = _class_rate(n0, X[~pos].sum(axis=0), clamp)
    return ModelParams(
        p1=p1,
        p0=1.0 - p1,
        rate_pos=rate_pos,
        rate_neg=rate_neg,
        hidden_pos=np.nan,
        hidden_neg=np.nan,
    )


def init_hidden(
    params: ModelParams,
    case: int,
    epsilon: float,
    clamp=(RATE_FLOOR, RATE_CEILING),
    n_observed: int = 3,
) -> ModelParams:
    """Set the hidden rates from the observed means for one of three cases.

    Case 1 takes the hidden mean as the largest observed mean scaled by
    (1 + eps); case 2 the average scaled by (1 + eps); case 3 the smallest
    scaled by (1 - eps).  Only the first ``n_observed`` features enter the
    max/average/min (the connectedness extension keeps the original trio).
    """
    if case not in (1, 2, 3):
        raise ValueError("case must be 1, 2, or 3")
    hidden = []
    for rates in (params.rate_pos[:n_observed], params.rate_neg[:n_observed]):
        means = 1.0 / rates
        if case == 1:
            mean = means.max() * (1.0 + epsilon)
        elif case == 2:
            mean = means.mean() * (1.0 + epsilon)
        else:
            mean = means.min() * (1.0 - epsilon)
        hidden.append(float(_clamp_rate(np.array(1.0 / mean), clamp)))
    return ModelParams(
        p1=params.p1,
        p0=params.p0,
        rate_pos=params.rate_pos,
        rate_neg=params.rate_neg,
        hidden_pos=hidden[0],
        hidden_neg=hidden[1],
    )


def draw_epsilon(case: int, rng: np.random.Generator) -> float:
    """One noise draw for the given initialization case."""
    _, lo, hi = _CASES[case - 1]
    return float(lo + (hi - lo) * rng.random())


def squared_distances(X: np.ndarray, test: np.ndarray) -> np.ndarray:
    """Squared Euclidean distance of each record to the test point."""
    diff = np.asarray(X, dtype=float) - np.asarray(test, dtype=float)[None, :]
    return (diff * diff).sum(axis=1)


def compute_weight_context(
    X: np.ndarray, test: np.ndarray, theta_bar: ModelParams
) -> WeightContext:
    """The weighting constant K and per-record expected weights Q, R.

    K is the largest squared distance plus twice the squared hidden means of
    both classes, which makes every expected weight strictly positive.  Q and
    R are returned on the scale of the closed-form updates (the expected
    weights times the product of squared hidden rates).
    """
    C = squared_distances(X, test)
    lam1 = theta_bar.hidden_pos
    lam0 = theta_bar.hidden_neg
    K = float(C.max()) + 2.0 / lam0**2 + 2.0 / lam1**2
    scale = lam0**2 * lam1**2
    p1, p0 = theta_bar.p1, theta_bar.p0
    # Expanded forms of the update-equation definitions; algebraically equal
    # and immune to cancellation when the two hidden rates differ widely.
    slack = C.max() - C
    Q = scale * slack + 2 * p1 * lam1**2 + 2 * p0 * lam0 * lam1
    R = scale * slack + 2 * p0 * lam0**2 + 2 * p1 * lam0 * lam1
    return WeightContext(K=K, C=C, Q=Q, R=R)


class _SampleMoments:
    """Per-class reductions of one training sample.

    With these, every per-test-point sum needed by the closed-form updates is
    O(F^2) instead of O(n).
    """

    __slots__ = ("count", "sx", "sxx", "su", "sxu")

    def __init__(self, X: np.ndarray):
        self.count = len(X)
        self.sx = X.sum(axis=0)  # (F,)
        self.sxx = X.T @ X  # (F, F)
        u = (X * X).sum(axis=1)
        self.su = u.sum()
        self.sxu = X.T @ u  # (F,)


class _Sample:
    """One bootstrap sample with class moments and raw arrays."""

    def __init__(self, X: np.ndarray, y: np.ndarray):
        self.X = X
        self.y = y
        pos = y == 1
        self.pos = _SampleMoments(X[pos])
        self.neg = _SampleMoments(X[~pos])

    def cmax(self, Xq: np.ndarray) -> np.ndarray:
        """Largest squared record distance per test point, (B,)."""
        vq = (Xq * Xq).sum(axis=1)
        u = (self.X * self.X).sum(axis=1)
        C = u[None, :] - 2.0 * (Xq @ self.X.T) + vq[:, None]
        return np.maximum(C.max(axis=1), 0.0)


class _UpdateContext:
    """Weight reductions for one (sample, theta_bar, test batch) triple.

    ``s1``/``s0`` are the class sums of the expected weights (scaled by the
    product of squared hidden rates); ``t1``/``t0`` the feature-weighted
    analogues; ``g1``/``g0`` the class sums of (Cmax - C_i).
    """

    __slots__ = ("s1", "s0", "t1", "t0", "g1", "g0", "cnt1", "cnt0", "cmax")

    def __init__(self, sample: _Sample, cmax: np.ndarray, Xq: np.ndarray, bar: _Batch):
        lam1 = bar.hidden_pos
        lam0 = bar.hidden_neg
        p1 = bar.p1
        p0 = 1.0 - p1
        c1 = 2 * p1 / lam0**2 + 2 * p0 / (lam0 * lam1)
        c0 = 2 * p0 / lam1**2 + 2 * p1 / (lam0 * lam1)
        vq = (Xq * Xq).sum(axis=1)
        self.cmax = cmax
        self.cnt1 = sample.pos.count
        self.cnt0 = sample.neg.count
        self.g1 = self._slack_sum(sample.pos, cmax, Xq, vq)
        self.g0 = self._slack_sum(sample.neg, cmax, Xq, vq)
        self.s1 = self.g1 + self.cnt1 * c1
        self.s0 = self.g0 + self.cnt0 * c0
        self.t1 = self._slack_feature_sum(sample.pos, cmax, Xq, vq) + c1[:, None] * sample.pos.sx[None, :]
        self.t0 = self._slack_feature_sum(sample.neg, cmax, Xq, vq) + c0[:, None] * sample.neg.sx[None, :]

    @staticmethod
    def _slack_sum(m: _SampleMoments, cmax, Xq, vq):
        # sum over class records of (Cmax - C_i) >= 0
        sc = m.su - 2.0 * (Xq @ m.sx) + m.count * vq
        return np.maximum(m.count * cmax - sc, 0.0)

    @staticmethod
    def _slack_feature_sum(m: _SampleMoments, cmax, Xq, vq):
        # sum over class records of x_if * (Cmax - C_i), per feature
        sxc = m.sxu[None, :] - 2.0 * (Xq @ m.sxx) + vq[:, None] * m.sx[None, :]
        return np.maximum(cmax[:, None] * m.sx[None, :] - sxc, 0.0)


def _em_update_batch(
    ctx: _UpdateContext, bar: _Batch, clamp
) -> tuple[_Batch, FitDiagnostics]:
    """One closed-form maximization step for the whole test batch."""
    diag = FitDiagnostics()
    lam1 = bar.hidden_pos
    lam0 = bar.hidden_neg
    p1 = bar.p1
    p0 = 1.0 - p1

    total = ctx.s1 + ctx.s0
    new_p1 = np.where(total > 0, ctx.s1 / np.maximum(total, 1e-300), 0.5)
    rate_pos = _class_rate(ctx.s1[:, None], ctx.t1, clamp)
    rate_neg = _class_rate(ctx.s0[:, None], ctx.t0, clamp)

    d1 = (2 + 2 * p1) / lam0**2 - 4 * p1 / (lam0 * lam1) + (2 * p1 - 4) / lam1**2
    d0 = (2 + 2 * p0) / lam1**2 - 4 * p0 / (lam0 * lam1) + (2 * p0 - 4) / lam0**2
    den1 = ctx.g1 + ctx.cnt1 * d1
    den0 = ctx.g0 + ctx.cnt0 * d0
    ok1 = (den1 > 0) & (ctx.cnt1 > 0) & (ctx.s1 > 0)
    ok0 = (den0 > 0) & (ctx.cnt0 > 0) & (ctx.s0 > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        hid1 = np.where(ok1, lam1 * ctx.s1 / np.where(ok1, den1, 1.0), lam1)
        hid0 = np.where(ok0, lam0 * ctx.s0 / np.where(ok0, den0, 1.0), lam0)
    held = int((~ok1 & (ctx.cnt1 > 0)).sum() + (~ok0 & (ctx.cnt0 > 0)).sum())
    diag.hidden_rate_held += held
    return (
        _Batch(
            p1=new_p1,
            rate_pos=rate_pos,
            rate_neg=rate_neg,
            hidden_pos=_clamp_rate(hid1, clamp),
            hidden_neg=_clamp_rate(hid0, clamp),
        ),
        diag,
    )


def _loglik_batch(ctx: _UpdateContext, theta: _Batch, bar: _Batch) -> np.ndarray:
    """Expected weighted log-likelihood of the sample at ``theta`` given ``bar``."""
    lam1 = bar.hidden_pos
    lam0 = bar.hidden_neg
    p1 = bar.p1
    p0 = 1.0 - p1
    out = np.zeros_like(ctx.s1)
    # observed-feature terms
    out += (np.log(theta.rate_pos) * ctx.s1[:, None] - theta.rate_pos * ctx.t1).sum(axis=1)
    out += (np.log(theta.rate_neg) * ctx.s0[:, None] - theta.rate_neg * ctx.t0).sum(axis=1)
    # prior terms; a class absent from the sample contributes nothing
    with np.errstate(divide="ignore", invalid="ignore"):
        out += np.where(ctx.s1 > 0, np.log(np.maximum(theta.p1, 1e-300)) * ctx.s1, 0.0)
        out += np.where(ctx.s0 > 0, np.log(np.maximum(1.0 - theta.p1, 1e-300)) * ctx.s0, 0.0)
    # hidden-feature terms
    kshift = 2.0 / lam0**2 + 2.0 / lam1**2
    skc1 = ctx.g1 + ctx.cnt1 * kshift
    skc0 = ctx.g0 + ctx.cnt0 * kshift
    e1 = 2 * p1 / (lam1 * lam0**2) - 4 * p1 / (lam0 * lam1**2) - (6 - 2 * p1) / lam1**3
    e0 = 2 * p0 / (lam0 * lam1**2) - 4 * p0 / (lam1 * lam0**2) - (6 - 2 * p0) / lam0**3
    coef1 = skc1 / lam1 + ctx.cnt1 * e1
    coef0 = skc0 / lam0 + ctx.cnt0 * e0
    out += np.log(theta.hidden_pos) * ctx.s1 - theta.hidden_pos * coef1
    out += np.log(theta.hidden_neg) * ctx.s0 - theta.hidden_neg * coef0
    return out


def em_update(
    X: np.ndarray,
    y: np.ndarray,
    test: np.ndarray,
    theta_bar: ModelParams,
    clamp=(RATE_FLOOR, RATE_CEILING),
) -> tuple[ModelParams, FitDiagnostics]:
    """Closed-form update of every parameter for one training sample."""
    X = np.asarray(X, dtype=float)
    sample = _Sample(X, np.asarray(y))
    Xq = np.asarray(test, dtype=float)[None, :]
    bar = _Batch.tiled(theta_bar, 1)
    ctx = _UpdateContext(sample, sample.cmax(Xq), Xq, bar)
    hat, diag = _em_update_batch(ctx, bar, clamp)
    return hat.row(0), diag


def expected_weighted_loglik(
    X: np.ndarray,
    y: np.ndarray,
    test: np.ndarray,
    theta: ModelParams,
    theta_bar: ModelParams,
) -> float:
    """Expected weighted log-likelihood of the sample at ``theta`` given
    the weighting state ``theta_bar`` and the test point."""
    X = np.asarray(X, dtype=float)
    sample = _Sample(X, np.asarray(y))
    Xq = np.asarray(test, dtype=float)[None, :]
    bar = _Batch.tiled(theta_bar, 1)
    ctx = _UpdateContext(sample, sample.cmax(Xq), Xq, bar)
    return float(_loglik_batch(ctx, _Batch.tiled(theta, 1), bar)[0])


def fit_lemnb_batch(
    X: np.ndarray,
    y: np.ndarray,
    tests: np.ndarray,
    n_bootstrap: int = 5,
    n_trials: int = 20,
    rng: np.random.Generator | None = None,
    clamp=(RATE_FLOOR, RATE_CEILING),
) -> tuple[list[ModelParams], FitDiagnostics]:
    """Fit locally-weighted parameters for every row of ``tests``.

    Draw order from ``rng``: first the bootstrap index matrix
    (n_bootstrap x n), then one noise term per (case, trial) with cases
    outermost.  All test points share the samples and noise draws, so a batch
    of one reproduces the single-point fit exactly.
    """
    if n_bootstrap < 2:
        raise ValueError("need at least two bootstrap samples")
    if n_trials < 1:
        raise ValueError("need at least one trial")
    if rng is None:
        rng = np.random.default_rng()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    Xq = np.atleast_2d(np.asarray(tests, dtype=float))
    n = len(X)
    B = len(Xq)
    diag = FitDiagnostics()

    idx = rng.integers(0, n, size=(n_bootstrap, n))
    samples = [_Sample(X[row], y[row]) for row in idx]
    cmaxes = [s.cmax(Xq) for s in samples]
    base = init_observed(samples[0].X, samples[0].y, clamp)

    case_params: list[_Batch] = []
    case_scores: list[np.ndarray] = []
    for case in (1, 2, 3):
        acc: _Batch | None = None
        score = np.zeros(B)
        for _ in range(n_trials):
            eps = draw_epsilon(case, rng)
            bar = _Batch.tiled(init_hidden(base, case, eps, clamp), B)
            hat = bar
            e_last = np.zeros(B)
            for j in range(1, n_bootstrap):
                ctx = _UpdateContext(samples[j], cmaxes[j], Xq, bar)
                if (ctx.cnt1 > 0 and np.any(ctx.s1 <= 0)) or (
                    ctx.cnt0 > 0 and np.any(ctx.s0 <= 0)
                ):
                    diag.nonpositive_weight += 1
                hat, step_diag = _em_update_batch(ctx, bar, clamp)
                diag.merge(step_diag)
                e_last = _loglik_batch(ctx, hat, bar)
                bar = hat
            score += e_last
            if acc is None:
                acc = _Batch(
                    hat.p1.copy(), hat.rate_pos.copy(), hat.rate_neg.copy(),
                    hat.hidden_pos.copy(), hat.hidden_neg.copy(),
                )
            else:
                acc.p1 += hat.p1
                acc.rate_pos += hat.rate_pos
                acc.rate_neg += hat.rate_neg
                acc.hidden_pos += hat.hidden_pos
                acc.hidden_neg += hat.hidden_neg
        case_params.append(
            _Batch(
                acc.p1 / n_trials,
                acc.rate_pos / n_trials,
                acc.rate_neg / n_trials,
                acc.hidden_pos / n_trials,
                acc.hidden_neg / n_trials,
            )
        )
        case_scores.append(score / n_trials)

    scores = np.stack(case_scores)  # (3, B)
    winner = scores.argmax(axis=0)
    out = []
    for b in range(B):
        out.append(case_params[winner[b]].row(b))
    return out, diag


def fit_lemnb(
    X: np.ndarray,
    y: np.ndarray,
    test: np.ndarray,
    n_bootstrap: int = 5,
    n_trials: int = 20,
    rng: np.random.Generator | None = None,
    clamp=(RATE_FLOOR, RATE_CEILING),
) -> ModelParams:
    """Locally-weighted parameter estimate for a single test point."""
    params, _ = fit_lemnb_batch(
        X, y, np.asarray(test, dtype=float)[None, :], n_bootstrap, n_trials, rng, clamp
    )
    return params[0]
