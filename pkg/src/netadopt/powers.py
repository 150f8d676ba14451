"""Pairwise and total powers on entities: influence, equivalence, similarity.

Influence normalizes tie strength; equivalence normalizes the Euclidean
distance of structural equivalence (shared tie patterns); similarity
normalizes the attribute distance between characteristic vectors.  All three
are min-max normalized into [0, 1] against bounds observed at a reference
week; values from other weeks are clamped into the bounds before normalizing.

Structural distances are computed from degree and common-neighbor counts
rather than the defining sum over third parties; the two agree exactly (see
the property tests) and the counting form is O(deg) per pair.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .network import Characteristics, NetworkSnapshot

MIXED_MEAN = "mixed_mean"
EUCLIDEAN = "euclidean"
DISTANCE_SCHEMES = (MIXED_MEAN, EUCLIDEAN)


@dataclass(frozen=True)
class NormalizationBounds:
    """Min-max normalization bounds for tie strength (x), structural
    distance (y), and attribute distance (d).  Mins are 0 by convention;
    maxes are the observed maxima by the reference week."""

    x_max: float
    y_max: float
    d_max: float
    x_min: float = 0.0
    y_min: float = 0.0
    d_min: float = 0.0

    def __post_init__(self):
        if self.x_max < self.x_min or self.y_max < self.y_min or self.d_max < self.d_min:
            raise ValueError("bounds must satisfy max >= min")


@dataclass(frozen=True)
class PairPowers:
    influence: float
    equivalence: float
    similarity: float


def _scale_up(values, vmax, vmin):
    """(v - min) / (max - min), clamped; 0 when the bounds are degenerate."""
    span = vmax - vmin
    if span <= 0:
        return np.zeros_like(np.asarray(values, dtype=float))
    return (np.clip(values, vmin, vmax) - vmin) / span


def _scale_down(values, vmax, vmin):
    """(max - v) / (max - min), clamped; 0 when the bounds are degenerate."""
    span = vmax - vmin
    if span <= 0:
        return np.zeros_like(np.asarray(values, dtype=float))
    return (vmax - np.clip(values, vmin, vmax)) / span


def influence_power(snapshot: NetworkSnapshot, i: int, j: int, bounds: NormalizationBounds) -> float:
    """Normalized strength of the tie from i to j."""
    return float(_scale_up(snapshot.strength(i, j), bounds.x_max, bounds.x_min))


def equivalence_power(y_ij: float, bounds: NormalizationBounds) -> float:
    """Normalized structural-equivalence closeness; 1 at zero distance."""
    return float(_scale_down(y_ij, bounds.y_max, bounds.y_min))


def similarity_power(d_ij: float, bounds: NormalizationBounds) -> float:
    """Normalized attribute closeness; 1 at zero distance."""
    return float(_scale_down(d_ij, bounds.d_max, bounds.d_min))


def structural_distance(snapshot: NetworkSnapshot, i: int, j: int) -> float:
    """Euclidean distance of structural equivalence between i and j."""
    if i == j:
        raise ValueError("structural distance is undefined for i == j")
    block = structural_distance_block(snapshot, np.array([i]), np.array([j]))
    return float(block[0, 0])


def structural_distance_block(
    snapshot: NetworkSnapshot, rows: np.ndarray, cols: np.ndarray
) -> np.ndarray:
    """Structural distances for all (rows x cols) pairs.

    Entries where the row and column index coincide are set to 0; callers
    compare distinct entities.
    """
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    adj = snapshot.adjacency.astype(np.int64)
    sub = adj[rows][:, cols].toarray()
    if snapshot.directed:
        adj_t = adj.T.tocsr()
        out_deg = np.asarray(adj.sum(axis=1)).ravel()
        in_deg = np.asarray(adj.sum(axis=0)).ravel()
        sub_t = adj_t[rows][:, cols].toarray()
        common_out = (adj[rows] @ adj[cols].T).toarray()
        common_in = (adj_t[rows] @ adj_t[cols].T).toarray()
        sq = (
            out_deg[rows][:, None] + in_deg[rows][:, None]
            + out_deg[cols][None, :] + in_deg[cols][None, :]
            - 2 * (sub + sub_t)
            - 2 * (common_out + common_in)
        )
    else:
        deg = np.asarray(adj.sum(axis=1)).ravel()
        common = (adj[rows] @ adj[cols].T).toarray()
        sq = deg[rows][:, None] + deg[cols][None, :] - 2 * sub - 2 * common
    sq[rows[:, None] == cols[None, :]] = 0
    return np.sqrt(np.maximum(sq, 0).astype(float))


def entity_distance_block(
    chars: Characteristics, rows: np.ndarray, cols: np.ndarray, scheme: str = MIXED_MEAN
) -> np.ndarray:
    """Attribute distances for all (rows x cols) pairs.

    Per-attribute distances are 0/1 mismatch for nominal attributes and
    range-normalized absolute difference for real/integer attributes;
    ``mixed_mean`` averages them, ``euclidean`` takes the root of the sum of
    squares.  An attribute whose observed range is degenerate contributes 0.
    """
    if scheme not in DISTANCE_SCHEMES:
        raise ValueError(f"unknown distance scheme {scheme!r}")
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    n_attrs = chars.schema.n_attributes
    acc = np.zeros((len(rows), len(cols)))
    square = scheme == EUCLIDEAN
    for f in range(chars.numeric.shape[1]):
        lo, hi = chars.numeric_ranges[f]
        span = hi - lo
        if span <= 0:
            continue
        diff = np.abs(chars.numeric[rows, f][:, None] - chars.numeric[cols, f][None, :]) / span
        acc += diff * diff if square else diff
    for f in range(chars.nominal.shape[1]):
        mismatch = chars.nominal[rows, f][:, None] != chars.nominal[cols, f][None, :]
        acc += mismatch  # 0/1 distances square to themselves
    if square:
        return np.sqrt(acc)
    return acc / n_attrs


def entity_distance(
    chars: Characteristics, i: int, j: int, scheme: str = MIXED_MEAN
) -> float:
    """Attribute distance between entities i and j under the given scheme."""
    return float(entity_distance_block(chars, np.array([i]), np.array([j]), scheme)[0, 0])


def pair_powers_block(
    snapshot: NetworkSnapshot,
    sources: np.ndarray,
    targets: np.ndarray,
    bounds: NormalizationBounds,
    scheme: str = MIXED_MEAN,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Influence/equivalence/similarity powers of each source on each target.

    Returns three (len(sources), len(targets)) arrays.
    """
    sources = np.asarray(sources, dtype=np.int64)
    targets = np.asarray(targets, dtype=np.int64)
    if len(sources) == 0 or len(targets) == 0:
        shape = (len(sources), len(targets))
        z = np.zeros(shape)
        return z, z.copy(), z.copy()
    x = snapshot.strengths[sources][:, targets].toarray()
    influence = _scale_up(x, bounds.x_max, bounds.x_min)
    y = structural_distance_block(snapshot, sources, targets)
    equivalence = _scale_down(y, bounds.y_max, bounds.y_min)
    d = entity_distance_block(snapshot.characteristics, sources, targets, scheme)
    similarity = _scale_down(d, bounds.d_max, bounds.d_min)
    return influence, equivalence, similarity


def pair_powers(
    snapshot: NetworkSnapshot,
    i: int,
    j: int,
    bounds: NormalizationBounds,
    scheme: str = MIXED_MEAN,
) -> PairPowers:
    inf, eq, sim = pair_powers_block(
        snapshot, np.array([i]), np.array([j]), bounds, scheme
    )
    return PairPowers(float(inf[0, 0]), float(eq[0, 0]), float(sim[0, 0]))


def total_powers_block(
    snapshot: NetworkSnapshot,
    targets: np.ndarray,
    adopters: np.ndarray,
    bounds: NormalizationBounds,
    scheme: str = MIXED_MEAN,
) -> np.ndarray:
    """Componentwise sums of pair powers from ``adopters`` onto each target.

    Returns a (len(targets), 3) array of (I, E, S) totals.
    """
    targets = np.asarray(targets, dtype=np.int64)
    adopters = np.asarray(adopters, dtype=np.int64)
    if len(adopters) == 0 or len(targets) == 0:
        return np.zeros((len(targets), 3))
    influence, equivalence, similarity = pair_powers_block(
        snapshot, adopters, targets, bounds, scheme
    )
    return np.stack(
        [influence.sum(axis=0), equivalence.sum(axis=0), similarity.sum(axis=0)], axis=1
    )


def total_powers(
    snapshot: NetworkSnapshot,
    target: int,
    adopters: np.ndarray,
    bounds: NormalizationBounds,
    scheme: str = MIXED_MEAN,
) -> tuple[float, float, float]:
    """Total influence, equivalence, and similarity power on one target."""
    adopters = np.asarray(adopters, dtype=np.int64)
    if target in set(adopters.tolist()):
        raise ValueError("target must not be in the adopter set")
    block = total_powers_block(snapshot, np.array([target]), adopters, bounds, scheme)
    return float(block[0, 0]), float(block[0, 1]), float(block[0, 2])


def _undirected_bool(snapshot: NetworkSnapshot) -> sp.csr_matrix:
    adj = snapshot.adjacency
    if snapshot.directed:
        adj = (adj + adj.T).astype(bool)
    return adj.tocsr()


def connectedness(snapshot: NetworkSnapshot, v: int, adopter_neighbors: np.ndarray) -> float:
    """Fraction of tied pairs among v's adopter neighbors; 0 when fewer than 2."""
    f = np.asarray(adopter_neighbors, dtype=np.int64)
    size = len(f)
    if size < 2:
        return 0.0
    adj = _undirected_bool(snapshot)
    sub = adj[f][:, f]
    edges = sub.nnz // 2
    return edges / (size * (size - 1) / 2)


def connectedness_block(
    snapshot: NetworkSnapshot, targets: np.ndarray, adopters: np.ndarray
) -> np.ndarray:
    """Connectedness of each target's adopter neighborhood at this week."""
    targets = np.asarray(targets, dtype=np.int64)
    adopters = np.asarray(adopters, dtype=np.int64)
    out = np.zeros(len(targets))
    if len(adopters) < 2 or len(targets) == 0:
        return out
    adj = _undirected_bool(snapshot)
    mask = np.zeros(snapshot.n_entities, dtype=bool)
    mask[adopters] = True
    keep = sp.diags(mask.astype(np.int8))
    rows = (adj[targets].astype(np.int8) @ keep).tocsr()  # adopter neighbors of each target
    sizes = np.asarray(rows.sum(axis=1)).ravel()
    # e(F) = f.B.f / 2 for the 0/1 neighbor-indicator row f
    inner = (rows @ adj.astype(np.int8)).multiply(rows)
    edges = np.asarray(inner.sum(axis=1)).ravel() / 2
    valid = sizes >= 2
    out[valid] = edges[valid] / (sizes[valid] * (sizes[valid] - 1) / 2)
    return out


def compute_bounds(
    snapshot: NetworkSnapshot, scheme: str = MIXED_MEAN, chunk: int = 512
) -> NormalizationBounds:
    """Observed maxima of tie strength, structural distance, and attribute
    distance over all entity pairs at this snapshot's week (mins fixed at 0)."""
    n = snapshot.n_entities
    x_max = float(snapshot.strengths.max()) if snapshot.strengths.nnz else 0.0
    y_max = 0.0
    d_max = 0.0
    all_idx = np.arange(n)
    for start in range(0, n, chunk):
        rows = all_idx[start : start + chunk]
        y = structural_distance_block(snapshot, rows, all_idx)
        d = entity_distance_block(snapshot.characteristics, rows, all_idx, scheme)
        if y.size:
            y_max = max(y_max, float(y.max()))
            d_max = max(d_max, float(d.max()))
    return NormalizationBounds(x_max=x_max, y_max=y_max, d_max=d_max)
