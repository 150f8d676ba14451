"""Training-set construction by replaying the observed adoption history.

Each adopter contributes one positive record holding the total powers it
received in the week before its adoption, summed over strictly earlier
adopters (same-week adopters are mutually excluded).  Each nonadopter
contributes one negative record with its totals in the week before the
reference week, summed over the same earlier-adopter set left by the replay.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import powers
from .network import Dataset, ValidationError


@dataclass(frozen=True)
class PowerRecord:
    """One labeled training row; entity and week kept for traceability."""

    entity: int
    as_of_week: int
    influence: float
    equivalence: float
    similarity: float
    adopted: int
    connectedness: float | None = None


@dataclass(frozen=True)
class TrainingSet:
    """Ordered power records plus array views for the learners."""

    records: tuple[PowerRecord, ...]
    entity_index: np.ndarray  # internal indices aligned with records
    with_connectedness: bool

    @property
    def n(self) -> int:
        return len(self.records)

    def features(self) -> np.ndarray:
        X = np.asarray(
            [[r.influence, r.equivalence, r.similarity] for r in self.records],
            dtype=float,
        ).reshape(len(self.records), 3)
        if self.with_connectedness:
            z = np.asarray([r.connectedness for r in self.records], dtype=float)
            X = np.column_stack([X, z])
        return X

    def labels(self) -> np.ndarray:
        return np.asarray([r.adopted for r in self.records], dtype=np.int64)


def construct_train(
    dataset: Dataset,
    T: int,
    with_connectedness: bool = False,
    scheme: str = powers.MIXED_MEAN,
    bounds: powers.NormalizationBounds | None = None,
) -> TrainingSet:
    """Replay adoptions through week ``T`` and emit one record per entity.

    Normalization bounds default to the observed maxima at week ``T`` and are
    reused for every historical week (values are clamped into them).
    """
    if T < 1:
        raise ValidationError("reference week must be >= 1")
    if T > dataset.horizon:
        raise ValidationError(f"reference week {T} beyond horizon {dataset.horizon}")
    if bounds is None:
        bounds = powers.compute_bounds(dataset.snapshot(T), scheme)

    adopt_week = dataset.adoption_week
    adopt_idx = dataset.adoption_entity
    by_T = adopt_week <= T
    adopters = adopt_idx[by_T]
    weeks = adopt_week[by_T]
    order = np.lexsort((adopters, weeks))
    adopters = adopters[order]
    weeks = weeks[order]

    records: list[PowerRecord] = []
    indices: list[int] = []
    early: list[np.ndarray] = []
    n_early = 0

    def emit(members, week, early_idx, label):
        snap = dataset.snapshot(week)
        totals = powers.total_powers_block(snap, members, early_idx, bounds, scheme)
        if with_connectedness:
            z = powers.connectedness_block(snap, members, early_idx)
        for k, m in enumerate(members):
            records.append(
                PowerRecord(
                    entity=int(dataset.entity_ids[m]),
                    as_of_week=week,
                    influence=float(totals[k, 0]),
                    equivalence=float(totals[k, 1]),
                    similarity=float(totals[k, 2]),
                    adopted=label,
                    connectedness=float(z[k]) if with_connectedness else None,
                )
            )
            indices.append(int(m))

    pos = 0
    while pos < len(adopters):
        tau = weeks[pos]
        end = pos + int(np.searchsorted(weeks[pos:], tau, side="right"))
        clock_group = adopters[pos:end]
        early_idx = np.concatenate(early) if early else np.empty(0, dtype=np.int64)
        emit(clock_group, int(tau) - 1, early_idx, 1)
        early.append(clock_group)
        n_early += len(clock_group)
        pos = end

    # The replay leaves the final adoption cohort outside the earlier-adopter
    # set, so nonadopter records never sum over it.
    if early:
        early_final = np.concatenate(early[:-1]) if len(early) > 1 else np.empty(0, dtype=np.int64)
    else:
        early_final = np.empty(0, dtype=np.int64)
    nonadopters = np.setdiff1d(np.arange(dataset.n_entities), adopters)
    if len(nonadopters):
        emit(nonadopters, T - 1, early_final, 0)

    return TrainingSet(
        records=tuple(records),
        entity_index=np.asarray(indices, dtype=np.int64),
        with_connectedness=with_connectedness,
    )


def write_training_csv(train: TrainingSet, path: str | Path):
    """Dump records as CSV: entity,week,I,E,S[,Z],A."""
    header = ["entity", "week", "I", "E", "S"]
    if train.with_connectedness:
        header.append("Z")
    header.append("A")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for r in train.records:
            row = [r.entity, r.as_of_week, repr(r.influence), repr(r.equivalence), repr(r.similarity)]
            if train.with_connectedness:
                row.append(repr(r.connectedness))
            row.append(r.adopted)
            writer.writerow(row)
