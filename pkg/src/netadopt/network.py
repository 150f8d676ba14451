"""Evolving social network: entities, weighted ties, characteristics, adoptions.

A :class:`Dataset` is an immutable view of three event files (communications,
profiles, adoptions) from which per-week :class:`NetworkSnapshot` objects are
materialized.  Time is discretized to positive integer weeks; tie strength at
week ``t`` is the total communication intensity through ``t`` divided by ``t``
(average weekly intensity over elapsed weeks).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

NOMINAL = "nominal"
REAL = "real"
INTEGER = "integer"
_ATTR_KINDS = (NOMINAL, REAL, INTEGER)


class IngestError(ValueError):
    """Malformed input row; message carries file name and line number."""


class ValidationError(ValueError):
    """Structurally valid input that violates a dataset invariant."""


@dataclass(frozen=True)
class AttributeSchema:
    """Shared attribute layout for all entity characteristic vectors."""

    names: tuple[str, ...]
    kinds: tuple[str, ...]

    def __post_init__(self):
        if len(self.names) != len(self.kinds):
            raise ValidationError("schema names and kinds differ in length")
        for kind in self.kinds:
            if kind not in _ATTR_KINDS:
                raise ValidationError(f"unknown attribute kind {kind!r}")

    @property
    def n_attributes(self) -> int:
        return len(self.names)

    @property
    def numeric_columns(self) -> list[int]:
        return [k for k, kind in enumerate(self.kinds) if kind != NOMINAL]

    @property
    def nominal_columns(self) -> list[int]:
        return [k for k, kind in enumerate(self.kinds) if kind == NOMINAL]


def load_schema(path: str | Path) -> AttributeSchema:
    with open(path) as fh:
        raw = json.load(fh)
    attrs = raw.get("attributes")
    if not isinstance(attrs, list) or not attrs:
        raise ValidationError(f"{path}: schema must list at least one attribute")
    return AttributeSchema(
        names=tuple(a["name"] for a in attrs),
        kinds=tuple(a["type"] for a in attrs),
    )


@dataclass(frozen=True)
class Characteristics:
    """Encoded characteristic vectors of all entities at one week.

    Numeric attributes are float columns with per-attribute (min, max) ranges
    observed across entities at this week; nominal attributes are integer
    codes from a dataset-wide vocabulary.
    """

    schema: AttributeSchema
    numeric: np.ndarray  # (n, n_numeric) float
    nominal: np.ndarray  # (n, n_nominal) int
    numeric_ranges: np.ndarray  # (n_numeric, 2) min/max at this week


@dataclass(frozen=True)
class NetworkSnapshot:
    """The social network as of the end of one week.

    ``adjacency`` holds tie existence (a tie exists once any communication has
    occurred by this week); ``strengths`` holds average weekly intensities.
    Adopters are entities whose adoption week is <= this week.
    """

    week: int
    directed: bool
    n_entities: int
    adjacency: sp.csr_matrix  # bool; symmetric when nondirectional
    strengths: sp.csr_matrix  # float
    characteristics: Characteristics
    adopters: np.ndarray  # sorted entity indices
    nonadopters: np.ndarray

    def strength(self, i: int, j: int) -> float:
        return float(self.strengths[i, j])

    def has_tie(self, i: int, j: int) -> bool:
        return bool(self.adjacency[i, j])

    def neighbors(self, i: int) -> np.ndarray:
        """Indices tied to ``i`` in either direction."""
        out = self.adjacency.indices[
            self.adjacency.indptr[i] : self.adjacency.indptr[i + 1]
        ]
        if not self.directed:
            return out
        inc = self.adjacency.T.tocsr()
        into = inc.indices[inc.indptr[i] : inc.indptr[i + 1]]
        return np.unique(np.concatenate([out, into]))


class Dataset:
    """Immutable event store from which any weekly snapshot is derived.

    Built by :func:`ingest_events`; snapshots are cached per week and may be
    materialized concurrently.
    """

    def __init__(
        self,
        entity_ids: np.ndarray,
        schema: AttributeSchema,
        comm_src: np.ndarray,
        comm_dst: np.ndarray,
        comm_week: np.ndarray,
        comm_intensity: np.ndarray,
        profile_entity: np.ndarray,
        profile_week: np.ndarray,
        profile_numeric: np.ndarray,
        profile_nominal: np.ndarray,
        nominal_vocabs: list[dict[str, int]],
        adoption_item: int,
        adoption_entity: np.ndarray,
        adoption_week: np.ndarray,
        horizon: int,
        directed: bool,
        actions: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None,
    ):
        self.entity_ids = entity_ids
        self.schema = schema
        self.index_of = {int(e): k for k, e in enumerate(entity_ids)}
        self._comm = (comm_src, comm_dst, comm_week, comm_intensity)
        self._profile = (profile_entity, profile_week, profile_numeric, profile_nominal)
        self.nominal_vocabs = nominal_vocabs
        self.adoption_item = adoption_item
        self.adoption_entity = adoption_entity
        self.adoption_week = adoption_week
        self.horizon = horizon
        self.directed = directed
        self.actions = actions  # (entity_idx, item_id, week) arrays, multi-item
        self._snapshots: dict[int, NetworkSnapshot] = {}

    def __getstate__(self):
        state = self.__dict__.copy()
        state["_snapshots"] = {}
        state.pop("_first_contact", None)
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)

    @property
    def n_entities(self) -> int:
        return len(self.entity_ids)

    def adopters_by(self, t: int) -> np.ndarray:
        """Sorted indices of entities with adoption week <= t."""
        return np.sort(self.adoption_entity[self.adoption_week <= t])

    def adoption_week_of(self) -> np.ndarray:
        """Adoption week per entity index; 0 where the entity never adopts."""
        weeks = np.zeros(self.n_entities, dtype=np.int64)
        weeks[self.adoption_entity] = self.adoption_week
        return weeks

    def snapshot(self, t: int) -> NetworkSnapshot:
        """Materialize the network as of the end of week ``t`` (0 <= t <= horizon).

        ``t = 0`` is the conceptual start: no ties, no adopters; characteristics
        fall back to each entity's earliest profile row.
        """
        if not 0 <= t <= self.horizon:
            raise ValidationError(f"week {t} outside [0, {self.horizon}]")
        snap = self._snapshots.get(t)
        if snap is None:
            snap = self._build_snapshot(t)
            self._snapshots[t] = snap
        return snap

    def _build_snapshot(self, t: int) -> NetworkSnapshot:
        n = self.n_entities
        src, dst, week, intensity = self._comm
        mask = week <= t
        if t > 0 and mask.any():
            strengths = sp.coo_matrix(
                (intensity[mask] / t, (src[mask], dst[mask])), shape=(n, n)
            ).tocsr()
            adjacency = strengths.copy()
            adjacency.data = np.ones_like(adjacency.data, dtype=bool)
        else:
            strengths = sp.csr_matrix((n, n), dtype=float)
            adjacency = sp.csr_matrix((n, n), dtype=bool)
        adopters = self.adopters_by(t) if t > 0 else np.empty(0, dtype=np.int64)
        nonadopters = np.setdiff1d(np.arange(n), adopters, assume_unique=False)
        return NetworkSnapshot(
            week=t,
            directed=self.directed,
            n_entities=n,
            adjacency=adjacency,
            strengths=strengths,
            characteristics=self._characteristics_at(t),
            adopters=adopters,
            nonadopters=nonadopters,
        )

    def _characteristics_at(self, t: int) -> Characteristics:
        entity, week, numeric, nominal = self._profile
        n = self.n_entities
        num = np.empty((n, numeric.shape[1]))
        nom = np.empty((n, nominal.shape[1]), dtype=np.int64)
        # Rows are sorted by (entity, week); take the latest row <= t per
        # entity, falling back to the earliest row for weeks before it.
        starts = np.searchsorted(entity, np.arange(n), side="left")
        ends = np.searchsorted(entity, np.arange(n), side="right")
        for i in range(n):
            lo, hi = starts[i], ends[i]
            pos = lo + np.searchsorted(week[lo:hi], t, side="right") - 1
            pos = max(pos, lo)
            num[i] = numeric[pos]
            nom[i] = nominal[pos]
        if num.shape[1]:
            ranges = np.stack([num.min(axis=0), num.max(axis=0)], axis=1)
        else:
            ranges = np.empty((0, 2))
        return Characteristics(
            schema=self.schema, numeric=num, nominal=nom, numeric_ranges=ranges
        )

    def truncate(self, t: int) -> "Dataset":
        """A new dataset containing only events with timestamp <= t."""
        if not 1 <= t <= self.horizon:
            raise ValidationError(f"truncation week {t} outside [1, {self.horizon}]")
        src, dst, week, intensity = self._comm
        cmask = week <= t
        entity, pweek, numeric, nominal = self._profile
        pmask = pweek <= t
        amask = self.adoption_week <= t
        actions = None
        if self.actions is not None:
            ent, item, aweek = self.actions
            keep = aweek <= t
            actions = (ent[keep], item[keep], aweek[keep])
        return Dataset(
            entity_ids=self.entity_ids,
            schema=self.schema,
            comm_src=src[cmask],
            comm_dst=dst[cmask],
            comm_week=week[cmask],
            comm_intensity=intensity[cmask],
            profile_entity=entity[pmask],
            profile_week=pweek[pmask],
            profile_numeric=numeric[pmask],
            profile_nominal=nominal[pmask],
            nominal_vocabs=self.nominal_vocabs,
            adoption_item=self.adoption_item,
            adoption_entity=self.adoption_entity[amask],
            adoption_week=self.adoption_week[amask],
            horizon=t,
            directed=self.directed,
            actions=actions,
        )


def _read_rows(path: str | Path, expected_header: list[str] | None = None):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            return [], None
        if expected_header is not None and header[: len(expected_header)] != expected_header:
            raise IngestError(
                f"{path}:1: expected header {','.join(expected_header)}, got {','.join(header)}"
            )
        return [(lineno, row) for lineno, row in enumerate(reader, start=2)], header


def _parse_int(path, lineno, token, name, minimum=0):
    try:
        value = int(token)
    except ValueError:
        raise IngestError(f"{path}:{lineno}: {name} {token!r} is not an integer") from None
    if value < minimum:
        raise IngestError(f"{path}:{lineno}: {name} {value} below minimum {minimum}")
    return value


def _parse_float(path, lineno, token, name, minimum=None):
    try:
        value = float(token)
    except ValueError:
        raise IngestError(f"{path}:{lineno}: {name} {token!r} is not a number") from None
    if not np.isfinite(value):
        raise IngestError(f"{path}:{lineno}: {name} {token!r} is not finite")
    if minimum is not None and value < minimum:
        raise IngestError(f"{path}:{lineno}: {name} {value} below minimum {minimum}")
    return value


def ingest_events(
    communications_file: str | Path,
    profiles_file: str | Path,
    adoption_file: str | Path,
    schema_file: str | Path | None = None,
    actions_file: str | Path | None = None,
    directed: bool = False,
    horizon: int | None = None,
) -> Dataset:
    """Parse the three event files (plus optional multi-item action log).

    Entities are defined by the profiles file.  Nondirectional communications
    list each pair once and are mirrored internally.  ``horizon`` defaults to
    the latest week observed in any file.
    """
    if schema_file is None:
        schema_file = str(profiles_file) + ".schema.json"
    schema = load_schema(schema_file)

    prof_rows, header = _read_rows(
        profiles_file, ["entity_id", "week", *schema.names]
    )
    if header is None:
        raise IngestError(f"{profiles_file}:1: empty profiles file")
    num_cols = schema.numeric_columns
    nom_cols = schema.nominal_columns
    vocabs: list[dict[str, int]] = [dict() for _ in nom_cols]
    p_entity, p_week, p_num, p_nom = [], [], [], []
    for lineno, row in prof_rows:
        if len(row) != 2 + schema.n_attributes:
            raise IngestError(
                f"{profiles_file}:{lineno}: expected {2 + schema.n_attributes} fields, got {len(row)}"
            )
        ent = _parse_int(profiles_file, lineno, row[0], "entity_id")
        week = _parse_int(profiles_file, lineno, row[1], "week")
        values = row[2:]
        numeric = []
        for k in num_cols:
            tok = values[k].strip()
            if tok == "":
                raise IngestError(
                    f"{profiles_file}:{lineno}: missing value for numeric attribute {schema.names[k]!r}"
                )
            if schema.kinds[k] == INTEGER:
                try:
                    numeric.append(float(int(tok)))
                except ValueError:
                    raise IngestError(
                        f"{profiles_file}:{lineno}: {schema.names[k]} {tok!r} is not an integer"
                    ) from None
            else:
                numeric.append(_parse_float(profiles_file, lineno, tok, schema.names[k]))
        nominal = []
        for vocab, k in zip(vocabs, nom_cols):
            tok = values[k].strip()
            if tok == "":
                raise IngestError(
                    f"{profiles_file}:{lineno}: missing value for attribute {schema.names[k]!r}"
                )
            nominal.append(vocab.setdefault(tok, len(vocab)))
        p_entity.append(ent)
        p_week.append(week)
        p_num.append(numeric)
        p_nom.append(nominal)
    if not p_entity:
        raise ValidationError(f"{profiles_file}: no profile rows")

    entity_ids = np.unique(np.asarray(p_entity, dtype=np.int64))
    index_of = {int(e): k for k, e in enumerate(entity_ids)}
    profile_entity = np.array([index_of[e] for e in p_entity], dtype=np.int64)
    profile_week = np.asarray(p_week, dtype=np.int64)
    profile_numeric = np.asarray(p_num, dtype=float).reshape(len(p_entity), len(num_cols))
    profile_nominal = np.asarray(p_nom, dtype=np.int64).reshape(len(p_entity), len(nom_cols))
    order = np.lexsort((profile_week, profile_entity))
    profile_entity = profile_entity[order]
    profile_week = profile_week[order]
    profile_numeric = profile_numeric[order]
    profile_nominal = profile_nominal[order]

    def lookup(path, lineno, raw_id):
        ent = _parse_int(path, lineno, raw_id, "entity_id")
        idx = index_of.get(ent)
        if idx is None:
            raise ValidationError(f"{path}:{lineno}: unknown entity {ent}")
        return idx

    comm_rows, _ = _read_rows(
        communications_file, ["src_id", "dst_id", "week", "intensity"]
    )
    c_src, c_dst, c_week, c_int = [], [], [], []
    for lineno, row in comm_rows:
        if len(row) != 4:
            raise IngestError(
                f"{communications_file}:{lineno}: expected 4 fields, got {len(row)}"
            )
        src = lookup(communications_file, lineno, row[0])
        dst = lookup(communications_file, lineno, row[1])
        week = _parse_int(communications_file, lineno, row[2], "week", minimum=1)
        intensity = _parse_float(communications_file, lineno, row[3], "intensity", minimum=0.0)
        if src == dst:
            raise ValidationError(f"{communications_file}:{lineno}: self tie on entity {row[0]}")
        c_src.append(src)
        c_dst.append(dst)
        c_week.append(week)
        c_int.append(intensity)
        if not directed:
            c_src.append(dst)
            c_dst.append(src)
            c_week.append(week)
            c_int.append(intensity)

    adopt_rows, _ = _read_rows(adoption_file, ["entity_id", "item_id", "week"])
    a_entity, a_week = [], []
    item_id = None
    seen = set()
    for lineno, row in adopt_rows:
        if len(row) != 3:
            raise IngestError(f"{adoption_file}:{lineno}: expected 3 fields, got {len(row)}")
        idx = lookup(adoption_file, lineno, row[0])
        item = _parse_int(adoption_file, lineno, row[1], "item_id")
        week = _parse_int(adoption_file, lineno, row[2], "week", minimum=1)
        if item_id is None:
            item_id = item
        elif item != item_id:
            raise ValidationError(
                f"{adoption_file}:{lineno}: multiple items in focal adoption log"
            )
        if idx in seen:
            raise ValidationError(
                f"{adoption_file}:{lineno}: duplicate adoption for entity {row[0]}"
            )
        seen.add(idx)
        a_entity.append(idx)
        a_week.append(week)

    actions = None
    if actions_file is not None:
        act_rows, _ = _read_rows(actions_file, ["entity_id", "item_id", "week"])
        act_seen = set()
        x_ent, x_item, x_week = [], [], []
        for lineno, row in act_rows:
            if len(row) != 3:
                raise IngestError(f"{actions_file}:{lineno}: expected 3 fields, got {len(row)}")
            idx = lookup(actions_file, lineno, row[0])
            item = _parse_int(actions_file, lineno, row[1], "item_id")
            week = _parse_int(actions_file, lineno, row[2], "week", minimum=1)
            if (idx, item) in act_seen:
                raise ValidationError(
                    f"{actions_file}:{lineno}: duplicate adoption of item {item} by entity {row[0]}"
                )
            act_seen.add((idx, item))
            x_ent.append(idx)
            x_item.append(item)
            x_week.append(week)
        actions = (
            np.asarray(x_ent, dtype=np.int64),
            np.asarray(x_item, dtype=np.int64),
            np.asarray(x_week, dtype=np.int64),
        )

    observed = [1]
    observed.extend(c_week)
    observed.extend(a_week)
    observed.extend(int(w) for w in profile_week)
    if actions is not None and len(actions[2]):
        observed.append(int(actions[2].max()))
    derived_horizon = max(observed)
    if horizon is None:
        horizon = derived_horizon
    elif horizon < derived_horizon:
        raise ValidationError(
            f"horizon {horizon} earlier than latest observed week {derived_horizon}"
        )

    for week in a_week:
        if week > horizon:
            raise ValidationError(f"adoption week {week} beyond horizon {horizon}")

    return Dataset(
        entity_ids=entity_ids,
        schema=schema,
        comm_src=np.asarray(c_src, dtype=np.int64),
        comm_dst=np.asarray(c_dst, dtype=np.int64),
        comm_week=np.asarray(c_week, dtype=np.int64),
        comm_intensity=np.asarray(c_int, dtype=float),
        profile_entity=profile_entity,
        profile_week=profile_week,
        profile_numeric=profile_numeric,
        profile_nominal=profile_nominal,
        nominal_vocabs=vocabs,
        adoption_item=item_id if item_id is not None else 0,
        adoption_entity=np.asarray(a_entity, dtype=np.int64),
        adoption_week=np.asarray(a_week, dtype=np.int64),
        horizon=horizon,
        directed=directed,
        actions=actions,
    )
