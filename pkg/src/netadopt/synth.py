"""Synthetic social-network diffusion generator.

Produces the four event files the ingest layer reads (communications,
profiles, focal adoptions, side-item actions) plus a truth record.  The
focal diffusion mixes four configurable forces: each week a nonadopter's
hazard is the base hazard times a weighted sum of its normalized total
influence/equivalence/similarity powers from current adopters and a
per-entity latent confounding trait drawn once at the start (optionally a
connectedness term as a fifth force).  Side items diffuse by an independent
cascade so that pairwise influence probabilities are learnable from them.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import networkx as nx
import numpy as np

from . import powers
from .network import AttributeSchema, Dataset

SMALL_WORLD = "small_world"
PREFERENTIAL = "preferential_attachment"
EXPONENTIAL = "exponential"
LOGNORMAL = "lognormal"


@dataclass(frozen=True)
class SynthConfig:
    n_entities: int = 2000
    graph_model: str = SMALL_WORLD
    mean_degree: int = 6
    horizon: int = 30
    weight_influence: float = 0.25
    weight_equivalence: float = 0.15
    weight_similarity: float = 0.15
    weight_confounder: float = 0.45
    weight_connectedness: float = 0.0
    base_hazard: float = 0.012
    innovator_fraction: float = 0.005
    n_side_items: int = 6
    confounder_family: str = EXPONENTIAL
    distance_scheme: str = powers.MIXED_MEAN
    seed: int = 0

    def __post_init__(self):
        w = (
            self.weight_influence,
            self.weight_equivalence,
            self.weight_similarity,
            self.weight_confounder,
            self.weight_connectedness,
        )
        if any(x < 0 for x in w) or abs(sum(w) - 1.0) > 1e-9:
            raise ValueError("force weights must be nonnegative and sum to 1")
        if not 0 < self.base_hazard < 1:
            raise ValueError("base hazard must lie in (0, 1)")
        if not 0 < self.innovator_fraction < 1:
            raise ValueError("innovator fraction must lie in (0, 1)")
        if self.graph_model not in (SMALL_WORLD, PREFERENTIAL):
            raise ValueError(f"unknown graph model {self.graph_model!r}")
        if self.confounder_family not in (EXPONENTIAL, LOGNORMAL):
            raise ValueError(f"unknown confounder family {self.confounder_family!r}")
        if self.horizon < 1 or self.n_entities < 3:
            raise ValueError("need horizon >= 1 and at least 3 entities")


_SCHEMA = AttributeSchema(names=("segment", "region"), kinds=("nominal", "nominal"))
_N_SEGMENTS = 50
_N_REGIONS = 16
_EXCESS_CAP = 8.0  # excess pair power (in strong-adopter units) at which exposure maxes out
_TIE_CAP_MULT = 6.0  # adopter-tie strength multiple at which influence maxes out
_TRAIT_COMPRESSION = 3.0  # trait scale divisor (times the 90th percentile)


def _build_graph(cfg: SynthConfig, seed: int) -> np.ndarray:
    if cfg.graph_model == SMALL_WORLD:
        k = max(2, cfg.mean_degree - cfg.mean_degree % 2)
        g = nx.connected_watts_strogatz_graph(cfg.n_entities, k, 0.01, seed=seed)
    else:
        m = max(1, cfg.mean_degree // 2)
        g = nx.barabasi_albert_graph(cfg.n_entities, m, seed=seed)
    return np.array(sorted(g.edges()), dtype=np.int64)


def _quantile_scaled(values: np.ndarray) -> np.ndarray:
    """Scale into [0, 1] by the 90th percentile, preserving the shape of the
    distribution while keeping one outlier from flattening it."""
    if len(values) == 0 or values.max() <= 0:
        return np.zeros_like(values)
    scale = float(np.quantile(values, 0.9))
    if scale <= 0:
        scale = float(values.max())
    return np.clip(values / scale, 0.0, 1.0)


def generate(config: SynthConfig, out_dir: str | Path) -> dict[str, Path]:
    """Simulate the network and diffusion, then write the event files.

    Returns the paths of the written files.  Output is byte-identical for a
    given configuration.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    root = np.random.SeedSequence(config.seed)
    rng = np.random.default_rng(root)
    n = config.n_entities
    horizon = config.horizon

    edges = _build_graph(config, seed=int(rng.integers(2**31)))
    base_intensity = rng.lognormal(mean=1.0, sigma=0.6, size=len(edges))
    # (edge, week) intensities; every edge communicates every week
    jitter = rng.gamma(shape=4.0, scale=0.25, size=(len(edges), horizon))
    intensities = base_intensity[:, None] * jitter

    # Attributes bucket position in the generated graph (ring position for the
    # small-world model, attachment order for preferential attachment), so
    # entity similarity carries genuine homophily signal: nearby entities are
    # both tied and alike, while far pairs mismatch on every attribute and are
    # maximally dissimilar.
    position = np.arange(n) / n
    segment = np.minimum((position * _N_SEGMENTS).astype(np.int64), _N_SEGMENTS - 1)
    region = np.minimum((position * _N_REGIONS).astype(np.int64), _N_REGIONS - 1)

    if config.confounder_family == EXPONENTIAL:
        trait = rng.standard_exponential(n)
    else:
        trait = rng.lognormal(mean=0.0, sigma=1.0, size=n)
    # Compress the trait so the typical entity sits near zero and only the
    # upper tail carries real adoption pressure; the weekly rate then stays
    # low while wave-front entities can still reach sizable hazards.
    trait_hat = np.clip(trait / (_TRAIT_COMPRESSION * np.quantile(trait, 0.9)), 0.0, 1.0)

    dataset = _in_memory_dataset(config, edges, intensities, segment, region)

    adopted_week = np.zeros(n, dtype=np.int64)  # 0 = never
    n_innovators = max(1, round(config.innovator_fraction * n))
    # seed a contiguous block so the diffusion starts as a coherent local
    # wave rather than isolated sparks
    start = int(rng.integers(n))
    innovators = (start + np.arange(n_innovators)) % n
    adopted_week[innovators] = 1

    # the graph and profiles are static after week 1, so the structural and
    # attribute bounds are fixed; only the strength bound moves week to week
    snap1 = dataset.snapshot(1)
    y_max = _exact_y_max(snap1)
    d_max = _exact_d_max(snap1, config.distance_scheme)

    # Exposure forces ride on the excess of each total over the population
    # baseline (mean pair power times adopter count), so the hazard rewards
    # genuine proximity to adopters rather than the adopter count itself.
    floors, scales = _force_scales(config, snap1, y_max, d_max, rng)

    use_connectedness = config.weight_connectedness > 0
    for t in range(2, horizon + 1):
        nonadopters = np.flatnonzero(adopted_week == 0)
        if len(nonadopters) == 0:
            break
        adopters = np.flatnonzero((adopted_week > 0) & (adopted_week <= t - 1))
        snap = dataset.snapshot(t - 1)
        bounds = powers.NormalizationBounds(
            x_max=float(snap.strengths.max()) if snap.strengths.nnz else 0.0,
            y_max=y_max,
            d_max=d_max,
        )
        totals = powers.total_powers_block(
            snap, nonadopters, adopters, bounds, config.distance_scheme
        )
        excess = np.clip(
            (totals - len(adopters) * floors[None, :]) / scales[None, :], 0.0, 1.0
        )
        hazard = config.base_hazard * (
            config.weight_influence * excess[:, 0]
            + config.weight_equivalence * excess[:, 1]
            + config.weight_similarity * excess[:, 2]
            + config.weight_confounder * trait_hat[nonadopters]
        )
        if use_connectedness:
            z = powers.connectedness_block(snap, nonadopters, adopters)
            hazard += config.base_hazard * config.weight_connectedness * z
        hazard = np.clip(hazard, 0.0, 0.95)
        draws = rng.random(len(nonadopters))
        adopted_week[nonadopters[draws < hazard]] = t

    side_rows = _simulate_side_items(config, dataset, rng)

    files = _write_files(
        config, out_dir, edges, intensities, segment, region, adopted_week,
        side_rows, trait,
    )
    return files


def _force_scales(config, snap1, y_max, d_max, rng) -> tuple[np.ndarray, np.ndarray]:
    """Per-pair power floors and saturation scales for the observed forces.

    Equivalence and similarity totals carry a baseline of (mean pair power x
    adopter count) that every entity accrues regardless of position; the
    hazard uses the excess above it, saturating once the excess equals a few
    strong adopters' worth.  Influence has no baseline (absent ties carry
    zero power) and saturates at a few typical adopter ties.
    """
    n = config.n_entities
    bounds = powers.NormalizationBounds(
        x_max=float(snap1.strengths.max()) if snap1.strengths.nnz else 1.0,
        y_max=y_max,
        d_max=d_max,
    )
    sample = rng.choice(n, size=min(n, 400), replace=False)
    others = rng.choice(n, size=min(n, 400), replace=False)
    _, eq, sim = powers.pair_powers_block(
        snap1, sample, others, bounds, config.distance_scheme
    )
    off = sample[:, None] != others[None, :]
    floors = np.array([0.0, float(eq[off].mean()), float(sim[off].mean())])
    x = snap1.strengths[snap1.strengths.nonzero()]
    mean_tie = float(np.asarray(x).mean()) / bounds.x_max if x.size else 1.0
    scales = np.array(
        [
            max(_TIE_CAP_MULT * mean_tie, 1e-9),
            _EXCESS_CAP,
            _EXCESS_CAP,
        ]
    )
    return floors, scales


def _exact_y_max(snapshot) -> float:
    n = snapshot.n_entities
    best = 0.0
    idx = np.arange(n)
    for start in range(0, n, 512):
        block = powers.structural_distance_block(snapshot, idx[start : start + 512], idx)
        if block.size:
            best = max(best, float(block.max()))
    return best


def _exact_d_max(snapshot, scheme: str) -> float:
    n = snapshot.n_entities
    best = 0.0
    idx = np.arange(n)
    for start in range(0, n, 512):
        block = powers.entity_distance_block(
            snapshot.characteristics, idx[start : start + 512], idx, scheme
        )
        if block.size:
            best = max(best, float(block.max()))
    return best


def _in_memory_dataset(config, edges, intensities, segment, region) -> Dataset:
    n = config.n_entities
    horizon = config.horizon
    n_edges = len(edges)
    # mirror each undirected edge, all weeks
    src = np.repeat(np.concatenate([edges[:, 0], edges[:, 1]]), horizon)
    dst = np.repeat(np.concatenate([edges[:, 1], edges[:, 0]]), horizon)
    weeks = np.tile(np.arange(1, horizon + 1), 2 * n_edges)
    intens = np.concatenate([intensities, intensities], axis=0).ravel()
    numeric = np.empty((n, 0))
    nominal = np.column_stack([segment, region])
    return Dataset(
        entity_ids=np.arange(n, dtype=np.int64),
        schema=_SCHEMA,
        comm_src=src,
        comm_dst=dst,
        comm_week=weeks,
        comm_intensity=intens,
        profile_entity=np.arange(n, dtype=np.int64),
        profile_week=np.zeros(n, dtype=np.int64),
        profile_numeric=numeric,
        profile_nominal=nominal,
        nominal_vocabs=[
            {f"s{i}": i for i in range(_N_SEGMENTS)},
            {f"r{i}": i for i in range(_N_REGIONS)},
        ],
        adoption_item=0,
        adoption_entity=np.empty(0, dtype=np.int64),
        adoption_week=np.empty(0, dtype=np.int64),
        horizon=horizon,
        directed=False,
    )


def _simulate_side_items(config: SynthConfig, dataset: Dataset, rng) -> list[tuple[int, int, int]]:
    """Independent-cascade diffusions of the side items, as action rows."""
    n = config.n_entities
    adj = dataset.snapshot(1).adjacency.astype(np.int8)
    rows: list[tuple[int, int, int]] = []
    for item in range(1, config.n_side_items + 1):
        q = 0.05 + 0.2 * rng.random()
        adopted = np.zeros(n, dtype=np.int64)
        seeds = rng.choice(n, size=max(1, round(0.01 * n)), replace=False)
        adopted[seeds] = 1
        for t in range(2, config.horizon + 1):
            last = (adopted == t - 1).astype(np.int8)
            counts = adj @ last
            open_set = adopted == 0
            p = 1.0 - np.power(1.0 - q, counts[open_set])
            hit = rng.random(open_set.sum()) < p
            adopted[np.flatnonzero(open_set)[hit]] = t
        for e in np.flatnonzero(adopted > 0):
            rows.append((int(e), item, int(adopted[e])))
    rows.sort()
    return rows


def _write_files(
    config, out_dir, edges, intensities, segment, region, adopted_week,
    side_rows, trait,
) -> dict[str, Path]:
    comms = out_dir / "communications.csv"
    with open(comms, "w") as fh:
        fh.write("src_id,dst_id,week,intensity\n")
        for (a, b), row in zip(edges, intensities):
            for t, x in enumerate(row, start=1):
                fh.write(f"{a},{b},{t},{x:.6f}\n")

    profiles = out_dir / "profiles.csv"
    with open(profiles, "w") as fh:
        fh.write("entity_id,week," + ",".join(_SCHEMA.names) + "\n")
        for i in range(config.n_entities):
            fh.write(f"{i},0,s{segment[i]},r{region[i]}\n")
    schema = out_dir / "profiles.csv.schema.json"
    with open(schema, "w") as fh:
        json.dump(
            {
                "attributes": [
                    {"name": name, "type": kind}
                    for name, kind in zip(_SCHEMA.names, _SCHEMA.kinds)
                ]
            },
            fh,
            indent=2,
        )
        fh.write("\n")

    adoption = out_dir / "adoption.csv"
    with open(adoption, "w") as fh:
        fh.write("entity_id,item_id,week\n")
        for e in np.flatnonzero(adopted_week > 0):
            fh.write(f"{e},0,{adopted_week[e]}\n")

    actions = out_dir / "actions.csv"
    with open(actions, "w") as fh:
        fh.write("entity_id,item_id,week\n")
        for e, item, t in side_rows:
            fh.write(f"{e},{item},{t}\n")

    truth = out_dir / "truth.json"
    weeks, counts = np.unique(adopted_week[adopted_week > 0], return_counts=True)
    with open(truth, "w") as fh:
        json.dump(
            {
                "config": asdict(config),
                "latent_trait": [round(float(x), 10) for x in trait],
                "adoptions_per_week": {int(w): int(c) for w, c in zip(weeks, counts)},
            },
            fh,
            indent=2,
        )
        fh.write("\n")

    return {
        "communications": comms,
        "profiles": profiles,
        "schema": schema,
        "adoption": adoption,
        "actions": actions,
        "truth": truth,
    }


def weekly_adoption_rates(adopted_week: np.ndarray, horizon: int) -> np.ndarray:
    """Adopters in week t over nonadopters entering week t, per week."""
    n = len(adopted_week)
    rates = np.zeros(horizon)
    for t in range(1, horizon + 1):
        at_risk = (adopted_week == 0) | (adopted_week >= t)
        if at_risk.sum():
            rates[t - 1] = (adopted_week == t).sum() / at_risk.sum()
    return rates
