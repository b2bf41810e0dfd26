"""Hierarchical merging of weighted subclusters.

Repeatedly merges the minimum-dissimilarity pair, recording a dendrogram,
until a user-fixed cluster count C is reached. Merged densities are exact
term-list mixtures (weight-proportional), never refit, so the measures
keep seeing the true merged pdfs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dissim import Measure, WeightedPair, evaluate
from .errors import ValidationError
from .functional import IntegrationContext, SamplePool
from .mixture import FittedModel, MixtureDensity, Subcluster, scaled_combination


@dataclass(frozen=True)
class ClusterState:
    """Current subclusters; weights sum to one, members partition 0..K-1."""

    subclusters: tuple[Subcluster, ...]
    step: int = 0

    def __post_init__(self):
        total = sum(s.weight for s in self.subclusters)
        if abs(total - 1.0) > 1e-9:
            raise ValidationError(f"subcluster weights sum to {total}, expected 1")
        ids = [s.id for s in self.subclusters]
        if len(set(ids)) != len(ids):
            raise ValidationError(f"duplicate subcluster ids: {ids}")
        seen: set[int] = set()
        for s in self.subclusters:
            if seen & s.members:
                raise ValidationError("subcluster member sets overlap")
            seen |= s.members

    @classmethod
    def from_model(cls, model_or_mixture) -> "ClusterState":
        mix: MixtureDensity = (
            model_or_mixture.mixture
            if isinstance(model_or_mixture, FittedModel)
            else model_or_mixture
        )
        subs = tuple(
            Subcluster(
                id=i,
                weight=coef,
                density=MixtureDensity(((1.0, comp),)),
                members=frozenset({i}),
            )
            for i, (coef, comp) in enumerate(mix.terms)
        )
        return cls(subclusters=subs, step=0)

    @property
    def count(self) -> int:
        return len(self.subclusters)

    def full_mixture(self) -> MixtureDensity:
        _, mix = scaled_combination([(s.weight, s.density) for s in self.subclusters])
        return mix

    def index_of(self, sub_id: int) -> int:
        for pos, s in enumerate(self.subclusters):
            if s.id == sub_id:
                return pos
        raise ValidationError(f"unknown subcluster id {sub_id}")


@dataclass(frozen=True)
class MergeRecord:
    step: int
    merged_ids: tuple[int, int]
    new_id: int
    value: float
    measure: str
    surviving_count: int


@dataclass(frozen=True)
class Dendrogram:
    measure: str
    records: tuple[MergeRecord, ...]

    def to_payload(self) -> dict:
        return {
            "measure": self.measure,
            "records": [
                {
                    "step": r.step,
                    "merged_ids": list(r.merged_ids),
                    "new_id": r.new_id,
                    "value": r.value,
                    "measure": r.measure,
                    "surviving_count": r.surviving_count,
                }
                for r in self.records
            ],
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "Dendrogram":
        records = tuple(
            MergeRecord(
                step=r["step"],
                merged_ids=tuple(r["merged_ids"]),
                new_id=r["new_id"],
                value=r["value"],
                measure=r["measure"],
                surviving_count=r["surviving_count"],
            )
            for r in payload["records"]
        )
        return cls(measure=payload["measure"], records=records)

    def csv_rows(self) -> list[tuple]:
        return [
            (r.step, r.merged_ids[0], r.merged_ids[1], r.value, r.surviving_count)
            for r in self.records
        ]


def merge_pair(state: ClusterState, i: int, j: int) -> ClusterState:
    """Merge subclusters with ids i and j (weight-proportional mixture)."""
    if i == j:
        raise ValidationError(f"cannot merge id {i} with itself")
    pos_i, pos_j = state.index_of(i), state.index_of(j)
    a, b = state.subclusters[pos_i], state.subclusters[pos_j]
    _, density = scaled_combination([(a.weight, a.density), (b.weight, b.density)])
    merged = Subcluster(
        id=max(s.id for s in state.subclusters) + 1,
        weight=a.weight + b.weight,
        density=density,
        members=a.members | b.members,
    )
    rest = tuple(s for s in state.subclusters if s.id not in (i, j))
    return ClusterState(subclusters=rest + (merged,), step=state.step + 1)


def merge_step(
    state: ClusterState,
    measure: Measure,
    ctx: IntegrationContext,
    cache: dict | None = None,
) -> tuple[ClusterState, MergeRecord]:
    """One merge of the minimum-dissimilarity pair (ties: smallest (i, j) ids).

    ``cache`` maps frozenset({id_i, id_j}) -> value so that a surviving
    pair is not re-integrated on later steps of the same run.
    """
    subs = state.subclusters
    if len(subs) < 2:
        raise ValidationError("need at least 2 subclusters to merge")
    best = None
    for i in range(len(subs)):
        for j in range(i + 1, len(subs)):
            a, b = subs[i], subs[j]
            key = frozenset((a.id, b.id))
            if cache is not None and key in cache:
                value = cache[key]
            else:
                value = evaluate(measure, WeightedPair(a, b), ctx)
                if cache is not None:
                    cache[key] = value
            ids = (min(a.id, b.id), max(a.id, b.id))
            if best is None or value < best[0] or (value == best[0] and ids < best[1]):
                best = (value, ids)
    value, ids = best
    new_state = merge_pair(state, ids[0], ids[1])
    record = MergeRecord(
        step=state.step,
        merged_ids=ids,
        new_id=new_state.subclusters[-1].id,
        value=value,
        measure=measure.value,
        surviving_count=new_state.count,
    )
    return new_state, record


def run_to_c(
    state: ClusterState,
    measure: Measure,
    C: int,
    ctx: IntegrationContext,
) -> tuple[ClusterState, Dendrogram]:
    """Merge down to exactly C subclusters.

    In importance mode a sample pool seeded from ctx.seed is drawn once
    from the state's full mixture and shared by every pairwise evaluation
    of the run (common random numbers).
    """
    if not 1 <= C <= state.count:
        raise ValidationError(f"C must be in [1, {state.count}], got {C}")
    if ctx.mode == "importance" and ctx.pool is None:
        ctx = ctx.with_pool(SamplePool(state.full_mixture(), ctx.is_samples, ctx.seed))
    records = []
    cache: dict = {}
    while state.count > C:
        state, record = merge_step(state, measure, ctx, cache)
        records.append(record)
    return state, Dendrogram(measure=measure.value, records=tuple(records))


def elbow_curve(dendrogram: Dendrogram) -> list[tuple[int, float]]:
    """(remaining_clusters, min-max normalised dissimilarity) per merge.

    A single record normalises to 1.0 by convention.
    """
    if not dendrogram.records:
        raise ValidationError("dendrogram has no records")
    values = np.array([r.value for r in dendrogram.records], dtype=float)
    lo, hi = values.min(), values.max()
    if hi - lo <= 0:
        norm = np.ones_like(values)
    else:
        norm = (values - lo) / (hi - lo)
    return [(r.surviving_count, float(v)) for r, v in zip(dendrogram.records, norm)]
