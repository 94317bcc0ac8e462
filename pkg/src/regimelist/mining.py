"""Frequent-pattern mining over a dataset's characteristics.

Atomic predicates are level equalities for binary/categorical features and
threshold splits (>= t, < t at empirical quantiles) for real ones.  Patterns
are conjunctions of atoms, at most one per feature, grown level-wise and
pruned with the anti-monotone support bound.  The resulting candidate set is
the pattern universe the regime search composes decision lists from.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import ceil
from typing import Sequence

import numpy as np

from .domain import REAL, CharacteristicSpec, Dataset, Pattern, Predicate, pattern_mask
from .errors import EmptyCandidateSetError, ValidationError


@dataclass(frozen=True)
class MiningConfig:
    min_support: float = 0.05
    max_predicates: int = 4
    num_bins: int = 4

    def __post_init__(self) -> None:
        if not 0.0 <= self.min_support <= 1.0:
            raise ValidationError("min_support must lie in [0, 1]")
        if self.max_predicates < 1:
            raise ValidationError("max_predicates must be at least 1")
        if self.num_bins < 2:
            raise ValidationError("num_bins must be at least 2")

    def to_dict(self) -> dict:
        return {"min_support": self.min_support,
                "max_predicates": self.max_predicates,
                "num_bins": self.num_bins}

    @classmethod
    def from_dict(cls, d: dict) -> "MiningConfig":
        return cls(
            min_support=float(d.get("min_support", 0.05)),
            max_predicates=int(d.get("max_predicates", 4)),
            num_bins=int(d.get("num_bins", 4)),
        )


def discretize(ds: Dataset, num_bins: int = 4) -> dict[int, tuple[float, ...]]:
    """Quantile thresholds per real feature, strictly inside (min, max).

    Returns {feature index: ascending thresholds}; a constant column maps to
    an empty tuple.  Binary and categorical features are absent.
    """
    if num_bins < 2:
        raise ValidationError("num_bins must be at least 2")
    out: dict[int, tuple[float, ...]] = {}
    qs = np.arange(1, num_bins) / num_bins
    for f, spec in enumerate(ds.specs):
        if spec.kind != REAL:
            continue
        col = ds.columns[f]
        lo, hi = float(col.min()), float(col.max())
        thresholds = []
        for t in np.quantile(col, qs):
            t = float(t)
            if lo < t < hi and (not thresholds or t > thresholds[-1]):
                thresholds.append(t)
        out[f] = tuple(thresholds)
    return out


def build_atoms(ds: Dataset, bins: dict[int, tuple[float, ...]]) -> tuple[Predicate, ...]:
    """Atomic predicates in canonical order: by feature, then level/threshold."""
    atoms: list[Predicate] = []
    for f, spec in enumerate(ds.specs):
        if spec.kind == REAL:
            for t in bins.get(f, ()):
                atoms.append(Predicate(f, ">=", t))
                atoms.append(Predicate(f, "<", t))
        else:
            for level in spec.levels:
                atoms.append(Predicate(f, "=", level))
    return tuple(atoms)


@dataclass(frozen=True)
class CandidateSet:
    """Immutable mining result: patterns with coverage counts, plus the bins."""

    patterns: tuple[Pattern, ...]
    counts: tuple[int, ...]
    bins: dict[int, tuple[float, ...]]
    n_subjects: int
    config: MiningConfig

    def __post_init__(self) -> None:
        if len(self.patterns) != len(self.counts):
            raise ValidationError("patterns and counts must align")

    def __len__(self) -> int:
        return len(self.patterns)

    def to_dict(self, specs: Sequence[CharacteristicSpec]) -> dict:
        return {
            "n_subjects": self.n_subjects,
            "config": self.config.to_dict(),
            "bins": {specs[f].name: list(ts) for f, ts in self.bins.items()},
            "patterns": [
                {
                    "predicates": [
                        {"feature": specs[p.feature].name, "op": p.op, "value": p.value}
                        for p in pat.predicates
                    ],
                    "count": c,
                }
                for pat, c in zip(self.patterns, self.counts)
            ],
        }

    @classmethod
    def from_dict(cls, d: dict, specs: Sequence[CharacteristicSpec]) -> "CandidateSet":
        name_to_idx = {s.name: i for i, s in enumerate(specs)}
        try:
            patterns = []
            counts = []
            for entry in d["patterns"]:
                preds = tuple(
                    Predicate(name_to_idx[p["feature"]], p["op"], p["value"])
                    for p in entry["predicates"]
                )
                patterns.append(Pattern(preds))
                counts.append(int(entry["count"]))
            bins = {name_to_idx[name]: tuple(float(t) for t in ts)
                    for name, ts in d["bins"].items()}
            return cls(
                patterns=tuple(patterns),
                counts=tuple(counts),
                bins=bins,
                n_subjects=int(d["n_subjects"]),
                config=MiningConfig.from_dict(d.get("config", {})),
            )
        except (KeyError, TypeError) as e:
            raise ValidationError(f"malformed candidate set: {e!r}") from None


def mine_patterns(ds: Dataset, config: MiningConfig = MiningConfig()) -> CandidateSet:
    """Level-wise frequent-conjunction mining.

    A pattern survives when it covers at least max(1, ceil(min_support * N))
    subjects; extensions reuse only surviving shorter patterns, so pruning is
    exact under the anti-monotone support bound.  Raises
    EmptyCandidateSetError when nothing survives.
    """
    n = ds.n_subjects
    min_count = max(1, ceil(config.min_support * n))
    bins = discretize(ds, config.num_bins)
    atoms = build_atoms(ds, bins)
    masks = [pattern_mask(ds, Pattern((a,))) for a in atoms]

    frequent: set[frozenset[int]] = set()
    found: list[tuple[int, ...]] = []
    found_masks: list[np.ndarray] = []
    frontier: list[tuple[tuple[int, ...], np.ndarray]] = []
    for j, mask in enumerate(masks):
        if int(mask.sum()) >= min_count:
            frontier.append(((j,), mask))
            frequent.add(frozenset((j,)))
    found.extend(ids for ids, _ in frontier)
    found_masks.extend(m for _, m in frontier)

    for _ in range(2, config.max_predicates + 1):
        next_frontier: list[tuple[tuple[int, ...], np.ndarray]] = []
        for ids, mask in frontier:
            used = {atoms[i].feature for i in ids}
            for j in range(ids[-1] + 1, len(atoms)):
                if atoms[j].feature in used:
                    continue
                if frozenset((j,)) not in frequent:
                    continue
                cand = ids + (j,)
                key = frozenset(cand)
                # anti-monotone check: all one-shorter sub-patterns survived
                if any(key - {i} not in frequent for i in cand):
                    continue
                joint = mask & masks[j]
                if int(joint.sum()) >= min_count:
                    next_frontier.append((cand, joint))
                    frequent.add(key)
        if not next_frontier:
            break
        frontier = next_frontier
        found.extend(ids for ids, _ in frontier)
        found_masks.extend(m for _, m in frontier)

    if not found:
        raise EmptyCandidateSetError(
            f"no pattern covers {min_count} of {n} subjects; lower min_support"
        )
    patterns = tuple(Pattern(tuple(atoms[i] for i in ids)) for ids in found)
    counts = tuple(int(m.sum()) for m in found_masks)
    return CandidateSet(patterns=patterns, counts=counts, bins=bins,
                        n_subjects=n, config=config)
