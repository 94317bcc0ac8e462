"""Shared test helpers: random instance generators and brute-force oracles.

The oracles here are written independently of the library internals: plain
Python loops over rows, no vectorized shortcuts, so that agreement is
evidence rather than tautology.
"""
from __future__ import annotations

import math

import numpy as np

from regimelist.domain import (
    BINARY,
    CATEGORICAL,
    REAL,
    CharacteristicSpec,
    Dataset,
    DecisionList,
    Pattern,
    Predicate,
)
from regimelist.estimation import DRScoreMatrix
from regimelist.objective import ObjectiveWeights


# ---------------------------------------------------------------------------
# random instances


def random_specs(rng: np.random.Generator, n_features: int) -> tuple[CharacteristicSpec, ...]:
    specs = []
    for f in range(n_features):
        kind = (BINARY, CATEGORICAL, REAL)[int(rng.integers(3))]
        cost = float(int(rng.integers(1, 7)))
        if kind == BINARY:
            specs.append(CharacteristicSpec(f"b{f}", BINARY, cost, ("no", "yes")))
        elif kind == CATEGORICAL:
            k = int(rng.integers(3, 5))
            levels = tuple(f"v{j}" for j in range(k))
            specs.append(CharacteristicSpec(f"c{f}", CATEGORICAL, cost, levels))
        else:
            specs.append(CharacteristicSpec(f"r{f}", REAL, cost))
    return tuple(specs)


def random_dataset(
    rng: np.random.Generator,
    n_subjects: int = 40,
    n_features: int = 5,
    m: int = 3,
    specs: tuple[CharacteristicSpec, ...] | None = None,
) -> Dataset:
    if specs is None:
        specs = random_specs(rng, n_features)
    treatment_names = tuple(f"t{a}" for a in range(m))
    treatment_costs = [float(int(rng.integers(0, 20))) for _ in range(m)]
    rows = []
    for _ in range(n_subjects):
        values = []
        for spec in specs:
            if spec.kind == REAL:
                values.append(float(np.round(rng.normal(0, 2), 3)))
            else:
                values.append(spec.levels[int(rng.integers(len(spec.levels)))])
        a = treatment_names[int(rng.integers(m))]
        y = float(np.round(rng.normal(50, 20), 3))
        rows.append((values, a, y))
    return Dataset.from_rows(specs, treatment_names, treatment_costs, rows)


def random_pattern(rng: np.random.Generator, ds: Dataset, max_preds: int = 2) -> Pattern:
    n_preds = int(rng.integers(1, max_preds + 1))
    feats = rng.choice(ds.n_features, size=min(n_preds, ds.n_features), replace=False)
    preds = []
    for f in sorted(int(x) for x in feats):
        spec = ds.specs[f]
        if spec.kind == REAL:
            t = float(np.round(rng.normal(0, 2), 3))
            op = (">=", "<")[int(rng.integers(2))]
            preds.append(Predicate(f, op, t))
        else:
            level = spec.levels[int(rng.integers(len(spec.levels)))]
            op = ("=", "!=")[int(rng.integers(2))]
            preds.append(Predicate(f, op, level))
    return Pattern(tuple(preds))


def random_decision_list(rng: np.random.Generator, ds: Dataset, max_rules: int = 5) -> DecisionList:
    L = int(rng.integers(0, max_rules + 1))
    rules = tuple(
        (random_pattern(rng, ds), int(rng.integers(ds.n_treatments))) for _ in range(L)
    )
    return DecisionList(rules=rules, default_treatment=int(rng.integers(ds.n_treatments)))


def random_scores(rng: np.random.Generator, ds: Dataset) -> DRScoreMatrix:
    mat = rng.normal(50, 30, size=(ds.n_subjects, ds.n_treatments))
    return DRScoreMatrix(scores=mat, treatment_names=ds.treatment_names)


def random_weights(rng: np.random.Generator) -> ObjectiveWeights:
    return ObjectiveWeights(
        lambda1=float(np.round(rng.uniform(0.1, 2.0), 3)),
        lambda2=float(np.round(rng.uniform(0.0, 2.0), 3)),
        lambda3=float(np.round(rng.uniform(0.0, 2.0), 3)),
    )


# ---------------------------------------------------------------------------
# brute-force oracles (plain Python, row by row)


def oracle_predicate_holds(pred: Predicate, x: tuple, specs) -> bool:
    v = x[pred.feature]
    spec = specs[pred.feature]
    if spec.kind == REAL:
        t = float(pred.value)
        return {
            "=": v == t,
            "!=": v != t,
            "<": v < t,
            "<=": v <= t,
            ">": v > t,
            ">=": v >= t,
        }[pred.op]
    if pred.op == "=":
        return v == pred.value
    return v != pred.value


def oracle_groups(ds: Dataset, dl: DecisionList) -> list[int]:
    """First matching rule index per subject, len(rules) for the default."""
    out = []
    for i in range(ds.n_subjects):
        x = ds.row(i)
        g = len(dl.rules)
        for j, (pattern, _) in enumerate(dl.rules):
            if all(oracle_predicate_holds(p, x, ds.specs) for p in pattern.predicates):
                g = j
                break
        out.append(g)
    return out


def oracle_assigned(ds: Dataset, dl: DecisionList) -> list[int]:
    groups = oracle_groups(ds, dl)
    return [
        dl.rules[g][1] if g < len(dl.rules) else dl.default_treatment for g in groups
    ]


def oracle_assessment_costs(
    ds: Dataset, dl: DecisionList, charge_default_full: bool = False
) -> list[float]:
    """Group j pays once for each distinct characteristic in patterns 1..j."""
    groups = oracle_groups(ds, dl)
    out = []
    for g in groups:
        if g == len(dl.rules):
            if charge_default_full and dl.rules:
                billed = set()
                for pattern, _ in dl.rules:
                    for p in pattern.predicates:
                        billed.add(p.feature)
                out.append(sum(ds.specs[f].cost for f in billed))
            else:
                out.append(0.0)
            continue
        billed = set()
        for pattern, _ in dl.rules[: g + 1]:
            for p in pattern.predicates:
                billed.add(p.feature)
        out.append(sum(ds.specs[f].cost for f in billed))
    return out


def oracle_objective(
    ds: Dataset,
    dl: DecisionList,
    scores: DRScoreMatrix,
    weights: ObjectiveWeights,
    charge_default_full: bool = False,
) -> float:
    assigned = oracle_assigned(ds, dl)
    assess = oracle_assessment_costs(ds, dl, charge_default_full)
    n = ds.n_subjects
    g1 = sum(scores.scores[i][assigned[i]] for i in range(n)) / n
    g2 = sum(assess) / n
    g3 = sum(float(ds.treatment_costs[assigned[i]]) for i in range(n)) / n
    return weights.lambda1 * g1 - weights.lambda2 * g2 - weights.lambda3 * g3


def oracle_quantile_thresholds(values, num_bins: int) -> list[float]:
    """Sort-and-interpolate quantile cuts, strictly inside (min, max), deduped."""
    xs = sorted(float(v) for v in values)
    n = len(xs)
    cuts = []
    for k in range(1, num_bins):
        q = k / num_bins
        pos = q * (n - 1)
        lo = math.floor(pos)
        hi = math.ceil(pos)
        frac = pos - lo
        cuts.append(xs[lo] * (1 - frac) + xs[hi] * frac)
    out: list[float] = []
    for t in cuts:
        if xs[0] < t < xs[-1] and (not out or t != out[-1]):
            out.append(t)
    return out
