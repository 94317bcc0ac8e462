"""Decision-list optimization over a mined candidate set.

The construction of a list is a sequential decision process: each action
appends one (pattern, treatment) rule to the prefix, or closes the list by
choosing a default treatment.  Because matching is first-match, a subject's
score and treatment cost are final the moment a rule covers it, so a prefix
carries exact incurred sums plus an optimistic bound on whatever the
uncovered remainder can still contribute.  Three solvers share this state
machinery: UCT (the main engine), exhaustive enumeration (small-instance
oracle), and a greedy baseline.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .domain import Dataset, DecisionList, feature_set_cost
from .errors import SizeLimitError, ValidationError
from .estimation import DRScoreMatrix
from .mining import CandidateSet
from .objective import ObjectiveWeights, check_scores

Action = tuple[int, int]
# (pattern index, treatment) appends a rule; (-1, d) closes with default d.


@dataclass(frozen=True)
class SearchConfig:
    iterations: int = 2000
    c_explore: float = 1.414
    seed: int = 0
    L_max: int = 4
    min_new_coverage: float = 0.01
    charge_default_full: bool = False
    rollout: str = "uniform"
    n_trees: int = 1
    # progressive widening: a node may hold at most ceil(c * visits^alpha)
    # children, so wide action spaces deepen instead of expanding breadth-first
    widen_c: float = 2.0
    widen_alpha: float = 0.3
    debug_checks: bool = False

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise ValidationError("iterations must be positive")
        if self.c_explore < 0:
            raise ValidationError("c_explore must be nonnegative")
        if self.L_max < 0:
            raise ValidationError("L_max must be nonnegative")
        if self.widen_c <= 0 or self.widen_alpha < 0:
            raise ValidationError("widening parameters must be positive")
        if not 0.0 <= self.min_new_coverage <= 1.0:
            raise ValidationError("min_new_coverage must lie in [0, 1]")
        if self.rollout not in ("uniform", "greedy"):
            raise ValidationError("rollout must be 'uniform' or 'greedy'")
        if self.n_trees < 1:
            raise ValidationError("n_trees must be positive")

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "c_explore": self.c_explore,
            "seed": self.seed,
            "L_max": self.L_max,
            "min_new_coverage": self.min_new_coverage,
            "charge_default_full": self.charge_default_full,
            "rollout": self.rollout,
            "n_trees": self.n_trees,
            "widen_c": self.widen_c,
            "widen_alpha": self.widen_alpha,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SearchConfig":
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in d.items() if k in known})


@dataclass
class SearchState:
    """A rule-list prefix with its exactly-incurred sums.

    incurred_value is the sum over covered subjects of
    lambda1*score - lambda3*treatment_cost for their assigned arm;
    incurred_assess the sum of their prefix assessment costs.
    """

    prefix: tuple[tuple[int, int], ...]
    covered: np.ndarray
    features: frozenset[int]
    incurred_assess: float
    incurred_value: float
    terminal: bool = False
    default_treatment: int = -1

    @property
    def depth(self) -> int:
        return len(self.prefix)


class SearchProblem:
    """Shared precomputation and transition logic for all three solvers."""

    def __init__(
        self,
        ds: Dataset,
        scores: DRScoreMatrix,
        cands: CandidateSet,
        weights: ObjectiveWeights = ObjectiveWeights(),
        charge_default_full: bool = False,
    ):
        check_scores(ds, scores)
        self.ds = ds
        self.weights = weights
        self.charge_default_full = charge_default_full
        self.patterns = cands.patterns
        self.n = ds.n_subjects
        self.m = ds.n_treatments
        from .domain import pattern_mask

        self.masks = np.zeros((len(self.patterns), self.n), dtype=bool)
        for p, pat in enumerate(self.patterns):
            self.masks[p] = pattern_mask(ds, pat)
        self.masks_f = self.masks.astype(np.float32)
        # per-subject, per-arm contribution once a rule assigns that arm
        self.value_mat = (weights.lambda1 * scores.scores
                          - weights.lambda3 * ds.treatment_costs[None, :])
        # optimistic per-subject future value: best score and cheapest arm
        # taken independently, an upper bound on any actual assignment
        self.optimistic = (weights.lambda1 * scores.scores.max(axis=1)
                           - weights.lambda3 * float(ds.treatment_costs.min()))
        self.pattern_features = tuple(pat.features for pat in self.patterns)

    def initial_state(self) -> SearchState:
        return SearchState(
            prefix=(),
            covered=np.zeros(self.n, dtype=bool),
            features=frozenset(),
            incurred_assess=0.0,
            incurred_value=0.0,
        )

    def new_coverage_counts(self, state: SearchState) -> np.ndarray:
        """How many not-yet-covered subjects each pattern matches."""
        uncovered = (~state.covered).astype(np.float32)
        return np.rint(self.masks_f @ uncovered).astype(np.int64)

    def required_new(self, min_new_coverage: float) -> int:
        # a rule matching nothing new is never allowed: it only adds cost
        return max(1, math.ceil(min_new_coverage * self.n))

    def legal_actions(self, state: SearchState, L_max: int,
                      min_new_coverage: float) -> list[Action]:
        """Rule actions passing the new-coverage filter, then default actions."""
        if state.terminal:
            raise ValidationError("terminal state has no actions")
        actions: list[Action] = []
        if state.depth < L_max:
            used = {p for p, _ in state.prefix}
            counts = self.new_coverage_counts(state)
            need = self.required_new(min_new_coverage)
            for p in range(len(self.patterns)):
                if p in used or counts[p] < need:
                    continue
                actions.extend((p, t) for t in range(self.m))
        actions.extend((-1, d) for d in range(self.m))
        return actions

    def ordered_actions(self, state: SearchState, L_max: int,
                        min_new_coverage: float) -> list[Action]:
        """legal_actions ordered for expansion by pop(): defaults first, then
        rules by decreasing one-step objective gain.

        The gain of appending (p, t) is measured against closing the list
        right away with its best default: the rule's value on newly covered
        subjects versus handing those subjects to that default, minus
        assessment charges.  The charge counts the marginal feature cost not
        just against the newly covered subjects but also against the most
        subjects later rules could still cover (remaining rule slots times
        the largest remaining coverage), because prefix costs accumulate onto
        later groups; that pushes expensive features toward later positions.
        Ordering only affects which action gets expanded first, never which
        actions exist.
        """
        if state.terminal:
            raise ValidationError("terminal state has no actions")
        defaults: list[Action] = [(-1, d) for d in range(self.m)]
        if state.depth >= L_max:
            return defaults
        used = {p for p, _ in state.prefix}
        uncov = ~state.covered
        uncov_f = uncov.astype(np.float32)
        counts = np.rint(self.masks_f @ uncov_f).astype(np.int64)
        need = self.required_new(min_new_coverage)
        n_unc = int(uncov.sum())
        lam2 = self.weights.lambda2
        cur_cost = feature_set_cost(self.ds.specs, state.features)
        # val_sums[p, t]: total value of assigning t to the subjects pattern
        # p would newly cover
        val_sums = np.empty((len(self.patterns), self.m))
        for t in range(self.m):
            col = np.where(uncov, self.value_mat[:, t], 0.0).astype(np.float32)
            val_sums[:, t] = self.masks_f @ col
        best_default = int(np.argmax(uncov_f @ self.value_mat.astype(np.float32)))

        eligible = [p for p in range(len(self.patterns))
                    if p not in used and counts[p] >= need]
        slots = max(L_max - state.depth - 1, 0)
        count_cap = max((int(counts[p]) for p in eligible), default=0)

        keyed: list[tuple[float, int, int]] = []
        for p in eligible:
            new_cost = feature_set_cost(self.ds.specs,
                                        state.features | self.pattern_features[p])
            later = min(n_unc - int(counts[p]), slots * count_cap)
            charge = new_cost * int(counts[p]) + (new_cost - cur_cost) * later
            base = float(val_sums[p, best_default])
            for t in range(self.m):
                key = float(val_sums[p, t]) - base - lam2 * charge
                keyed.append((key, p, t))
        keyed.sort()
        return [(p, t) for _, p, t in keyed] + defaults

    def apply(self, state: SearchState, action: Action) -> SearchState:
        p, t = action
        if p < 0:
            return replace(state, terminal=True, default_treatment=t)
        newly = self.masks[p] & ~state.covered
        features = state.features | self.pattern_features[p]
        step_cost = feature_set_cost(self.ds.specs, features)
        return SearchState(
            prefix=state.prefix + ((p, t),),
            covered=state.covered | self.masks[p],
            features=features,
            incurred_assess=state.incurred_assess + step_cost * int(newly.sum()),
            incurred_value=state.incurred_value + float(self.value_mat[newly, t].sum()),
        )

    def default_assessment(self, state: SearchState) -> float:
        if not self.charge_default_full or not state.prefix:
            return 0.0
        return feature_set_cost(self.ds.specs, state.features)

    def terminal_objective(self, state: SearchState) -> float:
        """Exact objective of a closed list, from the incurred sums."""
        if not state.terminal:
            raise ValidationError("objective of a non-terminal state")
        d = state.default_treatment
        uncovered = ~state.covered
        n_unc = int(uncovered.sum())
        total = (state.incurred_value
                 - self.weights.lambda2 * state.incurred_assess
                 + float(self.value_mat[uncovered, d].sum())
                 - self.weights.lambda2 * self.default_assessment(state) * n_unc)
        return total / self.n

    def state_bound(self, state: SearchState, L_max: int = 0,
                    min_new_coverage: float = 0.0) -> float:
        """Upper bound on the objective of every completion of the state.

        Covered subjects are settled; each uncovered subject contributes at
        most its best score minus the cheapest treatment, and at least the
        already-committed default assessment charge when that policy is on.
        """
        if state.terminal:
            return self.terminal_objective(state)
        uncovered = ~state.covered
        n_unc = int(uncovered.sum())
        total = (state.incurred_value
                 - self.weights.lambda2 * state.incurred_assess
                 + float(self.optimistic[uncovered].sum())
                 - self.weights.lambda2 * self.default_assessment(state) * n_unc)
        return total / self.n

    def decision_list(self, state: SearchState) -> DecisionList:
        if not state.terminal:
            raise ValidationError("only a terminal state defines a decision list")
        rules = tuple((self.patterns[p], t) for p, t in state.prefix)
        return DecisionList(rules=rules, default_treatment=state.default_treatment)


def check_state_consistency(problem: SearchProblem, state: SearchState) -> None:
    """Recompute covered set and incurred sums from the prefix; must match exactly."""
    covered = np.zeros(problem.n, dtype=bool)
    features: frozenset[int] = frozenset()
    assess = 0.0
    value = 0.0
    for p, t in state.prefix:
        newly = problem.masks[p] & ~covered
        covered |= problem.masks[p]
        features = features | problem.pattern_features[p]
        assess += feature_set_cost(problem.ds.specs, features) * int(newly.sum())
        value += float(problem.value_mat[newly, t].sum())
    if not np.array_equal(covered, state.covered):
        raise AssertionError("state.covered diverged from prefix recomputation")
    if features != state.features:
        raise AssertionError("state.features diverged from prefix recomputation")
    if assess != state.incurred_assess:
        raise AssertionError(
            f"incurred_assess {state.incurred_assess!r} != recomputed {assess!r}")
    if value != state.incurred_value:
        raise AssertionError(
            f"incurred_value {state.incurred_value!r} != recomputed {value!r}")


class SearchNode:
    """One prefix in the UCT tree."""

    __slots__ = ("state", "bound", "visits", "total_reward", "best_reward",
                 "children", "untried", "fully_explored")

    def __init__(self, state: SearchState, bound: float):
        self.state = state
        self.bound = bound
        self.visits = 0
        self.total_reward = 0.0
        self.best_reward = -math.inf
        self.children: list[tuple[Action, SearchNode]] = []
        self.untried: list[Action] | None = None
        self.fully_explored = False


@dataclass
class SearchResult:
    decision_list: DecisionList
    objective: float
    log: list[dict] = field(default_factory=list)
    tree_size: int = 0
    n_pruned: int = 0
    iterations_run: int = 0
    seed: int = 0


def uct_search(
    ds: Dataset,
    scores: DRScoreMatrix,
    cands: CandidateSet,
    weights: ObjectiveWeights = ObjectiveWeights(),
    config: SearchConfig = SearchConfig(),
) -> SearchResult:
    """Monte-Carlo tree search with bound pruning over list prefixes.

    Each iteration selects by UCB1 (mean reward normalized to [0, 1] by the
    running min/max of terminal rewards), expands one untried action, plays
    uniform-random legal actions to termination, and backs the terminal
    objective up the path.  Terminal expansions are scored exactly.  A child
    whose optimistic bound cannot beat the incumbent is pruned; a subtree
    whose actions are all expanded or pruned is marked fully explored, and
    the search stops early once the root is (every completion has then been
    either evaluated or soundly excluded).
    """
    problem = SearchProblem(ds, scores, cands, weights, config.charge_default_full)
    rng = np.random.default_rng(config.seed)
    root = SearchNode(problem.initial_state(), problem.state_bound(problem.initial_state()))
    tree_size = 1
    n_pruned = 0
    best_obj = -math.inf
    best_state: SearchState | None = None
    rmin = math.inf
    rmax = -math.inf
    log: list[dict] = []

    def record_terminal(state: SearchState, obj: float) -> None:
        nonlocal best_obj, best_state, rmin, rmax
        if obj > best_obj:
            best_obj = obj
            best_state = state
        rmin = min(rmin, obj)
        rmax = max(rmax, obj)

    def rollout(state: SearchState) -> tuple[SearchState, float]:
        # Uncovered subjects only shrink along a rollout, so a pattern that
        # failed the coverage filter once stays illegal: drop it and resample.
        used = {p for p, _ in state.prefix}
        active = [p for p in range(len(problem.patterns)) if p not in used]
        need = problem.required_new(config.min_new_coverage)
        while not state.terminal:
            if state.depth >= config.L_max:
                state = problem.apply(state, (-1, int(rng.integers(problem.m))))
                break
            k = int(rng.integers(len(active) * problem.m + problem.m))
            if k >= len(active) * problem.m:
                state = problem.apply(state, (-1, k - len(active) * problem.m))
                break
            p = active[k // problem.m]
            t = k % problem.m
            if int((problem.masks[p] & ~state.covered).sum()) < need:
                active.remove(p)
                continue
            state = problem.apply(state, (p, t))
            active.remove(p)
            if config.debug_checks:
                check_state_consistency(problem, state)
        obj = problem.terminal_objective(state)
        record_terminal(state, obj)
        return state, obj

    def greedy_rollout(state: SearchState) -> tuple[SearchState, float]:
        while not state.terminal:
            actions = problem.legal_actions(state, config.L_max, config.min_new_coverage)
            best_a, best_v = None, -math.inf
            for a in actions:
                nxt = problem.apply(state, a)
                v = problem.state_bound(nxt)
                if v > best_v:
                    best_a, best_v = a, v
            state = problem.apply(state, best_a)
        obj = problem.terminal_objective(state)
        record_terminal(state, obj)
        return state, obj

    do_rollout = greedy_rollout if config.rollout == "greedy" else rollout

    def backup(path: list[SearchNode], reward: float) -> None:
        for node in path:
            node.visits += 1
            node.total_reward += reward
            if reward > node.best_reward:
                node.best_reward = reward

    def normalized(mean: float) -> float:
        if rmax > rmin:
            return (mean - rmin) / (rmax - rmin)
        return 0.5

    iterations_run = 0
    for it in range(1, config.iterations + 1):
        if root.fully_explored:
            break
        iterations_run = it
        path = [root]
        node = root
        reward: float | None = None
        while reward is None:
            if node.untried is None:
                node.untried = problem.ordered_actions(
                    node.state, config.L_max, config.min_new_coverage)
            live = [(a, c) for a, c in node.children
                    if not c.fully_explored and c.bound > best_obj]
            dropped = [c for _, c in node.children
                       if not c.fully_explored and c.bound <= best_obj]
            for c in dropped:
                c.fully_explored = True
                n_pruned += 1
            # progressive widening gates expansion unless nothing is selectable
            limit = max(1, math.ceil(
                config.widen_c * max(node.visits, 1) ** config.widen_alpha))
            expanded = False
            if node.untried and (len(node.children) < limit or not live):
                # pop() takes defaults first, then the best-ordered rules
                while node.untried:
                    action = node.untried.pop()
                    child_state = problem.apply(node.state, action)
                    if config.debug_checks and not child_state.terminal:
                        check_state_consistency(problem, child_state)
                    child_bound = problem.state_bound(child_state)
                    if child_bound <= best_obj:
                        n_pruned += 1
                        continue
                    child = SearchNode(child_state, child_bound)
                    tree_size += 1
                    node.children.append((action, child))
                    if child_state.terminal:
                        reward = problem.terminal_objective(child_state)
                        record_terminal(child_state, reward)
                        child.fully_explored = True
                    else:
                        _, reward = do_rollout(child_state)
                    path.append(child)
                    expanded = True
                    break
            if expanded:
                break
            if not live:
                node.fully_explored = True
                # dead end: unwind and restart from the root this iteration
                path.pop()
                if not path:
                    break
                node = path[-1]
                continue
            log_n = math.log(node.visits) if node.visits > 0 else 0.0
            best_child, best_ucb = None, -math.inf
            for a, c in live:
                ucb = (normalized(c.total_reward / c.visits)
                       + config.c_explore * math.sqrt(log_n / c.visits))
                if ucb > best_ucb:
                    best_child, best_ucb = c, ucb
            node = best_child
            path.append(node)
        if reward is not None:
            backup(path, reward)
        log.append({
            "iteration": it,
            "incumbent_objective": best_obj if best_obj > -math.inf else None,
            "tree_size": tree_size,
            "n_pruned": n_pruned,
        })

    if best_state is None:
        # only possible with a zero-iteration budget guard; close with arm 0
        best_state = problem.apply(problem.initial_state(), (-1, 0))
        best_obj = problem.terminal_objective(best_state)
    return SearchResult(
        decision_list=problem.decision_list(best_state),
        objective=best_obj,
        log=log,
        tree_size=tree_size,
        n_pruned=n_pruned,
        iterations_run=iterations_run,
        seed=config.seed,
    )


def root_parallel_search(
    ds: Dataset,
    scores: DRScoreMatrix,
    cands: CandidateSet,
    weights: ObjectiveWeights = ObjectiveWeights(),
    config: SearchConfig = SearchConfig(),
) -> SearchResult:
    """Independent UCT trees with distinct seeds; best incumbent wins.

    Trees share nothing mutable; ties go to the lowest seed, so the result
    is deterministic regardless of scheduling.
    """
    if config.n_trees == 1:
        return uct_search(ds, scores, cands, weights, config)
    configs = [replace(config, seed=config.seed + k, n_trees=1)
               for k in range(config.n_trees)]
    with ThreadPoolExecutor(max_workers=config.n_trees) as pool:
        results = list(pool.map(
            lambda c: uct_search(ds, scores, cands, weights, c), configs))
    best = results[0]
    for r in results[1:]:
        if r.objective > best.objective:
            best = r
    return best


@dataclass
class ExhaustiveResult:
    decision_list: DecisionList
    objective: float
    n_evaluated: int = 0
    n_pruned: int = 0


@dataclass
class BaselineResult:
    decision_list: DecisionList
    objective: float


def exhaustive_search(
    ds: Dataset,
    scores: DRScoreMatrix,
    cands: CandidateSet,
    weights: ObjectiveWeights = ObjectiveWeights(),
    L_max: int = 3,
    use_bound: bool = False,
    charge_default_full: bool = False,
    max_patterns: int = 10,
    max_depth: int = 3,
) -> ExhaustiveResult:
    """Exact argmax by enumerating every ordered rule sequence up to L_max.

    Patterns never repeat within a list (a repeat matches nothing new and
    can only add cost).  Enumeration order is lexicographic with defaults
    first at each prefix and strict-improvement updates, so ties resolve to
    the first list in that order.  Instances beyond the safety limits are
    refused.  With use_bound, subtrees whose optimistic bound cannot beat
    the incumbent are skipped and counted.
    """
    if len(cands.patterns) > max_patterns:
        raise SizeLimitError(
            f"{len(cands.patterns)} patterns exceeds the exhaustive limit "
            f"of {max_patterns}")
    if L_max > max_depth:
        raise SizeLimitError(f"L_max {L_max} exceeds the exhaustive limit of {max_depth}")

    problem = SearchProblem(ds, scores, cands, weights, charge_default_full)
    best_obj = -math.inf
    best_state: SearchState | None = None
    n_evaluated = 0
    n_pruned = 0

    def visit(state: SearchState, used: frozenset[int]) -> None:
        nonlocal best_obj, best_state, n_evaluated, n_pruned
        for d in range(problem.m):
            term = problem.apply(state, (-1, d))
            obj = problem.terminal_objective(term)
            n_evaluated += 1
            if obj > best_obj:
                best_obj = obj
                best_state = term
        if state.depth >= L_max:
            return
        for p in range(len(problem.patterns)):
            if p in used:
                continue
            for t in range(problem.m):
                child = problem.apply(state, (p, t))
                if use_bound and problem.state_bound(child) <= best_obj:
                    n_pruned += 1
                    continue
                visit(child, used | {p})

    visit(problem.initial_state(), frozenset())
    return ExhaustiveResult(
        decision_list=problem.decision_list(best_state),
        objective=best_obj,
        n_evaluated=n_evaluated,
        n_pruned=n_pruned,
    )


def greedy_baseline(
    ds: Dataset,
    scores: DRScoreMatrix,
    cands: CandidateSet,
    weights: ObjectiveWeights = ObjectiveWeights(),
    L_max: int = 4,
    charge_default_full: bool = False,
) -> BaselineResult:
    """Appends the single rule with the largest exact objective gain.

    After each append the default is re-optimized; the loop stops when no
    rule strictly improves the completed list's objective or L_max is hit.
    """
    problem = SearchProblem(ds, scores, cands, weights, charge_default_full)

    def best_completion(state: SearchState) -> tuple[float, int]:
        vals = [problem.terminal_objective(problem.apply(state, (-1, d)))
                for d in range(problem.m)]
        d = int(np.argmax(vals))
        return vals[d], d

    state = problem.initial_state()
    used: set[int] = set()
    best_obj, best_d = best_completion(state)
    while state.depth < L_max:
        step_best: tuple[float, int, int, SearchState] | None = None
        for p in range(len(problem.patterns)):
            if p in used or not (problem.masks[p] & ~state.covered).any():
                continue
            for t in range(problem.m):
                child = problem.apply(state, (p, t))
                obj, d = best_completion(child)
                if obj > best_obj and (step_best is None or obj > step_best[0]):
                    step_best = (obj, d, p, child)
        if step_best is None:
            break
        best_obj, best_d, p, state = step_best
        used.add(p)
    final = problem.apply(state, (-1, best_d))
    return BaselineResult(
        decision_list=problem.decision_list(final),
        objective=best_obj,
    )
