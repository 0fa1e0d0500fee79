"""Supervised rule-population classifier with per-instance feature tracking.

The model is a population of sparse IF:THEN rules evolved online: each
iteration matches one training instance, rewards the rules that match it and
predict its class, creates a covering rule when none does, and periodically
breeds new rules from the correct set with tournament selection, uniform
crossover, and mutation guided by expert-knowledge feature weights.  A
per-instance feature-tracking row accumulates which features the correct set
specified, via the recency-weighted update

    ave_new = ave + beta * (value - ave)

where ``value`` for a feature is the fitness-and-numerosity-weighted fraction
of the correct set that specifies it.

Training keeps the population in struct-of-arrays form so matching and
bookkeeping are vectorized; the public surface deals in plain `Rule`
objects with sparse dict conditions.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import DISCRETE, Dataset, FeatureDescriptor
from .relief import FeatureWeights

logger = logging.getLogger(__name__)

# Condition: feature index -> discrete value (float) or (lo, hi) interval.
Spec = float | tuple[float, float]
Condition = dict[int, Spec]

_LOG_WINDOW = 1000


class ModelFormatError(ValueError):
    """Raised when a serialized model cannot be read back."""


@dataclass
class Hyperparams:
    iterations: int = 200_000
    N: int = 2000
    nu: float = 10.0
    beta: float = 0.1  # feature-tracking learning rate
    theta_ga: float = 25.0
    chi: float = 0.8  # crossover probability
    mu: float = 0.04  # per-feature mutation probability
    theta_del: int = 20
    theta_sub: int = 20
    acc_sub: float = 0.99
    rsl_override: int | None = None
    seed: int = 0

    def validate(self) -> None:
        if self.iterations < 1 or self.N < 1:
            raise ValueError("iterations and N must be >= 1")
        if not 0 < self.beta <= 1:
            raise ValueError("beta must lie in (0, 1]")
        if self.nu < 1:
            raise ValueError("nu must be >= 1")


@dataclass
class Rule:
    """One macro-rule: a sparse condition, a class, and its bookkeeping."""

    condition: Condition
    klass: int
    numerosity: int = 1
    match_count: int = 0
    correct_count: int = 0
    accuracy: float = 0.0
    fitness: float = 0.0
    avg_match_set_size: float = 1.0
    ga_timestamp: int = 0
    init_timestamp: int = 0

    def key(self) -> tuple:
        """Hashable identity of (condition, class) for merge/absorption."""
        items = []
        for f in sorted(self.condition):
            spec = self.condition[f]
            if isinstance(spec, tuple):
                items.append((f, float(spec[0]), float(spec[1])))
            else:
                items.append((f, float(spec)))
        return (self.klass, tuple(items))


@dataclass
class FeatureTrackingMatrix:
    """Per training instance, per feature accumulated importance scores."""

    ids: list[str]
    matrix: np.ndarray

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        if self.matrix.shape[0] != len(self.ids):
            raise ValueError("row count must equal id count")
        if not np.isfinite(self.matrix).all():
            raise ValueError("feature tracking values must be finite")

    def row(self, instance_id: str) -> np.ndarray:
        return self.matrix[self.ids.index(instance_id)]


@dataclass
class Model:
    population: list[Rule]
    ft: FeatureTrackingMatrix
    hyperparams: Hyperparams
    features: list[FeatureDescriptor]
    class_names: list[str]
    majority_class: int
    rsl: int
    training_log: list[tuple[int, float]] = field(default_factory=list)


def compute_rsl(train: Dataset, N: int) -> int:
    """Rule specificity limit: min(p, ceil(ln N / ln mean-states))."""
    if N < 2:
        raise ValueError("N must be >= 2")
    p = train.n_features
    mean_states = sum(f.n_states for f in train.features) / p
    return min(p, math.ceil(math.log(N) / math.log(mean_states)))


def matches(rule: Rule, instance: np.ndarray) -> bool:
    """True when every specified feature is satisfied; missing values satisfy any spec."""
    for f, spec in rule.condition.items():
        v = instance[f]
        if isinstance(v, float) and math.isnan(v):
            continue
        if isinstance(spec, tuple):
            if not spec[0] <= v <= spec[1]:
                return False
        elif v != spec:
            return False
    return True


def subsumes(general: Rule, specific: Rule, theta_sub: int = 20, acc_sub: float = 0.99) -> bool:
    """Whether an experienced, accurate, strictly-more-general rule absorbs another."""
    if general.klass != specific.klass:
        return False
    if general.match_count <= theta_sub or general.accuracy <= acc_sub:
        return False
    wider = False
    for f, gspec in general.condition.items():
        if f not in specific.condition:
            return False
        sspec = specific.condition[f]
        if isinstance(gspec, tuple):
            if not isinstance(sspec, tuple):
                return False
            if not (gspec[0] <= sspec[0] and sspec[1] <= gspec[1]):
                return False
            if gspec[0] < sspec[0] or sspec[1] < gspec[1]:
                wider = True
        elif gspec != sspec:
            return False
    if len(general.condition) < len(specific.condition):
        return True
    return wider


def ft_update(ft_row: np.ndarray, correct_set: list[Rule], beta: float) -> np.ndarray:
    """Recency-weighted update of one feature-tracking row from a correct set.

    Only features specified by at least one correct-set rule move; the target
    for such a feature is the share of fitness*numerosity mass specifying it.
    """
    out = np.array(ft_row, dtype=np.float64)
    if not correct_set:
        return out
    total = sum(r.fitness * r.numerosity for r in correct_set)
    if total <= 0.0:
        return out
    mass = np.zeros(len(out))
    for r in correct_set:
        w = r.fitness * r.numerosity
        for f in r.condition:
            mass[f] += w
    touched = mass > 0.0
    target = mass[touched] / total
    out[touched] += beta * (target - out[touched])
    return out


def _deletion_votes(
    ams: np.ndarray, num: np.ndarray, fit: np.ndarray, mc: np.ndarray, theta_del: int
) -> np.ndarray:
    """Roulette weights for deletion: match-set size times numerosity, inflated
    for experienced rules whose per-copy fitness sits far below the mean."""
    votes = ams * num
    total_num = float(num.sum())
    if total_num <= 0:
        return votes
    mean_fit = float((fit * num).sum()) / total_num
    per_copy = fit / num
    low = (mc > theta_del) & (per_copy < 0.1 * mean_fit)
    if low.any():
        votes = votes.copy()
        scale = mean_fit / np.maximum(per_copy[low], 1e-12 * max(mean_fit, 1e-300))
        votes[low] *= scale
    return votes


def delete(population: list[Rule], N: int, rng: np.random.Generator) -> list[Rule]:
    """Shrink the population until its micro count is at most N.

    Roulette selection decrements one numerosity per round; rules reaching
    zero are dropped.  The input list is not modified.
    """
    pop = [clone_rule(r) for r in population]
    while sum(r.numerosity for r in pop) > N:
        ams = np.array([r.avg_match_set_size for r in pop])
        num = np.array([r.numerosity for r in pop], dtype=np.float64)
        fit = np.array([r.fitness for r in pop])
        mc = np.array([r.match_count for r in pop])
        votes = _deletion_votes(ams, num, fit, mc, theta_del=20)
        total = float(votes.sum())
        if total <= 0.0:
            choice = len(pop) - 1
        else:
            u = rng.random() * total
            choice = min(int(np.searchsorted(np.cumsum(votes), u, side="right")), len(pop) - 1)
        if pop[choice].numerosity > 1:
            pop[choice].numerosity -= 1
        else:
            pop.pop(choice)
    return pop


def clone_rule(r: Rule) -> Rule:
    return Rule(
        condition=dict(r.condition),
        klass=r.klass,
        numerosity=r.numerosity,
        match_count=r.match_count,
        correct_count=r.correct_count,
        accuracy=r.accuracy,
        fitness=r.fitness,
        avg_match_set_size=r.avg_match_set_size,
        ga_timestamp=r.ga_timestamp,
        init_timestamp=r.init_timestamp,
    )


def run_ga(
    correct_set: list[Rule],
    population: list[Rule],
    instance: np.ndarray,
    ek: np.ndarray,
    ft_row: np.ndarray | None,
    hp: Hyperparams,
    iteration: int,
    rng: np.random.Generator,
    features: list[FeatureDescriptor],
    rsl: int,
) -> list[Rule]:
    """One evolutionary step on a correct set; returns the updated population.

    Two tournament-selected parents produce two offspring via uniform
    crossover (probability chi) and per-feature mutation; each offspring is
    absorbed by an identical rule, subsumed by a parent, or inserted fresh.
    """
    if not correct_set:
        raise ValueError("correct set must not be empty")
    pop = list(population)
    by_key = {r.key(): r for r in pop}

    def tournament() -> Rule:
        size = max(1, int(round(0.2 * len(correct_set))))
        if size < len(correct_set):
            picks = sorted(rng.choice(len(correct_set), size=size, replace=False).tolist())
        else:
            picks = list(range(len(correct_set)))
        best = picks[0]
        for i in picks[1:]:
            if correct_set[i].fitness > correct_set[best].fitness:
                best = i
        return correct_set[best]

    klass = correct_set[0].klass
    p1, p2 = tournament(), tournament()
    if rng.random() < hp.chi:
        o1, o2 = _crossover(p1.condition, p2.condition, rng)
        _force_nonempty(o1, p1.condition, ek)
        _force_nonempty(o2, p2.condition, ek)
    else:
        o1, o2 = dict(p1.condition), dict(p2.condition)
    for cond, parents in ((o1, (p1, p2)), (o2, (p2, p1))):
        _mutate(cond, instance, ek, ft_row, rsl, rng, features, hp.mu)
        _repair(cond, rsl, ek)
        child = Rule(
            condition=cond,
            klass=klass,
            numerosity=1,
            avg_match_set_size=(p1.avg_match_set_size + p2.avg_match_set_size) / 2.0,
            ga_timestamp=iteration,
            init_timestamp=iteration,
        )
        existing = by_key.get(child.key())
        if existing is not None:
            existing.numerosity += 1
            continue
        for parent in parents:
            if subsumes(parent, child, hp.theta_sub, hp.acc_sub):
                parent.numerosity += 1
                break
        else:
            pop.append(child)
            by_key[child.key()] = child
    p1.ga_timestamp = iteration
    p2.ga_timestamp = iteration
    return pop


def balanced_accuracy(predictions, truth) -> float:
    """Mean per-class recall over the classes present in the truth labels."""
    predictions = list(predictions)
    truth = list(truth)
    if len(predictions) != len(truth):
        raise ValueError("predictions and truth must have equal length")
    classes = sorted(set(truth))
    extra = set(predictions) - set(classes)
    if extra:
        raise ValueError(f"predicted class absent from truth: {sorted(extra)}")
    recalls = []
    for c in classes:
        members = [i for i, t in enumerate(truth) if t == c]
        hit = sum(1 for i in members if predictions[i] == c)
        recalls.append(hit / len(members))
    return float(sum(recalls) / len(recalls))


# ---------------------------------------------------------------------------
# Training internals: population kept as struct-of-arrays for vector matching
# ---------------------------------------------------------------------------


class _Population:
    def __init__(self, p: int, cap: int = 256):
        self.p = p
        self.cap = cap
        self.mask = np.zeros((cap, p), dtype=bool)
        self.lo = np.zeros((cap, p))
        self.hi = np.zeros((cap, p))
        self.klass = np.zeros(cap, dtype=np.int64)
        self.num = np.zeros(cap, dtype=np.int64)
        self.mc = np.zeros(cap, dtype=np.int64)
        self.cc = np.zeros(cap, dtype=np.int64)
        self.acc = np.zeros(cap)
        self.fit = np.zeros(cap)
        self.ams = np.zeros(cap)
        self.ga_ts = np.zeros(cap, dtype=np.int64)
        self.init_ts = np.zeros(cap, dtype=np.int64)
        self.active = np.zeros(cap, dtype=bool)
        self.used = 0
        self.free: list[int] = []
        self.by_key: dict[tuple, int] = {}
        self.keys: list[tuple | None] = [None] * cap
        self.micro = 0

    def _grow(self) -> None:
        new_cap = self.cap * 2
        for name in ("mask", "lo", "hi"):
            arr = getattr(self, name)
            grown = np.zeros((new_cap, self.p), dtype=arr.dtype)
            grown[: self.cap] = arr
            setattr(self, name, grown)
        for name in ("klass", "num", "mc", "cc", "acc", "fit", "ams", "ga_ts", "init_ts", "active"):
            arr = getattr(self, name)
            grown = np.zeros(new_cap, dtype=arr.dtype)
            grown[: self.cap] = arr
            setattr(self, name, grown)
        self.keys.extend([None] * self.cap)
        self.cap = new_cap

    def insert(self, rule: Rule) -> int:
        key = rule.key()
        if self.free:
            r = self.free.pop()
        else:
            if self.used == self.cap:
                self._grow()
            r = self.used
            self.used += 1
        self.mask[r] = False
        self.lo[r] = 0.0
        self.hi[r] = 0.0
        for f, spec in rule.condition.items():
            self.mask[r, f] = True
            if isinstance(spec, tuple):
                self.lo[r, f], self.hi[r, f] = spec
            else:
                self.lo[r, f] = self.hi[r, f] = spec
        self.klass[r] = rule.klass
        self.num[r] = rule.numerosity
        self.mc[r] = rule.match_count
        self.cc[r] = rule.correct_count
        self.acc[r] = rule.accuracy
        self.fit[r] = rule.fitness
        self.ams[r] = rule.avg_match_set_size
        self.ga_ts[r] = rule.ga_timestamp
        self.init_ts[r] = rule.init_timestamp
        self.active[r] = True
        self.keys[r] = key
        self.by_key[key] = r
        self.micro += rule.numerosity
        return r

    def remove(self, r: int) -> None:
        self.micro -= int(self.num[r])
        self.active[r] = False
        del self.by_key[self.keys[r]]
        self.keys[r] = None
        self.free.append(r)

    def condition_of(self, r: int) -> Condition:
        cond: Condition = {}
        for f in np.where(self.mask[r, : self.p])[0]:
            lo, hi = self.lo[r, f], self.hi[r, f]
            cond[int(f)] = float(lo) if lo == hi else (float(lo), float(hi))
        return cond

    def rule_of(self, r: int, discrete: np.ndarray) -> Rule:
        cond: Condition = {}
        for f in np.where(self.mask[r, : self.p])[0]:
            lo, hi = float(self.lo[r, f]), float(self.hi[r, f])
            cond[int(f)] = lo if discrete[f] else (lo, hi)
        return Rule(
            condition=cond,
            klass=int(self.klass[r]),
            numerosity=int(self.num[r]),
            match_count=int(self.mc[r]),
            correct_count=int(self.cc[r]),
            accuracy=float(self.acc[r]),
            fitness=float(self.fit[r]),
            avg_match_set_size=float(self.ams[r]),
            ga_timestamp=int(self.ga_ts[r]),
            init_timestamp=int(self.init_ts[r]),
        )

    def match_rows(self, x: np.ndarray, nan_row: np.ndarray) -> np.ndarray:
        u = self.used
        ok = ~self.mask[:u] | ((self.lo[:u] <= x) & (x <= self.hi[:u])) | nan_row
        return np.where(ok.all(axis=1) & self.active[:u])[0]


def _weighted_pick(rng: np.random.Generator, weights: np.ndarray, k: int) -> np.ndarray:
    """Sample k distinct indices with probability proportional to weights."""
    w = np.maximum(weights, 0.0) + 1e-12
    w = w / w.sum()
    return rng.choice(len(w), size=k, replace=False, p=w)


def _blend(ek: np.ndarray, ft_row: np.ndarray | None) -> np.ndarray:
    if ft_row is None or ft_row.sum() <= 0.0:
        ft_part = np.full(len(ek), 1.0 / len(ek))
    else:
        ft_part = ft_row / ft_row.sum()
    return 0.5 * ek + 0.5 * ft_part


def cover(
    instance: np.ndarray,
    klass: int,
    ek: np.ndarray,
    ft_row: np.ndarray | None,
    rsl: int,
    rng: np.random.Generator,
    features: list[FeatureDescriptor],
    iteration: int = 0,
    match_set_size: int = 1,
) -> Rule:
    """Create a rule matching the given instance with its class.

    The number of specified features is uniform on [1, rsl]; features are
    drawn without replacement, weighted by the half-and-half blend of expert
    knowledge and the instance's own (normalized) feature-tracking row.
    """
    if rsl < 1:
        raise ValueError("rsl must be >= 1")
    usable = np.where(~np.isnan(instance))[0]
    cond: Condition = {}
    if usable.size == 0:
        # Degenerate all-missing instance: specify one random feature at its
        # domain midpoint so the rule is not fully general.
        logger.warning("covering an all-missing instance with a midpoint spec")
        f = int(rng.integers(0, len(instance)))
        desc = features[f]
        if desc.kind == DISCRETE:
            cond[f] = float(desc.domain[len(desc.domain) // 2])
        else:
            lo, hi = desc.domain
            mid = (lo + hi) / 2.0
            r = 0.25 * desc.value_range
            cond[f] = (mid - r, mid + r)
    else:
        k = int(rng.integers(1, min(rsl, usable.size) + 1))
        w = _blend(ek, ft_row)[usable]
        chosen = usable[_weighted_pick(rng, w, k)]
        for f in sorted(int(c) for c in chosen):
            v = float(instance[f])
            if features[f].kind == DISCRETE:
                cond[f] = v
            else:
                r = rng.uniform(0.1, 0.5) * features[f].value_range
                cond[f] = (v - r, v + r)
    return Rule(
        condition=cond,
        klass=klass,
        numerosity=1,
        match_count=1,
        correct_count=1,
        accuracy=1.0,
        fitness=1.0,
        avg_match_set_size=float(match_set_size),
        ga_timestamp=iteration,
        init_timestamp=iteration,
    )


def _tournament(pop: _Population, cset: np.ndarray, rng: np.random.Generator) -> int:
    size = max(1, int(round(0.2 * len(cset))))
    entrants = rng.choice(cset, size=size, replace=False) if size < len(cset) else cset
    entrants = np.sort(entrants)
    best = entrants[np.argmax(pop.fit[entrants])]  # argmax takes the first on ties
    return int(best)


def _mutate(
    cond: Condition,
    instance: np.ndarray,
    ek: np.ndarray,
    ft_row: np.ndarray | None,
    rsl: int,
    rng: np.random.Generator,
    features: list[FeatureDescriptor],
    mu: float,
) -> None:
    p = len(instance)
    blend = None
    for f in range(p):
        if rng.random() >= mu:
            continue
        if f in cond:
            if len(cond) > 1:
                del cond[f]
        elif len(cond) < rsl:
            if blend is None:
                blend = _blend(ek, ft_row)
            candidates = np.array(
                [g for g in range(p) if g not in cond and not math.isnan(instance[g])]
            )
            if candidates.size == 0:
                continue
            g = int(candidates[_weighted_pick(rng, blend[candidates], 1)[0]])
            v = float(instance[g])
            if features[g].kind == DISCRETE:
                cond[g] = v
            else:
                r = rng.uniform(0.1, 0.5) * features[g].value_range
                cond[g] = (v - r, v + r)
    # Interval jitter for specified continuous features.
    for f, spec in list(cond.items()):
        if not isinstance(spec, tuple):
            continue
        if rng.random() >= mu:
            continue
        r = 0.1 * features[f].value_range
        lo = spec[0] + rng.uniform(-r, r)
        hi = spec[1] + rng.uniform(-r, r)
        if lo > hi:
            lo, hi = hi, lo
        cond[f] = (lo, hi)


def _repair(cond: Condition, rsl: int, ek: np.ndarray) -> None:
    while len(cond) > rsl:
        worst = min(cond, key=lambda f: (ek[f], -f))
        del cond[worst]


def _crossover(
    c1: Condition, c2: Condition, rng: np.random.Generator
) -> tuple[Condition, Condition]:
    union = sorted(set(c1) | set(c2))
    o1: Condition = {}
    o2: Condition = {}
    for f in union:
        a, b = c1.get(f), c2.get(f)
        if rng.random() < 0.5:
            a, b = b, a
        if a is not None:
            o1[f] = a
        if b is not None:
            o2[f] = b
    return o1, o2


def _force_nonempty(
    cond: Condition, parent: Condition, ek: np.ndarray
) -> None:
    if not cond:
        f = max(parent, key=lambda g: (ek[g], -g))
        cond[f] = parent[f]


class _Trainer:
    """Owns one fit() run; all randomness flows through a single generator."""

    def __init__(self, train: Dataset, hp: Hyperparams, ek: FeatureWeights):
        hp.validate()
        if len(set(train.y.tolist())) < 2:
            raise ValueError("training data must contain at least 2 classes")
        if train.n_instances == 0:
            raise ValueError("training set is empty")
        if ek.normalized is None:
            from .relief import normalize_weights

            ek = normalize_weights(ek)
        self.train = train
        self.hp = hp
        self.ek = np.asarray(ek.normalized, dtype=np.float64)
        self.rng = np.random.default_rng(hp.seed)
        self.rsl = hp.rsl_override if hp.rsl_override is not None else compute_rsl(train, max(hp.N, 2))
        self.pop = _Population(train.n_features)
        self.ft = np.zeros((train.n_instances, train.n_features))
        self.discrete = np.array([f.kind == DISCRETE for f in train.features])
        self.nan_rows = np.isnan(train.X)
        counts = np.bincount(train.y, minlength=len(train.class_names))
        self.majority = int(np.argmax(counts))
        self.log: list[tuple[int, float]] = []

    def run(self) -> Model:
        hp, pop, rng = self.hp, self.pop, self.rng
        X, y = self.train.X, self.train.y
        n = len(y)
        order = np.array([], dtype=np.int64)
        window_hits = 0
        window_seen = 0
        # Entry 0 is the untrained baseline: an empty population predicts the
        # majority class for everything.
        self.log.append((0, float((y == self.majority).mean())))
        for it in range(hp.iterations):
            k = it % n
            if k == 0:
                order = rng.permutation(n)
            i = int(order[k])
            x = X[i]
            target = int(y[i])
            m_rows = pop.match_rows(x, self.nan_rows[i])

            # Online progress estimate from the pre-update vote.
            if m_rows.size:
                votes = np.bincount(
                    pop.klass[m_rows],
                    weights=pop.fit[m_rows] * pop.num[m_rows],
                    minlength=len(self.train.class_names),
                )
                top = np.flatnonzero(votes == votes.max())
                guess = int(top[0]) if top.size == 1 else self.majority
            else:
                guess = self.majority
            window_hits += int(guess == target)
            window_seen += 1
            if window_seen == _LOG_WINDOW or it == hp.iterations - 1:
                self.log.append((it + 1, window_hits / window_seen))
                window_hits = window_seen = 0

            if not np.any(pop.klass[m_rows] == target):
                msize = int(pop.num[m_rows].sum()) + 1
                ft_row = self.ft[i]
                rule = cover(
                    x, target, self.ek, ft_row, self.rsl, rng, self.train.features, it, msize
                )
                fresh = pop.insert(rule)
                m_rows = np.append(m_rows, fresh)
                counted = m_rows[m_rows != fresh]
            else:
                counted = m_rows

            # Match/correct bookkeeping for the match set.
            if counted.size:
                pop.mc[counted] += 1
                correct_mask = pop.klass[counted] == target
                pop.cc[counted[correct_mask]] += 1
                pop.acc[counted] = pop.cc[counted] / pop.mc[counted]
                pop.fit[counted] = pop.acc[counted] ** hp.nu
                msize = int(pop.num[m_rows].sum())
                seen = pop.mc[counted].astype(np.float64)
                lr = np.maximum(1.0 / seen, 0.1)
                pop.ams[counted] += lr * (msize - pop.ams[counted])

            c_rows = m_rows[pop.klass[m_rows] == target]
            if c_rows.size:
                self._ft_update(i, c_rows)
                wsum = pop.num[c_rows].sum()
                mean_ts = float((pop.ga_ts[c_rows] * pop.num[c_rows]).sum()) / float(wsum)
                if it - mean_ts > hp.theta_ga:
                    self._run_ga(c_rows, x, i, it)
                    pop.ga_ts[c_rows] = it

            while pop.micro > hp.N:
                self._delete_one()
        return self._finish()

    def _ft_update(self, i: int, c_rows: np.ndarray) -> None:
        pop = self.pop
        w = pop.fit[c_rows] * pop.num[c_rows]
        total = float(w.sum())
        if total <= 0.0:
            return
        mass = pop.mask[c_rows].astype(np.float64).T @ w
        touched = mass > 0.0
        row = self.ft[i]
        row[touched] += self.hp.beta * (mass[touched] / total - row[touched])

    def _absorb_or_insert(self, cond: Condition, klass: int, parents: list[int], it: int) -> None:
        pop = self.pop
        probe = Rule(condition=cond, klass=klass)
        existing = pop.by_key.get(probe.key())
        if existing is not None:
            pop.num[existing] += 1
            pop.micro += 1
            return
        for pr in parents:
            parent_rule = pop.rule_of(pr, self.discrete)
            if subsumes(parent_rule, probe, self.hp.theta_sub, self.hp.acc_sub):
                pop.num[pr] += 1
                pop.micro += 1
                return
        ams = float(np.mean([pop.ams[pr] for pr in parents]))
        pop.insert(
            Rule(
                condition=cond,
                klass=klass,
                numerosity=1,
                match_count=0,
                correct_count=0,
                accuracy=0.0,
                fitness=0.0,
                avg_match_set_size=ams,
                ga_timestamp=it,
                init_timestamp=it,
            )
        )

    def _run_ga(self, c_rows: np.ndarray, x: np.ndarray, i: int, it: int) -> None:
        pop, hp, rng = self.pop, self.hp, self.rng
        p1 = _tournament(pop, c_rows, rng)
        p2 = _tournament(pop, c_rows, rng)
        cond1 = pop.condition_of(p1)
        cond2 = pop.condition_of(p2)
        if rng.random() < hp.chi:
            o1, o2 = _crossover(cond1, cond2, rng)
            _force_nonempty(o1, cond1, self.ek)
            _force_nonempty(o2, cond2, self.ek)
        else:
            o1, o2 = dict(cond1), dict(cond2)
        ft_row = self.ft[i]
        klass = int(self.train.y[i])
        for cond, parents in ((o1, [p1, p2]), (o2, [p2, p1])):
            _mutate(cond, x, self.ek, ft_row, self.rsl, rng, self.train.features, hp.mu)
            _repair(cond, self.rsl, self.ek)
            self._absorb_or_insert(cond, klass, parents, it)

    def _delete_one(self) -> None:
        pop = self.pop
        rows = np.where(pop.active[: pop.used])[0]
        votes = _deletion_votes(
            pop.ams[rows],
            pop.num[rows].astype(np.float64),
            pop.fit[rows],
            pop.mc[rows],
            self.hp.theta_del,
        )
        total = float(votes.sum())
        if total <= 0.0:
            choice = len(rows) - 1
        else:
            u = self.rng.random() * total
            choice = int(np.searchsorted(np.cumsum(votes), u, side="right"))
            choice = min(choice, len(rows) - 1)
        r = int(rows[choice])
        if pop.num[r] > 1:
            pop.num[r] -= 1
            pop.micro -= 1
        else:
            pop.remove(r)

    def _finish(self) -> Model:
        pop = self.pop
        rules = [
            pop.rule_of(int(r), self.discrete) for r in np.where(pop.active[: pop.used])[0]
        ]
        ft = FeatureTrackingMatrix(list(self.train.instance_ids), self.ft)
        return Model(
            population=rules,
            ft=ft,
            hyperparams=self.hp,
            features=list(self.train.features),
            class_names=list(self.train.class_names),
            majority_class=self.majority,
            rsl=self.rsl,
            training_log=self.log,
        )


def fit(train: Dataset, hp: Hyperparams, ek: FeatureWeights) -> Model:
    """Train a rule population on one training split."""
    return _Trainer(train, hp, ek).run()


# ---------------------------------------------------------------------------
# Prediction and evaluation
# ---------------------------------------------------------------------------


def predict(model: Model, instance: np.ndarray) -> tuple[int, dict[int, float]]:
    """Fitness-and-numerosity-weighted vote among matching rules.

    Empty match sets and exact vote ties fall back to the majority training
    class, so prediction is deterministic.
    """
    votes: dict[int, float] = {}
    for rule in model.population:
        if matches(rule, instance):
            votes[rule.klass] = votes.get(rule.klass, 0.0) + rule.fitness * rule.numerosity
    if not votes:
        return model.majority_class, votes
    best = max(votes.values())
    winners = [c for c, v in votes.items() if v == best]
    if len(winners) > 1:
        return model.majority_class, votes
    return winners[0], votes


def predict_batch(model: Model, X: np.ndarray) -> np.ndarray:
    """Vectorized predict() over rows of X; same result, used by the pipeline."""
    p = X.shape[1]
    rules = model.population
    if not rules:
        return np.full(X.shape[0], model.majority_class, dtype=np.int64)
    mask = np.zeros((len(rules), p), dtype=bool)
    lo = np.zeros((len(rules), p))
    hi = np.zeros((len(rules), p))
    klass = np.zeros(len(rules), dtype=np.int64)
    weight = np.zeros(len(rules))
    for r, rule in enumerate(rules):
        klass[r] = rule.klass
        weight[r] = rule.fitness * rule.numerosity
        for f, spec in rule.condition.items():
            mask[r, f] = True
            if isinstance(spec, tuple):
                lo[r, f], hi[r, f] = spec
            else:
                lo[r, f] = hi[r, f] = spec
    n_classes = len(model.class_names)
    out = np.empty(X.shape[0], dtype=np.int64)
    for i in range(X.shape[0]):
        x = X[i]
        ok = ~mask | ((lo <= x) & (x <= hi)) | np.isnan(x)
        hits = ok.all(axis=1)
        if not hits.any():
            out[i] = model.majority_class
            continue
        cls = klass[hits]
        present = np.unique(cls)
        if present.size == 1:
            out[i] = present[0]
            continue
        votes = np.bincount(cls, weights=weight[hits], minlength=n_classes)
        sub = votes[present]
        top = present[sub == sub.max()]
        out[i] = top[0] if top.size == 1 else model.majority_class
    return out


# ---------------------------------------------------------------------------
# Rule compaction
# ---------------------------------------------------------------------------


def compact(
    population: list[Rule], train: Dataset, strategy: str = "default", theta_sub: int = 20
) -> list[Rule]:
    """Drop inexperienced or redundant rules after training.

    The default strategy removes rules at or below chance accuracy or with
    experience below ``theta_sub``, then greedily keeps rules (best accuracy,
    numerosity, generality first) that correctly cover at least one
    still-uncovered training instance.
    """
    if strategy != "default":
        raise ValueError(f"unknown compaction strategy {strategy!r}")
    kept = [r for r in population if r.accuracy > 0.5 and r.match_count >= theta_sub]
    p = train.n_features
    kept.sort(
        key=lambda r: (r.accuracy, r.numerosity, p - len(r.condition), r.key()),
        reverse=True,
    )
    covered = np.zeros(train.n_instances, dtype=bool)
    out = []
    for rule in kept:
        hit = False
        for i in range(train.n_instances):
            if covered[i] or train.y[i] != rule.klass:
                continue
            if matches(rule, train.X[i]):
                covered[i] = True
                hit = True
        if hit:
            out.append(rule)
        if covered.all():
            break
    return out


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

_FORMAT = "rulescope-model"
_VERSION = 1


def _cond_to_json(cond: Condition) -> list[dict]:
    out = []
    for f in sorted(cond):
        spec = cond[f]
        if isinstance(spec, tuple):
            out.append({"f": f, "lo": spec[0], "hi": spec[1]})
        else:
            out.append({"f": f, "eq": spec})
    return out


def _cond_from_json(entries: list[dict]) -> Condition:
    cond: Condition = {}
    for e in entries:
        if "eq" in e:
            cond[int(e["f"])] = float(e["eq"])
        else:
            cond[int(e["f"])] = (float(e["lo"]), float(e["hi"]))
    return cond


def save_model(model: Model, path) -> None:
    doc = {
        "format": _FORMAT,
        "version": _VERSION,
        "hyperparams": asdict(model.hyperparams),
        "features": [
            {
                "name": f.name,
                "kind": f.kind,
                "domain": list(f.domain),
                "categories": list(f.categories) if f.categories else None,
            }
            for f in model.features
        ],
        "class_names": model.class_names,
        "majority_class": model.majority_class,
        "rsl": model.rsl,
        "population": [
            {
                "condition": _cond_to_json(r.condition),
                "class": r.klass,
                "numerosity": r.numerosity,
                "match_count": r.match_count,
                "correct_count": r.correct_count,
                "accuracy": r.accuracy,
                "fitness": r.fitness,
                "avg_match_set_size": r.avg_match_set_size,
                "ga_timestamp": r.ga_timestamp,
                "init_timestamp": r.init_timestamp,
            }
            for r in model.population
        ],
        "ft": {"ids": model.ft.ids, "matrix": [list(map(float, row)) for row in model.ft.matrix]},
        "training_log": [[it, acc] for it, acc in model.training_log],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_model(path) -> Model:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ModelFormatError(f"{path}: not a valid model file ({exc})") from None
    if not isinstance(doc, dict) or doc.get("format") != _FORMAT:
        raise ModelFormatError(f"{path}: missing model format marker")
    if doc.get("version") != _VERSION:
        raise ModelFormatError(
            f"{path}: unsupported model version {doc.get('version')!r}, expected {_VERSION}"
        )
    try:
        features = [
            FeatureDescriptor(
                e["name"],
                e["kind"],
                tuple(e["domain"]),
                tuple(e["categories"]) if e["categories"] else None,
            )
            for e in doc["features"]
        ]
        population = [
            Rule(
                condition=_cond_from_json(e["condition"]),
                klass=int(e["class"]),
                numerosity=int(e["numerosity"]),
                match_count=int(e["match_count"]),
                correct_count=int(e["correct_count"]),
                accuracy=float(e["accuracy"]),
                fitness=float(e["fitness"]),
                avg_match_set_size=float(e["avg_match_set_size"]),
                ga_timestamp=int(e["ga_timestamp"]),
                init_timestamp=int(e["init_timestamp"]),
            )
            for e in doc["population"]
        ]
        ft = FeatureTrackingMatrix(
            list(doc["ft"]["ids"]),
            np.array(doc["ft"]["matrix"], dtype=np.float64).reshape(
                len(doc["ft"]["ids"]), len(features)
            ),
        )
        model = Model(
            population=population,
            ft=ft,
            hyperparams=Hyperparams(**doc["hyperparams"]),
            features=features,
            class_names=list(doc["class_names"]),
            majority_class=int(doc["majority_class"]),
            rsl=int(doc["rsl"]),
            training_log=[(int(a), float(b)) for a, b in doc["training_log"]],
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"{path}: truncated or inconsistent model file ({exc})") from None
    return model


def export_rules_csv(population: list[Rule], features: list[FeatureDescriptor], class_names: list[str], path) -> None:
    """Rule population CSV, one macro-rule per row."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "rule_id",
                "class",
                "numerosity",
                "accuracy",
                "fitness",
                "match_count",
                "correct_count",
                "condition",
            ]
        )
        for rid, r in enumerate(population):
            tokens = []
            for f in sorted(r.condition):
                spec = r.condition[f]
                name = features[f].name
                if isinstance(spec, tuple):
                    tokens.append(f"{name}∈[{spec[0]:.6g},{spec[1]:.6g}]")
                else:
                    tokens.append(f"{name}={features[f].decode(spec)}")
            writer.writerow(
                [
                    rid,
                    class_names[r.klass],
                    r.numerosity,
                    f"{r.accuracy:.6f}",
                    f"{r.fitness:.6g}",
                    r.match_count,
                    r.correct_count,
                    ";".join(tokens),
                ]
            )
