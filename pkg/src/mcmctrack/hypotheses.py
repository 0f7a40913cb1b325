"""Hypotheses, association events, transition priors, weight updates, pruning.

A hypothesis is a labeled set of Gaussian tracks plus a probability weight;
an association event is one child skeleton: per-return assignment (object
label, birth, or clutter) plus a set of deaths. Weights are carried in
log-space throughout; normalization uses log-sum-exp.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from enum import Enum
from math import comb, factorial
from typing import Iterable, Sequence

from .errors import ConfigError, DegenerateUpdateError, InvalidEventError
from .filters import GaussianTrack

# Reserved assignment entries. Track labels must not collide with these.
BIRTH = "__birth__"
CLUTTER = "__clutter__"

_RESERVED = {BIRTH, CLUTTER}


class PruneStrategy(str, Enum):
    TOP_K = "top_k"
    SAMPLE = "sample"


class BirthDeathMode(str, Enum):
    """RAW keeps the plain alpha^Nb * beta^Nd instance probability;
    NORMALIZED uses the full binomial pmf including complement factors, so
    instance probabilities sum to one over all instances."""

    RAW = "raw"
    NORMALIZED = "normalized"


@dataclass(frozen=True)
class BirthDeathConfig:
    alpha: float = 0.01
    beta: float = 0.01
    n_pixels: int = 50
    mode: BirthDeathMode = BirthDeathMode.RAW

    def __post_init__(self) -> None:
        if not (0.0 <= self.alpha <= 1.0):
            raise ConfigError("birth_death.alpha must lie in [0, 1]")
        if not (0.0 <= self.beta <= 1.0):
            raise ConfigError("birth_death.beta must lie in [0, 1]")
        if self.n_pixels < 1:
            raise ConfigError("birth_death.n_pixels must be >= 1")


@dataclass(frozen=True, eq=False)
class Hypothesis:
    """One complete explanation of the data so far: labeled tracks plus a
    probability weight (stored as log_weight)."""

    id: str
    parent_id: str | None
    log_weight: float
    tracks: tuple[GaussianTrack, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "tracks", tuple(self.tracks))
        labels = [t.label for t in self.tracks]
        if len(set(labels)) != len(labels):
            raise InvalidEventError(f"hypothesis {self.id}: duplicate track labels")
        if any(lbl in _RESERVED for lbl in labels):
            raise InvalidEventError(f"hypothesis {self.id}: reserved label in use")
        if math.isnan(self.log_weight) or self.log_weight > 1e-9:
            raise ValueError(f"hypothesis {self.id}: weight must lie in [0, 1]")

    @property
    def weight(self) -> float:
        return math.exp(self.log_weight)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(t.label for t in self.tracks)

    def track_by_label(self, label: str) -> GaussianTrack:
        for t in self.tracks:
            if t.label == label:
                return t
        raise KeyError(label)


@dataclass(frozen=True)
class AssociationEvent:
    """Child-hypothesis skeleton: one assignment per return (a track label,
    BIRTH, or CLUTTER) plus the set of labels that die this scan."""

    assignments: tuple[str, ...]
    deaths: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        object.__setattr__(self, "assignments", tuple(self.assignments))
        object.__setattr__(self, "deaths", frozenset(self.deaths))
        objs = [a for a in self.assignments if a not in _RESERVED]
        if len(set(objs)) != len(objs):
            raise InvalidEventError("an object label appears twice in assignments")
        if self.deaths & set(objs):
            raise InvalidEventError("a dead object appears in assignments")

    @property
    def n_births(self) -> int:
        return sum(1 for a in self.assignments if a == BIRTH)

    @property
    def n_deaths(self) -> int:
        return len(self.deaths)

    @property
    def associated_labels(self) -> tuple[str, ...]:
        return tuple(a for a in self.assignments if a not in _RESERVED)

    def canonical_key(self) -> tuple:
        """Dedup key: assignment entries in frame order plus sorted deaths."""
        return (self.assignments, tuple(sorted(self.deaths)))

    def validate_against(self, parent_labels: Iterable[str]) -> None:
        labels = set(parent_labels)
        missing = [a for a in self.associated_labels if a not in labels]
        if missing:
            raise InvalidEventError(f"assignments reference unknown labels {missing}")
        extra = self.deaths - labels
        if extra:
            raise InvalidEventError(f"deaths reference unknown labels {sorted(extra)}")


def _comb0(n: int, k: int) -> int:
    """Binomial coefficient that is zero outside 0 <= k <= n."""
    if k < 0 or k > n or n < 0:
        return 0
    return comb(n, k)


def count_associations(n_objects: int, n_returns: int) -> int:
    """Number of data-association children of an n_objects hypothesis given
    n_returns: sum over n of C(M,n) C(m,n) n! (arbitrary precision)."""
    if n_objects < 0 or n_returns < 0:
        raise ValueError("counts must be non-negative")
    return sum(
        comb(n_objects, n) * comb(n_returns, n) * factorial(n)
        for n in range(min(n_objects, n_returns) + 1)
    )


def count_grandchildren(
    n_objects: int,
    n_returns: int,
    n_pixels: int,
    *,
    allow_births: bool = True,
    allow_deaths: bool = True,
) -> int:
    """Number of distinct (birth/death instance, data association) pairs,
    by direct summation over birth and death counts:

        sum_{Nb} sum_{Nd} C(N,Nb) C(M,Nd) A(M + Nb - Nd, m)

    The allow flags collapse the corresponding sum to its zero term (used
    when a rate is exactly zero, making those instances impossible).
    """
    if min(n_objects, n_returns, n_pixels) < 0:
        raise ValueError("counts must be non-negative")
    b_max = n_pixels if allow_births else 0
    d_max = n_objects if allow_deaths else 0
    total = 0
    for n_b in range(b_max + 1):
        cb = comb(n_pixels, n_b) if allow_births else 1
        for n_d in range(d_max + 1):
            cd = comb(n_objects, n_d) if allow_deaths else 1
            total += cb * cd * count_associations(n_objects + n_b - n_d, n_returns)
    return total


def count_grandchildren_by_net_change(n_objects: int, n_returns: int, n_pixels: int) -> int:
    """Alternative grandchild count grouping instances by net object-count
    change. Kept verbatim for cross-validation: its second summation starts
    one index early, which double-counts the net +1 and net 0 groups, so it
    exceeds count_grandchildren. The selftest report records the difference.
    """
    m_objects, n = n_objects, n_pixels
    total = 0
    for k in range(0, n + 1):
        a_plus = sum(_comb0(n, k + j) * _comb0(m_objects, j) for j in range(0, n + 1))
        total += a_plus * count_associations(m_objects + k, n_returns)
    for k in range(-1, m_objects + 1):
        a_minus = sum(
            _comb0(m_objects, k + j) * _comb0(n, j) for j in range(0, m_objects - k + 1)
        )
        total += a_minus * count_associations(m_objects - k, n_returns)
    return total


def association_prior(n_objects: int, n_returns: int, k: int, p_d: float) -> float:
    """Prior probability of one data association in which exactly k of the
    n_objects are matched to returns: p_d^k (1-p_d)^(M-k) / (C(m,k) k!)."""
    if not 0 <= k <= min(n_objects, n_returns):
        raise InvalidEventError(
            f"associated count k={k} out of range for M={n_objects}, m={n_returns}"
        )
    return (
        p_d ** k
        * (1.0 - p_d) ** (n_objects - k)
        / (comb(n_returns, k) * factorial(k))
    )


def log_association_prior(n_objects: int, n_returns: int, k: int, p_d: float) -> float:
    """Log of association_prior with exact handling of p_d in {0, 1}."""
    if not 0 <= k <= min(n_objects, n_returns):
        raise InvalidEventError(
            f"associated count k={k} out of range for M={n_objects}, m={n_returns}"
        )
    out = -math.log(comb(n_returns, k)) - math.lgamma(k + 1)
    out += _xlogy(k, p_d)
    out += _xlogy(n_objects - k, 1.0 - p_d)
    return out


def _xlogy(n: int, value: float) -> float:
    """n * log(value) with the 0 * log(0) = 0 convention."""
    if n == 0:
        return 0.0
    if value <= 0.0:
        return -math.inf
    return n * math.log(value)


def birth_death_prior(n_b: int, n_d: int, n_objects: int, cfg: BirthDeathConfig) -> float:
    """Prior probability of one specific instance of n_b births and n_d
    deaths from an n_objects parent."""
    if not 0 <= n_b <= cfg.n_pixels:
        raise InvalidEventError(f"birth count {n_b} out of range for N={cfg.n_pixels}")
    if not 0 <= n_d <= n_objects:
        raise InvalidEventError(f"death count {n_d} out of range for M={n_objects}")
    p = cfg.alpha ** n_b * cfg.beta ** n_d
    if cfg.mode is BirthDeathMode.NORMALIZED:
        p *= (1.0 - cfg.alpha) ** (cfg.n_pixels - n_b) * (1.0 - cfg.beta) ** (n_objects - n_d)
    return p


def log_birth_death_prior(
    n_b: int, n_d: int, n_objects: int, cfg: BirthDeathConfig
) -> float:
    if not 0 <= n_b <= cfg.n_pixels:
        raise InvalidEventError(f"birth count {n_b} out of range for N={cfg.n_pixels}")
    if not 0 <= n_d <= n_objects:
        raise InvalidEventError(f"death count {n_d} out of range for M={n_objects}")
    out = _xlogy(n_b, cfg.alpha) + _xlogy(n_d, cfg.beta)
    if cfg.mode is BirthDeathMode.NORMALIZED:
        out += _xlogy(cfg.n_pixels - n_b, 1.0 - cfg.alpha)
        out += _xlogy(n_objects - n_d, 1.0 - cfg.beta)
    return out


def child_prior(
    event: AssociationEvent,
    parent: Hypothesis,
    cfg: BirthDeathConfig,
    p_d: float,
    n_returns: int,
) -> float:
    """Transition prior of one child event: birth/death instance probability
    times the association prior over the post-birth/death object count."""
    return math.exp(log_child_prior(event, parent, cfg, p_d, n_returns))


def log_child_prior(
    event: AssociationEvent,
    parent: Hypothesis,
    cfg: BirthDeathConfig,
    p_d: float,
    n_returns: int,
) -> float:
    if len(event.assignments) != n_returns:
        raise InvalidEventError(
            f"event has {len(event.assignments)} assignments for {n_returns} returns"
        )
    event.validate_against(parent.labels)
    n_b = event.n_births
    n_d = event.n_deaths
    if n_b > cfg.n_pixels:
        return -math.inf  # more births than pixels: possible event, zero mass
    k = len(event.associated_labels)
    m_child = len(parent.tracks) + n_b - n_d
    return log_birth_death_prior(n_b, n_d, len(parent.tracks), cfg) + log_association_prior(
        m_child, n_returns, k, p_d
    )


def log_sum_exp(values: Sequence[float]) -> float:
    top = max(values)
    if top == -math.inf:
        return -math.inf
    return top + math.log(sum(math.exp(v - top) for v in values))


def bayes_update_weights(children: Sequence[tuple[float, float]]) -> list[float]:
    """Posterior weights w*l / sum(w*l) for (prior weight, likelihood) pairs,
    computed in log-space with max subtraction."""
    if not children:
        raise DegenerateUpdateError("no children to update")
    logs = []
    for w, lik in children:
        if w < 0.0 or lik < 0.0:
            raise ValueError("weights and likelihoods must be non-negative")
        logs.append(
            (math.log(w) if w > 0.0 else -math.inf)
            + (math.log(lik) if lik > 0.0 else -math.inf)
        )
    return bayes_update_log_weights(logs)


def bayes_update_log_weights(log_scores: Sequence[float]) -> list[float]:
    """Normalize log-space scores to linear posterior weights."""
    total = log_sum_exp(log_scores)
    if total == -math.inf or math.isnan(total):
        raise DegenerateUpdateError("all children carry zero posterior mass")
    return [math.exp(v - total) for v in log_scores]


def normalize(hypotheses: Sequence[Hypothesis]) -> list[Hypothesis]:
    """Rescale log-weights so linear weights sum to one."""
    total = log_sum_exp([h.log_weight for h in hypotheses])
    if total == -math.inf:
        raise DegenerateUpdateError("hypothesis set has zero total weight")
    return [
        Hypothesis(h.id, h.parent_id, min(h.log_weight - total, 0.0), h.tracks)
        for h in hypotheses
    ]


def prune(
    hypotheses: Sequence[Hypothesis],
    h_inf: int,
    strategy: PruneStrategy = PruneStrategy.TOP_K,
    rng: random.Random | None = None,
) -> list[Hypothesis]:
    """Reduce to at most h_inf hypotheses and renormalize.

    TOP_K keeps the highest-weight hypotheses (ties broken by id, so the
    result is deterministic); SAMPLE draws without replacement with
    probability proportional to weight and requires an rng.
    """
    if not hypotheses:
        raise ValueError("hypothesis list must be non-empty")
    if h_inf < 1:
        raise ConfigError("h_inf must be >= 1")
    if len(hypotheses) <= h_inf:
        return normalize(hypotheses)
    if strategy is PruneStrategy.TOP_K:
        kept = sorted(hypotheses, key=lambda h: (-h.log_weight, h.id))[:h_inf]
        return normalize(kept)
    if rng is None:
        raise ConfigError("SAMPLE pruning requires an rng")
    pool = list(hypotheses)
    weights = [h.weight for h in pool]
    kept = []
    for _ in range(h_inf):
        total = sum(weights)
        if total <= 0.0:
            break
        u = rng.random() * total
        acc = 0.0
        idx = len(pool) - 1
        for i, w in enumerate(weights):
            acc += w
            if u < acc:
                idx = i
                break
        kept.append(pool.pop(idx))
        weights.pop(idx)
    return normalize(kept)


def weight_entropy(hypotheses: Sequence[Hypothesis]) -> float:
    """Shannon entropy (nats) of the hypothesis weights."""
    out = 0.0
    for h in hypotheses:
        w = h.weight
        if w > 0.0:
            out -= w * math.log(w)
    return out
