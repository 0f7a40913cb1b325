"""Per-scan recursion: predict, build matrices, generate children (MCMC or
exhaustive), apply birth/death bookkeeping, update weights jointly across
all parents, prune, and report."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, replace
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import ConfigError, EnumerationLimitError
from .filters import (
    DynamicsConfig,
    GaussianTrack,
    SensorModel,
    in_fov,
    predict_track,
    update_track,
)
from .hypotheses import (
    BIRTH,
    CLUTTER,
    AssociationEvent,
    BirthDeathConfig,
    Hypothesis,
    PruneStrategy,
    count_grandchildren,
    log_child_prior,
    log_sum_exp,
    prune,
    weight_entropy,
)
from .likelihoods import (
    AssociationMatrix,
    BirthModel,
    ClutterModel,
    build_matrix,
    hypothesis_log_likelihood,
    newborn_track,
)
from .oracle import EnumerationLimit, enumerate_child_events
from .sampler import SamplerConfig, chain_seed, sample_children
from .simulate import MeasurementFrame


class TrackerMode(str, Enum):
    MCMC = "mcmc"
    EXHAUSTIVE = "exhaustive"


@dataclass(frozen=True)
class TrackerConfig:
    sensor: SensorModel
    dynamics: DynamicsConfig
    clutter: ClutterModel
    birth_death: BirthDeathConfig = BirthDeathConfig()
    birth_model: BirthModel = BirthModel()
    sampler: SamplerConfig = SamplerConfig()
    h_inf: int = 50
    prune_strategy: PruneStrategy = PruneStrategy.TOP_K
    mode: TrackerMode = TrackerMode.MCMC
    adapt_rates: bool = False
    oracle_limit: EnumerationLimit = EnumerationLimit()

    def __post_init__(self) -> None:
        if self.h_inf < 1:
            raise ConfigError("tracker.h_inf must be >= 1")


@dataclass(frozen=True)
class TrackerReport:
    """Per-scan summary: the top hypothesis's estimates, the weight entropy,
    and the would-be exhaustive branching factor (big integer)."""

    time: float
    scan: int
    top_hypothesis_id: str
    estimated_count: int
    estimates: tuple[tuple[str, np.ndarray, np.ndarray], ...]
    weight_entropy: float
    hypothesis_count_bound: int
    n_hypotheses: int
    degenerate: bool
    alpha_used: float
    beta_used: float


def hypothesis_count_bound(
    hypotheses: Sequence[Hypothesis],
    n_returns: int,
    n_pixels: int,
    *,
    allow_births: bool = True,
    allow_deaths: bool = True,
) -> int:
    """Sum over hypotheses of the exhaustive grandchild count they would
    spawn for this frame. Birth/death sums collapse when the corresponding
    rate is zero (association-only count)."""
    return sum(
        count_grandchildren(
            len(h.tracks),
            n_returns,
            n_pixels,
            allow_births=allow_births,
            allow_deaths=allow_deaths,
        )
        for h in hypotheses
    )


def adapt_birth_death_rates(
    frame: MeasurementFrame,
    hypotheses: Sequence[Hypothesis],
    cfg: TrackerConfig,
) -> BirthDeathConfig:
    """One documented heuristic: compare the return count with the top
    hypothesis's in-FOV object count; a surplus of returns scales alpha up,
    a deficit scales beta up, both clamped to [1e-6, 0.5]."""
    base = cfg.birth_death
    top = max(hypotheses, key=lambda h: (h.log_weight, h.id))
    n_fov = sum(1 for t in top.tracks if in_fov(t.mean, cfg.sensor))
    m = frame.n_returns
    ratio_up = m / max(1, n_fov)
    ratio_down = n_fov / max(1, m)
    alpha = min(max(base.alpha * max(1.0, ratio_up), 1e-6), 0.5)
    beta = min(max(base.beta * max(1.0, ratio_down), 1e-6), 0.5)
    return replace(base, alpha=alpha, beta=beta)


def _realize_child(
    parent_id: str,
    child_id: str,
    log_weight: float,
    predicted: Sequence[GaussianTrack],
    event: AssociationEvent,
    frame: MeasurementFrame,
    cfg: TrackerConfig,
    next_label: "_LabelCounter",
) -> Hypothesis:
    """Apply the event to the predicted tracks: deaths removed, associated
    tracks updated with their returns, unassociated survivors kept as
    predicted, newborns instantiated from the birth pdf plus their return."""
    claimed: dict[str, int] = {}
    for i, entry in enumerate(event.assignments):
        if entry not in (BIRTH, CLUTTER):
            claimed[entry] = i
    tracks: list[GaussianTrack] = []
    for track in predicted:
        if track.label in event.deaths:
            continue
        i = claimed.get(track.label)
        if i is None:
            tracks.append(track)
        else:
            tracks.append(update_track(track, frame.returns[i], cfg.sensor)[0])
    for i, entry in enumerate(event.assignments):
        if entry == BIRTH:
            tracks.append(
                newborn_track(
                    next_label(),
                    frame.returns[i],
                    cfg.sensor,
                    cfg.dynamics.mu,
                    cfg.birth_model,
                )
            )
    return Hypothesis(id=child_id, parent_id=parent_id, log_weight=log_weight, tracks=tuple(tracks))


class _LabelCounter:
    """Globally fresh newborn labels for one tracker instance."""

    def __init__(self) -> None:
        self.n = 0

    def __call__(self) -> str:
        label = f"b{self.n:05d}"
        self.n += 1
        return label


class Tracker:
    """Stateful driver for the per-scan recursion. Hypothesis collections are
    only mutated between phases; a step is atomic from the caller's view."""

    def __init__(self, cfg: TrackerConfig) -> None:
        self.cfg = cfg
        self.scan_index = 0
        self._labels = _LabelCounter()
        self._prune_rng = random.Random(chain_seed(cfg.sampler.seed, "prune", 0))

    def initial_hypotheses(self, tracks: Sequence[GaussianTrack]) -> list[Hypothesis]:
        return [Hypothesis(id="h0", parent_id=None, log_weight=0.0, tracks=tuple(tracks))]

    def step(
        self, hypotheses: Sequence[Hypothesis], frame: MeasurementFrame
    ) -> tuple[list[Hypothesis], TrackerReport]:
        cfg = self.cfg
        total_weight = sum(h.weight for h in hypotheses)
        if abs(total_weight - 1.0) > 1e-6:
            raise ValueError(f"hypothesis weights sum to {total_weight}, expected 1")
        self.scan_index += 1
        bd = (
            adapt_birth_death_rates(frame, hypotheses, cfg)
            if cfg.adapt_rates
            else cfg.birth_death
        )
        m = frame.n_returns
        bound = hypothesis_count_bound(
            hypotheses,
            m,
            bd.n_pixels,
            allow_births=bd.alpha > 0.0,
            allow_deaths=bd.beta > 0.0,
        )
        parents = sorted(hypotheses, key=lambda h: h.id)
        candidates: list[tuple[str, Sequence[GaussianTrack], AssociationEvent, float]] = []
        for parent in parents:
            predicted = tuple(predict_track(t, cfg.dynamics) for t in parent.tracks)
            matrix = build_matrix(predicted, frame.returns, cfg.sensor, cfg.clutter, bd)
            pred_parent = Hypothesis(
                id=parent.id,
                parent_id=parent.parent_id,
                log_weight=parent.log_weight,
                tracks=predicted,
            )
            for event, log_score in self._children_of(pred_parent, matrix, bd):
                candidates.append(
                    (parent.id, predicted, event, parent.log_weight + log_score)
                )
        finite = [c for c in candidates if c[3] > -math.inf]
        if not finite:
            # Degenerate update: fall back to prior weights on the predicted
            # hypotheses and flag the report.
            fallback = [
                Hypothesis(
                    id=f"h{self.scan_index}-{idx:05d}",
                    parent_id=parent.id,
                    log_weight=parent.log_weight,
                    tracks=tuple(predict_track(t, cfg.dynamics) for t in parent.tracks),
                )
                for idx, parent in enumerate(parents)
            ]
            report = self._report(frame, fallback, bound, bd, degenerate=True)
            return fallback, report
        total = log_sum_exp([c[3] for c in finite])
        weighted = [
            (pid, predicted, event, min(score - total, 0.0))
            for pid, predicted, event, score in finite
        ]
        weighted.sort(key=lambda c: (-c[3], c[0], c[2].canonical_key()))
        kept = weighted[: cfg.h_inf] if cfg.prune_strategy is PruneStrategy.TOP_K else weighted
        realized = [
            _realize_child(
                pid,
                f"h{self.scan_index}-{idx:05d}",
                log_weight,
                predicted,
                event,
                frame,
                cfg,
                self._labels,
            )
            for idx, (pid, predicted, event, log_weight) in enumerate(kept)
        ]
        if cfg.prune_strategy is PruneStrategy.TOP_K:
            # Already truncated above; renormalize what's left.
            new_hyps = prune(realized, cfg.h_inf, PruneStrategy.TOP_K)
        else:
            new_hyps = prune(
                realized, cfg.h_inf, PruneStrategy.SAMPLE, rng=self._prune_rng
            )
        report = self._report(frame, new_hyps, bound, bd, degenerate=False)
        return new_hyps, report

    def _children_of(
        self,
        pred_parent: Hypothesis,
        matrix: AssociationMatrix,
        bd: BirthDeathConfig,
    ) -> list[tuple[AssociationEvent, float]]:
        cfg = self.cfg
        if cfg.mode is TrackerMode.MCMC:
            samples = sample_children(pred_parent, matrix, cfg.sampler, bd, cfg.sensor)
            return [(s.event, s.log_score) for s in samples]
        out = []
        cap = cfg.oracle_limit.max_grandchildren
        for event in enumerate_child_events(
            pred_parent.labels, matrix.n_returns, matrix.death_candidate_labels()
        ):
            score = log_child_prior(
                event, pred_parent, bd, cfg.sensor.p_d, matrix.n_returns
            ) + hypothesis_log_likelihood(event, matrix)
            out.append((event, score))
            if len(out) > cap:
                raise EnumerationLimitError(
                    f"exhaustive mode refused: more than {cap} children for one parent"
                )
        return out

    def _report(
        self,
        frame: MeasurementFrame,
        hypotheses: Sequence[Hypothesis],
        bound: int,
        bd: BirthDeathConfig,
        degenerate: bool,
    ) -> TrackerReport:
        top = max(hypotheses, key=lambda h: (h.log_weight, h.id))
        estimates = tuple(
            (t.label, t.mean.copy(), t.covariance.copy()) for t in top.tracks
        )
        return TrackerReport(
            time=frame.time,
            scan=self.scan_index,
            top_hypothesis_id=top.id,
            estimated_count=len(top.tracks),
            estimates=estimates,
            weight_entropy=weight_entropy(hypotheses),
            hypothesis_count_bound=bound,
            n_hypotheses=len(hypotheses),
            degenerate=degenerate,
            alpha_used=bd.alpha,
            beta_used=bd.beta,
        )


def run_tracker(
    tracker: Tracker,
    initial: Sequence[Hypothesis],
    frames: Sequence[MeasurementFrame],
) -> tuple[list[Hypothesis], list[TrackerReport]]:
    """Drive the recursion over a frame sequence."""
    hyps = list(initial)
    reports = []
    for frame in frames:
        hyps, report = tracker.step(hyps, frame)
        reports.append(report)
    return hyps, reports
